"""Scattering data, Fredholm determinants and conserved energies for N x N Lax operators."""
