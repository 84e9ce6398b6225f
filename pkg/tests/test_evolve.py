import numpy as np
import pytest
from hypothesis import given, strategies as st

from laxscatter.evolve import (EvolutionConfig, EvolutionError, evolve_qdnls, hamiltonian, load_trajectory,
                               mass, save_trajectory, scattering_window)
from laxscatter.field import make_grid, standard_potential


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(0.0, 1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(0.1, -1.0)
    with pytest.raises(ValueError):
        EvolutionConfig(0.1, 1.0, stride=0)
    with pytest.raises(ValueError):
        EvolutionConfig(0.3, 1.0).n_steps
    assert EvolutionConfig(0.1, 1.0).n_steps == 10


def test_linear_gaussian_exact(grid):
    q0 = standard_potential("gaussian", 1.0, 1.0, 0.0, grid)
    rec = evolve_qdnls(q0, EvolutionConfig(0.05, 0.5, nonlinear=False))
    D = 1j / np.sqrt(3)
    for t, snap in zip(rec.times, rec.snapshots):
        s = 1 + 4 * D * t
        exact = s**-0.5 * np.exp(-grid.x**2 / s)
        assert np.max(np.abs(snap.values - exact)) < 1e-12


def test_zero_stays_zero(grid):
    z = standard_potential("gaussian", 0.0, 1.0, 0.0, grid)
    rec = evolve_qdnls(z, EvolutionConfig(0.01, 0.05))
    assert all(not np.any(s.values) for s in rec.snapshots)


@given(st.floats(0.01, 0.2), st.floats(-0.5, 0.5))
def test_mass_and_hamiltonian_conserved(amp, phase):
    grid = make_grid(20, 256)
    q0 = standard_potential("gaussian", amp * np.exp(1j * phase), 1.5, 0.0, grid)
    rec = evolve_qdnls(q0, EvolutionConfig(1e-2, 0.2, stride=5))
    assert rec.max_relative_drift("mass") < 1e-9
    assert abs(rec.hamiltonian[-1] - rec.hamiltonian[0]) < 1e-9 * max(1.0, abs(rec.hamiltonian[0]))


def test_fourth_order_in_dt(small_grid):
    q0 = standard_potential("gaussian", 0.5, 1.5, 0.0, small_grid)
    ref = evolve_qdnls(q0, EvolutionConfig(1e-3, 0.4)).final().values
    errs = [np.max(np.abs(evolve_qdnls(q0, EvolutionConfig(dt, 0.4)).final().values - ref))
            for dt in (0.04, 0.02)]
    assert 12 < errs[0] / errs[1] < 20


def test_hamiltonian_real_field(grid):
    q = standard_potential("gaussian", 0.3, 1.0, 0.0, grid)
    # kinetic part vanishes for real q, leaving -(2/3) int q^3
    assert hamiltonian(q) == pytest.approx(-(2 / 3) * 0.027 * np.sqrt(np.pi / 3), rel=1e-12)


def test_mass_of_gaussian(grid):
    q = standard_potential("gaussian", 1.0, 1.0, 0.0, grid)
    assert mass(q) == pytest.approx(np.sqrt(np.pi / 2), rel=1e-13)


def test_edge_rejected(grid):
    q = standard_potential("gaussian", 1.0, 1.0, 19.9, grid)
    with pytest.raises(ValueError, match="grid edge"):
        evolve_qdnls(q, EvolutionConfig(0.1, 0.1))


def test_blowup_guard(small_grid):
    q = standard_potential("gaussian", 50.0, 1.0, 0.0, small_grid)
    with pytest.raises(EvolutionError):
        evolve_qdnls(q, EvolutionConfig(0.05, 5.0))


def test_stride_keeps_endpoints(small_grid):
    q = standard_potential("gaussian", 0.1, 1.5, 0.0, small_grid)
    rec = evolve_qdnls(q, EvolutionConfig(0.01, 0.07, stride=3))
    assert rec.times == pytest.approx([0.0, 0.03, 0.06, 0.07])


def test_scattering_window_changes_little(grid):
    q = standard_potential("gaussian", 0.06, 1.5, 0.0, grid)
    w = scattering_window(q)
    assert np.max(np.abs(w.values - q.values)) < 1e-14
    assert w.values[0] == 0 and w.values[-1] == 0


def test_trajectory_round_trip(tmp_path, small_grid):
    q = standard_potential("gaussian", 0.1, 1.5, 0.0, small_grid)
    rec = evolve_qdnls(q, EvolutionConfig(0.01, 0.02))
    save_trajectory(rec, tmp_path)
    back = load_trajectory(tmp_path)
    assert back.times == rec.times and back.mass == rec.mass
    assert all(np.array_equal(a.values, b.values) for a, b in zip(back.snapshots, rec.snapshots))
