"""Sobolev and modulation-space norms.

M_{2,p} uses sharp unit boxes [n, n+1]: q_hat is evaluated off-grid by a
direct sum over the samples and each box is integrated with Gauss-Legendre
nodes.  Since the sampled q has a periodic transform, the boxes cover one
period [-pi/dx, pi/dx] and M_{2,2} reproduces the discrete L2 norm.

M_{r,p} uses a smooth partition psi_n(xi) = f(xi - n) - f(xi - n - 1),
where f rises from 0 to 1 along a raised cosine on [-beta, beta].  The sum
over n telescopes to 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .field import GridSpec, SampledField, SpectrumField, inverse_transform, transform

BETA = 0.25
GL_MIN_NODES = 24


def sobolev_norm(q: SampledField, s: float) -> float:
    """(int |q_hat|^2 (1 + xi^2)^s d xi)^(1/2)."""
    F = transform(q)
    return float(np.sqrt(np.sum(np.abs(F.coefficients) ** 2 * (1 + F.xi**2) ** s) * q.grid.dxi))


def _rising(t: np.ndarray, beta: float) -> np.ndarray:
    u = np.clip((t + beta) / (2 * beta), 0.0, 1.0)
    return np.sin(0.5 * np.pi * u) ** 2


@dataclass(frozen=True)
class BoxDecomposition:
    """Smooth unit partition of unity on the frequency grid of ``grid``."""

    grid: GridSpec
    beta: float = BETA

    def __post_init__(self):
        if not 0 < self.beta < 0.5:
            raise ValueError("beta must lie in (0, 1/2)")

    @property
    def indices(self) -> np.ndarray:
        xi = self.grid.xi
        return np.arange(int(np.floor(xi[0] - self.beta)), int(np.floor(xi[-1] + self.beta)) + 1)

    def profile(self, n: int, xi: np.ndarray | None = None) -> np.ndarray:
        xi = self.grid.xi if xi is None else np.asarray(xi)
        return _rising(xi - n, self.beta) - _rising(xi - n - 1, self.beta)

    def partition_defect(self) -> float:
        total = sum(self.profile(n) for n in self.indices)
        return float(np.max(np.abs(total - 1.0)))

    def piece(self, q: SampledField, n: int) -> np.ndarray:
        """Samples of box_n q."""
        return _inverse(q.grid, transform(q).coefficients * self.profile(n))


def _inverse(grid: GridSpec, C: np.ndarray) -> np.ndarray:
    return inverse_transform(SpectrumField(grid, C)).values


def _lp(values: np.ndarray, p: float) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return 0.0
    if np.isinf(p):
        return float(values.max())
    return float(np.sum(values**p) ** (1.0 / p))


def _check_p(p: float) -> float:
    p = float(p)
    if not (p >= 1):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    return p


def direct_transform(q: SampledField, xi: np.ndarray) -> np.ndarray:
    """q_hat at arbitrary frequencies, (2 pi)^(-1/2) sum_j q(x_j) exp(-i x_j xi) dx."""
    v = q.values
    idx = np.flatnonzero(np.abs(v) > 0)
    if idx.size == 0:
        return np.zeros(np.shape(xi), dtype=complex)
    x = q.grid.x[idx]
    out = np.exp(-1j * np.multiply.outer(np.asarray(xi), x)) @ v[idx]
    return out * q.grid.dx / np.sqrt(2 * np.pi)


def sharp_box_energies(q_hat: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                       n_nodes: int = GL_MIN_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Box indices n and int_{[n, n+1] cap [lo, hi]} |q_hat|^2 d xi."""
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    ns = np.arange(int(np.floor(lo)), int(np.ceil(hi)))
    a = np.maximum(ns, lo)
    b = np.minimum(ns + 1.0, hi)
    xi = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * t[None, :]
    vals = np.abs(q_hat(xi)) ** 2
    return ns, 0.5 * (b - a) * (vals @ w)


def _sharp_nodes(q: SampledField) -> int:
    # |q_hat|^2 oscillates at most like exp(i D xi) with D the support diameter
    idx = np.flatnonzero(np.abs(q.values) > 0)
    if idx.size == 0:
        return GL_MIN_NODES
    D = q.grid.x[idx[-1]] - q.grid.x[idx[0]]
    return max(GL_MIN_NODES, int(np.ceil(0.6 * D)) + 16)


def modulation_norm(q: SampledField, r_index: float, p: float, smooth: bool | None = None,
                    multiplier: Callable[[np.ndarray], np.ndarray] | None = None,
                    beta: float = BETA) -> float:
    """||q||_{M_{r,p}} for r in {1, 2, inf}.

    For r = 2 the sharp boxes are used unless ``smooth`` is set; other r
    always use the smooth partition.  ``multiplier`` applies a Fourier
    symbol to q first.
    """
    p = _check_p(p)
    r = float(r_index)
    if r not in (1.0, 2.0, np.inf):
        raise ValueError(f"unsupported r = {r_index!r}; use 1, 2 or inf")
    if smooth is None:
        smooth = r != 2.0
    if not smooth:
        if r != 2.0:
            raise ValueError("sharp boxes are only defined for r = 2")
        centre = 0.5 * (q.grid.x[0] + q.grid.x[-1] + q.grid.dx)

        def q_hat(xi):
            # shift the phase origin to the grid centre; |q_hat| is unchanged
            out = direct_transform(q, xi) * np.exp(1j * xi * centre)
            return out * multiplier(xi) if multiplier is not None else out

        nyq = np.pi / q.grid.dx
        _, energies = sharp_box_energies(q_hat, -nyq, nyq, _sharp_nodes(q))
        return _lp(np.sqrt(np.maximum(energies, 0.0)), p)
    boxes = BoxDecomposition(q.grid, beta)
    F = transform(q)
    C = F.coefficients * (multiplier(F.xi) if multiplier is not None else 1.0)
    norms = []
    for n in boxes.indices:
        piece = _inverse(q.grid, C * boxes.profile(n))
        a = np.abs(piece)
        if r == 1.0:
            norms.append(np.sum(a) * q.grid.dx)
        elif r == 2.0:
            norms.append(np.sqrt(np.sum(a**2) * q.grid.dx))
        else:
            norms.append(a.max())
    return _lp(np.array(norms), p)


def m2p_from_symbol(q_hat: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, p: float,
                    n_nodes: int = GL_MIN_NODES) -> float:
    """M_{2,p} norm of a function given by its transform on [lo, hi] (zero outside)."""
    _, energies = sharp_box_energies(q_hat, lo, hi, n_nodes)
    return _lp(np.sqrt(np.maximum(energies, 0.0)), _check_p(p))


@dataclass(frozen=True)
class IntegrationBound:
    lhs: float
    rhs: float
    decays: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0


def primitive(f: SampledField) -> SampledField:
    """x -> int_{-inf}^x f, spectrally, pinned to zero at the left edge."""
    xi = f.grid.xi_fft
    F = np.fft.fft(f.values)
    mean = F[0] / f.grid.n_points
    F[0] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(xi != 0, F / (1j * np.where(xi != 0, xi, 1.0)), 0.0)
    g = np.fft.ifft(G) + mean * (f.grid.x - f.grid.x[0])
    return f.with_values(g - g[0], f"int {f.label}")


def integration_bound_check(f: SampledField, p: float, decay_tol: float = 1e-8) -> IntegrationBound:
    """Both sides of ||int_{-inf}^x f||_{M_{inf,1}} <~ ||f||_{M_{1,p}}.

    When the primitive does not return to zero at the right edge (int f != 0)
    the left side is flagged through ``decays``.
    """
    if not np.any(f.values):
        return IntegrationBound(0.0, 0.0, True)
    F = primitive(f)
    scale = max(np.max(np.abs(F.values)), 1e-300)
    decays = bool(abs(F.values[-1]) <= decay_tol * scale)
    lhs = modulation_norm(F, np.inf, 1)
    rhs = modulation_norm(f, 1, p)
    return IntegrationBound(lhs, rhs, decays)


def resolvent_bound_sweep(fields, ks, p: float, omega: complex) -> dict:
    """sup over fields of ||(d/dx - k omega)^{-1} f||_{M_{2,1}} / ||f||_{M_{2,p}}, and the fitted k-exponent."""
    ratios = []
    for k in ks:
        z = k * omega
        best = 0.0
        for f in fields:
            den = modulation_norm(f, 2, p)
            if den == 0:
                continue
            num = modulation_norm(f, 2, 1, multiplier=lambda xi, z=z: 1.0 / (1j * xi - z))
            best = max(best, num / den)
        ratios.append(best)
    ks_arr = np.asarray(ks, dtype=float)
    slope = float(np.polyfit(np.log(ks_arr), np.log(ratios), 1)[0]) if len(ks_arr) > 1 else float("nan")
    return {"k": list(map(float, ks_arr)), "ratio": [float(v) for v in ratios], "exponent": slope}
