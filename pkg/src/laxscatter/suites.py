"""Named potential suites shared by the CLI, the tests and the acceptance runs."""

from __future__ import annotations

import numpy as np

from .field import GridSpec, SampledField, make_grid, mollify, standard_potential
from .lax import LaxSpec, build_qdnls_spec, random_general_spec

DEFAULT_GRID = (20.0, 1024)
EQUALITY_KS = (2.0, 4.0, 8.0)
PLATEAU = (4.0, 6.0)


def default_grid() -> GridSpec:
    return make_grid(*DEFAULT_GRID)


def _mollified_gaussian(amplitude: complex, width: float, center: float, grid: GridSpec) -> SampledField:
    g = standard_potential("gaussian", amplitude, width, center, grid)
    return mollify(g, PLATEAU[0], PLATEAU[1], center)


def qdnls_pairs(grid: GridSpec) -> list[tuple[SampledField, SampledField]]:
    """Ten compactly supported (q, r) pairs: bumps and mollified Gaussians, r independent of q."""
    bump = lambda a, w, c: standard_potential("bump", a, w, c, grid)
    gauss = lambda a, w, c: _mollified_gaussian(a, w, c, grid)
    pairs = [
        (bump(0.3, 2.0, 0.0), bump(0.3j, 2.0, 0.2)),
        (bump(0.2, 1.5, -0.5), bump(0.25, 2.5, 0.5)),
        (bump(0.4 + 0.1j, 2.0, 0.3), bump(-0.2, 1.8, -0.3)),
        (bump(0.15j, 3.0, 0.0), bump(0.3, 1.2, 0.0)),
        (bump(0.35, 2.2, 1.0), bump(0.35, 2.2, 1.0).conj()),
        (gauss(0.3, 1.2, 0.0), gauss(0.2j, 1.2, 0.3)),
        (gauss(0.2 - 0.1j, 1.2, -0.4), gauss(0.2, 1.3, 0.2)),
        (gauss(0.25, 1.25, 0.5), gauss(0.25, 1.25, 0.5).conj()),
        (gauss(0.2, 1.3, 0.0), gauss(-0.25j, 1.2, -0.2)),
        (gauss(0.25j, 1.2, 0.8), gauss(0.2, 1.3, -0.8)),
    ]
    return [(q.with_values(q.values, f"q{i}"), r.with_values(r.values, f"r{i}")) for i, (q, r) in enumerate(pairs)]


def qdnls_suite(grid: GridSpec, ks=EQUALITY_KS) -> list[LaxSpec]:
    return [build_qdnls_spec(q, r, k) for q, r in qdnls_pairs(grid) for k in ks]


def general_suite(grid: GridSpec, seed: int = 0, k: float = 3.0, sizes=(2, 2, 2, 4, 4, 4),
                  amplitude: float = 0.15) -> list[LaxSpec]:
    """Seeded random N x N specs; one generator drives the whole suite."""
    rng = np.random.default_rng(seed)
    return [random_general_spec(rng, n, grid, k, amplitude) for n in sizes]


def small_amplitude_suite(grid: GridSpec) -> list[SampledField]:
    """Data for the energy experiments, small enough for the series smallness at k0 = 1."""
    out = [
        standard_potential("gaussian", 0.08, 1.0, 0.0, grid),
        standard_potential("gaussian", 0.06, 1.5, 0.5, grid),
        standard_potential("sech", 0.05j, 1.0, 0.0, grid),
    ]
    chirped = standard_potential("gaussian", 0.06, 1.0, 0.0, grid)
    out.append(chirped.with_values(chirped.values * np.exp(0.5j * grid.x), "chirped gaussian"))
    return out


def trajectory_datum(grid: GridSpec) -> SampledField:
    """Gaussian of width 1.5, which disperses least over t in [0, 1]."""
    return standard_potential("gaussian", 0.06, 1.5, 0.0, grid, "trajectory datum")
