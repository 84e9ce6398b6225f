"""Jost solutions of L Psi = 0 in renormalized form phi = exp(-omega_j k x) Psi.

Two independent solvers are provided.  ``solve_jost_march`` integrates
phi' = (k J - omega_j k + U0) phi with exponential RK4 (step dx) from the edge
of a compactly supported potential.  ``solve_left_jost_volterra`` runs Picard iteration on
the integral system phi = e_1 + S phi, where S applies the inverse of
d/dx - k(omega_i - omega_1) componentwise, written as a Fourier multiplier.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .field import GridSpec, SampledField, fourier_midpoints, spectral_apply
from .lax import LaxSpec

SMALLNESS_DELTA = 0.1
EDGE_MARGIN = 2.0


class JostError(ValueError):
    """A solver precondition does not hold."""


class SmallnessError(JostError):
    """The Picard iteration is not guaranteed to contract."""

    def __init__(self, message: str, required_k: float):
        super().__init__(message)
        self.required_k = required_k


class ConvergenceError(JostError):
    """Picard iteration did not reach the tolerance."""


@dataclass(frozen=True, eq=False)
class JostSolution:
    """Renormalized Jost solution; ``values`` has shape (n_points, n)."""

    side: str
    index: int
    k: float
    grid: GridSpec
    values: np.ndarray
    method: str
    iterations: int = 0
    contraction_factor: float = 0.0
    increments: tuple = ()
    support_window: tuple | None = None
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def component(self, c: int) -> np.ndarray:
        return self.values[:, c]


@dataclass(frozen=True, eq=False)
class JostSet:
    """Columns [Phi_1^-, ..., Phi_l^-, Phi_{l+1}^+, ..., Phi_n^+]."""

    solutions: tuple
    split_index: int
    k: float
    omegas: tuple = ()
    cross_validation: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        sols = tuple(self.solutions)
        object.__setattr__(self, "solutions", sols)
        sides = [s.side for s in sols]
        l = self.split_index
        if sides != ["left"] * l + ["right"] * (len(sols) - l):
            raise JostError(f"expected {l} left then {len(sols) - l} right solutions, got {sides}")
        if [s.index for s in sols] != list(range(len(sols))):
            raise JostError("solutions must be ordered by index")

    @property
    def n(self) -> int:
        return len(self.solutions)

    @property
    def grid(self) -> GridSpec:
        return self.solutions[0].grid

    @property
    def n_left(self) -> int:
        return self.split_index

    @property
    def n_right(self) -> int:
        return self.n - self.split_index

    def matrix(self, at: int | np.ndarray | None = None) -> np.ndarray:
        """Column matrix; shape (n, n) for one node or (npts, n, n)."""
        cols = np.stack([s.values for s in self.solutions], axis=-1)
        return cols if at is None else cols[at]

    def support_window(self) -> tuple:
        return self.solutions[0].support_window


def support_window(spec: LaxSpec) -> tuple[int, int]:
    """Indices (a, b) bracketing the support: u vanishes at a, b and outside.

    Raises :class:`JostError` when u is not compactly supported inside
    (-L + 2, L - 2).
    """
    grid = spec.grid
    nz = spec.support_indices()
    if nz.size == 0:
        return (0, 0)
    x = grid.x
    lo, hi = -grid.half_width + EDGE_MARGIN, grid.half_width - EDGE_MARGIN
    if nz[0] == 0 or nz[-1] == grid.n_points - 1:
        raise JostError("potential is not compactly supported on the grid")
    if x[nz[0]] <= lo or x[nz[-1]] >= hi:
        raise JostError(f"support [{x[nz[0]]:.3g}, {x[nz[-1]]:.3g}] touches the grid edge margin")
    return int(nz[0] - 1), int(nz[-1] + 1)


def _midpoint_u0(spec: LaxSpec) -> np.ndarray:
    mids = np.stack([fourier_midpoints(f.values, spec.grid) for f in spec.fields])
    return spec.U0.evaluate(mids)


def solve_jost_march(spec: LaxSpec, side: str, j: int) -> JostSolution:
    """Exponential RK4 march from the support edge with phi = e_j on the initialization side."""
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    n = spec.n
    if not 0 <= j < n:
        raise IndexError(f"index {j} out of range for n = {n}")
    grid = spec.grid
    x, h = grid.x, grid.dx
    a, b = support_window(spec)
    ej = np.zeros(n, dtype=complex)
    ej[j] = 1.0
    phi = np.zeros((grid.n_points, n), dtype=complex)
    d = spec.k * (spec.J.array - spec.J.omegas[j])
    if a == b:
        phi[:, j] = 1.0
        return JostSolution(side, j, spec.k, grid, _freeze(phi), "march", support_window=(a, b))

    U = spec.u0_values
    Um = _midpoint_u0(spec)
    with np.errstate(over="ignore", invalid="ignore"):
        if side == "left":
            seg = _kernels.march(U[a:b + 1], Um[a:b], d, h, ej)
            phi[:a] = ej
            phi[a:b + 1] = seg
            p, xs = seg[-1], x[b + 1:] - x[b]
            phi[b + 1:] = p[None, :] * np.exp(np.outer(xs, d))
        else:
            seg = _kernels.march(U[a:b + 1][::-1], Um[a:b][::-1], d, -h, ej)
            phi[b + 1:] = ej
            phi[a:b + 1] = seg[::-1]
            p, xs = seg[-1], x[:a] - x[a]
            phi[:a] = p[None, :] * np.exp(np.outer(xs, d))
    return JostSolution(side, j, spec.k, grid, _freeze(phi), "march", support_window=(a, b))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def volterra_inverse(values: np.ndarray, grid: GridSpec, eta: complex) -> np.ndarray:
    """Inverse of d/dx - eta integrating from the left edge (Re eta <= 0).

    For eta = 0 this is the antiderivative vanishing at the left edge; for
    Re eta < 0 it is the multiplier 1/(i xi - eta).
    """
    if eta == 0:
        mean = values.mean()
        g = spectral_apply(values - mean, grid, _safe_inverse_derivative)
        return g - g[0] + mean * (grid.x + grid.half_width)
    if eta.real >= 0:
        raise JostError("left-edge Volterra inverse needs Re(eta) < 0")
    return spectral_apply(values, grid, lambda xi: 1.0 / (1j * xi - eta))


def _safe_inverse_derivative(xi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(xi, dtype=complex)
    nz = xi != 0
    out[nz] = 1.0 / (1j * xi[nz])
    return out


def smallness_quantity(spec: LaxSpec) -> float:
    """k^(-1/2) times the sum of the L2 norms of the field components."""
    return float(sum(f.l2_norm() for f in spec.fields) / np.sqrt(spec.k))


def solve_left_jost_volterra(spec: LaxSpec, tol: float = 1e-12, max_iter: int = 200,
                             delta: float = SMALLNESS_DELTA) -> JostSolution:
    """Picard iteration for the first left Jost solution.

    Needs omega_1 to have strictly the largest real part (true for qdNLS) and
    k^(-1/2) * sum ||u_i|| <= delta.
    """
    w = spec.J.array
    if np.any(w[1:].real >= w[0].real):
        raise JostError("the first entry of J must have strictly the largest real part")
    s = smallness_quantity(spec)
    if s > delta:
        norms = sum(f.l2_norm() for f in spec.fields)
        required = (norms / delta) ** 2
        raise SmallnessError(f"k^(-1/2)(sum ||u||) = {s:.4g} exceeds {delta}; need k >= {required:.6g}",
                             required)
    grid = spec.grid
    n = spec.n
    etas = spec.k * (w - w[0])
    etas[0] = 0.0
    U = spec.u0_values
    phi = np.zeros((grid.n_points, n), dtype=complex)
    phi[:, 0] = 1.0
    increments = []
    for it in range(1, max_iter + 1):
        rhs = np.einsum("xij,xj->xi", U, phi)
        new = np.empty_like(phi)
        for c in range(n):
            new[:, c] = volterra_inverse(rhs[:, c], grid, etas[c])
        new[:, 0] += 1.0
        diff = float(np.max(np.abs(new - phi)))
        increments.append(diff)
        phi = new
        if diff < tol:
            break
    else:
        raise ConvergenceError(f"Picard iteration did not converge in {max_iter} iterations "
                               f"(last increment {increments[-1]:.3g})")
    try:
        window = support_window(spec)
    except JostError:
        window = None
    return JostSolution("left", 0, spec.k, grid, _freeze(phi), "volterra", iterations=it,
                        contraction_factor=contraction_factor(increments), increments=tuple(increments),
                        support_window=window, diagnostics={"smallness": s, "l2_deviation": _l2_dev(phi, grid)})


def contraction_factor(increments) -> float:
    """Two-step geometric rate sqrt(d_{m+2}/d_m) of successive increments.

    Increments alternate between the first component and the rest, so the
    one-step ratio oscillates; the two-step rate is stable.  The largest
    rate over increments above round-off is reported.
    """
    d = np.asarray(increments, dtype=float)
    if d.size == 0 or d[0] == 0:
        return 0.0
    usable = d[d > 1e3 * np.finfo(float).eps * max(1.0, d[0])]
    if usable.size >= 3:
        return float(np.max(np.sqrt(usable[2:] / usable[:-2])))
    if usable.size == 2:
        return float(usable[1] / usable[0])
    return 0.0


def _l2_dev(phi: np.ndarray, grid: GridSpec) -> list:
    return [float(np.sqrt(np.sum(np.abs(phi[:, c] - (1.0 if c == 0 else 0.0)) ** 2) * grid.dx))
            for c in range(phi.shape[1])]


def jost_asymptotics_check(sol: JostSolution, spec: LaxSpec | None = None) -> dict:
    """Edge deviation from e_j and sup-norm of the renormalized solution."""
    edge = 0 if sol.side == "left" else sol.grid.n_points - 1
    ej = np.zeros(sol.n, dtype=complex)
    ej[sol.index] = 1.0
    dev = float(np.linalg.norm(sol.values[edge] - ej))
    with np.errstate(over="ignore", invalid="ignore"):
        sup = float(np.max(np.linalg.norm(sol.values, axis=1)))
    out = {"side": sol.side, "index": sol.index, "edge_deviation": dev, "sup_norm": sup,
           "bounded": bool(np.isfinite(sup))}
    if sol.method == "volterra" and sol.contraction_factor < 1:
        out["neumann_bound"] = 1.0 / (1.0 - sol.contraction_factor)
    return out


def solve_jost_set(spec: LaxSpec, cross_validate: bool = True) -> JostSet:
    """All n Jost solutions by marching; first left column cross-checked by Picard."""
    l = spec.split_index
    sols = [solve_jost_march(spec, "left" if j < l else "right", j) for j in range(spec.n)]
    cv = {}
    if cross_validate and spec.kind == "qdnls":
        try:
            vol = solve_left_jost_volterra(spec)
        except (SmallnessError, ConvergenceError) as exc:
            cv = {"performed": False, "reason": str(exc)}
        else:
            cv = {"performed": True, "sup_difference": float(np.max(np.abs(vol.values - sols[0].values))),
                  "iterations": vol.iterations, "contraction_factor": vol.contraction_factor}
    return JostSet(tuple(sols), l, spec.k, spec.J.omegas, cv)


def coarsen_spec(spec: LaxSpec) -> LaxSpec:
    """Same spec on every other grid node."""
    g = spec.grid.coarsened()
    return spec.with_fields([SampledField(g, f.values[::2], f.label) for f in spec.fields])


def write_jost_csv(path, sol: JostSolution) -> None:
    """CSV with x then interleaved real/imaginary parts of each component."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["x"]
        for c in range(sol.n):
            header += [f"re{c + 1}", f"im{c + 1}"]
        w.writerow(header)
        for x, row in zip(sol.grid.x, sol.values):
            line = [f"{x:.17g}"]
            for v in row:
                line += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            w.writerow(line)
