"""Green's function of L, its renormalized diagonal and functional derivatives.

Sign table used throughout (Lambda = -R0 U0, L = L0 - U0, R = L^{-1}):

    R - R0                 = (1 - R0 U0)^{-1} R0 U0 R0
    g(x)                   = diagonal of the kernel of R - R0 (continuous)
    d log T^{-1} / d u_i   = -tr(nabla_i U0 g)
    d log det2(1 + Lambda) / d u_i = -tr(nabla_i U0 g)

With Phi the matrix of raw Jost columns and P_L, P_R the projectors on the
left and right columns,

    G(x, y) = -Phi(x) P_L Phi(y)^{-1}   for x < y,
    G(x, y) = +Phi(x) P_R Phi(y)^{-1}   for x > y,

which is the tensor formula with dual vectors built from determinants.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import SampledField, standard_potential
from .fredholm import (FredholmError, assemble_lambda, effective_support, lambda_hs_norm,
                       exact_low_order_correction, logdet2_matrix, resolvent_matrix)
from .jost import JostSet, solve_jost_set
from .lax import LaxSpec, nabla_U0
from .scattering import transmission_wronskian

FD_EPSILONS = (1e-3, 1e-4)
# one centred step for log det2, whose evaluations include walk sums and cost far more
FD_EPSILONS_DET = (1e-4,)


def _dual_vectors(phi_y: np.ndarray) -> np.ndarray:
    """Rows v_i with v_i[m] = det(phi_y with column i replaced by e_m)."""
    n = phi_y.shape[0]
    out = np.empty((n, n), dtype=complex)
    for i in range(n):
        for m in range(n):
            A = phi_y.copy()
            A[:, i] = 0.0
            A[m, i] = 1.0
            out[i, m] = np.linalg.det(A)
    return out


def greens_from_jost(jost: JostSet, T_inv: complex, x: int, y: int, limit: str | None = None) -> np.ndarray:
    """G(x, y) at grid nodes from the tensor formula.

    For x = y pass ``limit`` = "+" or "-" for the one-sided values.
    """
    if x == y and limit not in ("+", "-"):
        raise ValueError("x = y needs limit='+' or '-'; use the diagonal routines for g")
    above = x > y or (x == y and limit == "+")
    grid = jost.grid
    omegas = np.asarray(jost.omegas)
    dist = grid.x[x] - grid.x[y]
    phi_x = jost.matrix(x)
    v = _dual_vectors(jost.matrix(y))
    T = 1.0 / T_inv
    l = jost.split_index
    G = np.zeros((jost.n, jost.n), dtype=complex)
    cols = range(l, jost.n) if above else range(l)
    for i in cols:
        G += np.exp(jost.k * omegas[i] * dist) * np.outer(phi_x[:, i], v[i])
    return (T if above else -T) * G


@dataclass(frozen=True, eq=False)
class GreensEvaluator:
    """G(x, y) for a fixed spec, built from its Jost set."""

    spec: LaxSpec
    jost: JostSet
    T_inv: complex

    @classmethod
    def from_spec(cls, spec: LaxSpec) -> "GreensEvaluator":
        jost = solve_jost_set(spec, cross_validate=False)
        return cls(spec, jost, transmission_wronskian(jost).T_inv)

    def __call__(self, x: int, y: int, limit: str | None = None) -> np.ndarray:
        return greens_from_jost(self.jost, self.T_inv, x, y, limit)

    def projector_form(self, x: int, y: int, limit: str | None = None) -> np.ndarray:
        """Same kernel from -Phi(x) P_L Phi(y)^{-1} or Phi(x) P_R Phi(y)^{-1}."""
        above = x > y or (x == y and limit == "+")
        l = self.jost.split_index
        n = self.jost.n
        dist = self.jost.grid.x[x] - self.jost.grid.x[y]
        E = np.exp(self.spec.k * self.spec.J.array * dist)
        mask = np.arange(n) >= l if above else np.arange(n) < l
        D = np.diag(np.where(mask, E, 0.0))
        G = self.jost.matrix(x) @ D @ np.linalg.inv(self.jost.matrix(y))
        return G if above else -G

    def column_residual(self, y: int, margin: int = 4) -> float:
        """max |(d/dx - kJ - U0) G(., y)| away from y, relative to max |G|, by 6th-order differences."""
        n_pts = self.jost.grid.n_points
        a, b = self.jost.support_window() or (0, n_pts - 1)
        lo, hi = max(a - 8, 3), min(b + 8, n_pts - 4)
        xs = np.arange(lo - 3, hi + 4)
        G = np.array([self(x, y) if x != y else np.full((self.jost.n,) * 2, np.nan) for x in xs])
        h = self.jost.grid.dx
        dG = (45 * (G[4:-2] - G[2:-4]) - 9 * (G[5:-1] - G[1:-5]) + (G[6:] - G[:-6])) / (60 * h)
        mid = xs[3:-3]
        A = self.spec.k * np.diag(self.spec.J.array)[None] + self.spec.u0_values[mid]
        res = dG - A @ G[3:-3]
        keep = np.abs(mid - y) > margin
        scale = np.nanmax(np.abs(G))
        return float(np.nanmax(np.abs(res[keep])) / scale)


def qdnls_explicit_greens(jost: JostSet, T_inv: complex, x: int, y: int, limit: str | None = None) -> np.ndarray:
    """The explicit 3 x 3 cofactor matrices for qdNLS, with G = -T M in both regions."""
    if jost.n != 3:
        raise ValueError("explicit formulas are for the 3 x 3 qdNLS system")
    above = x > y or (x == y and limit == "+")
    if x == y and limit not in ("+", "-"):
        raise ValueError("x = y needs limit='+' or '-'")
    w = np.exp(2j * np.pi / 3)
    k = jost.k
    dist = jost.grid.x[x] - jost.grid.x[y]
    P = jost.matrix(y)
    F = jost.matrix(x)

    def c(i, j):
        # component i of column j at y, 1-based as in the cofactor formulas
        return P[i - 1, j - 1]

    if not above:
        a = np.array([c(2, 2) * c(3, 3) - c(2, 3) * c(3, 2),
                      c(3, 2) * c(1, 3) - c(3, 3) * c(1, 2),
                      c(1, 2) * c(2, 3) - c(1, 3) * c(2, 2)])
        M = np.exp(k * dist) * np.outer(F[:, 0], a)
    else:
        b = np.array([c(2, 1) * c(3, 3) - c(3, 1) * c(2, 3),
                      c(3, 1) * c(1, 3) - c(1, 1) * c(3, 3),
                      c(1, 1) * c(2, 3) - c(2, 1) * c(1, 3)])
        cc = np.array([c(3, 1) * c(2, 2) - c(2, 1) * c(3, 2),
                       c(1, 1) * c(3, 2) - c(3, 1) * c(1, 2),
                       c(2, 1) * c(1, 2) - c(1, 1) * c(2, 2)])
        M = np.exp(k * w**2 * dist) * np.outer(F[:, 1], b) + np.exp(k * w * dist) * np.outer(F[:, 2], cc)
    return -M / T_inv


def greens_jump_check(evaluator: GreensEvaluator, y: int) -> dict:
    """G(y+, y) - G(y-, y) - Id from the exact one-sided formulas.

    A diagnostic one-sided extrapolation from neighbouring nodes (cubic in
    the offset) is reported alongside.
    """
    n = evaluator.jost.n
    jump = evaluator(y, y, "+") - evaluator(y, y, "-")
    res = float(np.max(np.abs(jump - np.eye(n))))
    offdiag = float(np.max(np.abs(jump - np.diag(np.diag(jump)))))
    up = [evaluator(y + m, y) for m in (1, 2, 3, 4)]
    dn = [evaluator(y - m, y) for m in (1, 2, 3, 4)]
    # cubic extrapolation to offset 0 from offsets 1..4: weights 4, -6, 4, -1
    wts = (4.0, -6.0, 4.0, -1.0)
    ext = sum(c * g for c, g in zip(wts, up)) - sum(c * g for c, g in zip(wts, dn))
    return {"y": int(y), "residual": res, "offdiag_jump": offdiag,
            "extrapolated_residual": float(np.max(np.abs(ext - np.eye(n))))}


# Renormalized diagonal ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GreensDiagonal:
    """g(x) on the listed grid nodes; ``values`` has shape (len(nodes), n, n)."""

    grid: object
    nodes: np.ndarray
    values: np.ndarray
    method: str

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.values[:, i, j]


def _jost_diagonal(spec: LaxSpec, nodes: np.ndarray | None = None) -> GreensDiagonal:
    jost = solve_jost_set(spec, cross_validate=False)
    nodes = np.arange(spec.grid.n_points) if nodes is None else np.asarray(nodes)
    Phi = jost.matrix(nodes)
    PR = np.diag((np.arange(spec.n) >= spec.split_index).astype(float))
    vals = Phi @ PR @ np.linalg.inv(Phi) - PR
    return GreensDiagonal(spec.grid, nodes, vals, "jost")


def _block_kernel(spec: LaxSpec, rows: np.ndarray, cols: np.ndarray) -> list:
    x = spec.grid.x
    return [_rect_resolvent(z, x[rows], x[cols], rows, cols) for z in spec.z]


def _rect_resolvent(z: complex, xr: np.ndarray, xc: np.ndarray, rows, cols) -> np.ndarray:
    D = xr[:, None] - xc[None, :]
    if z.real > 0:
        K = np.where(D < 0, -np.exp(z * np.minimum(D, 0.0)), 0.0)
        K = np.where(rows[:, None] == cols[None, :], -0.5, K)
    else:
        K = np.where(D > 0, np.exp(z * np.maximum(D, 0.0)), 0.0)
        K = np.where(rows[:, None] == cols[None, :], 0.5, K)
    return K


def _dense_diagonal_once(spec: LaxSpec, S: np.ndarray, targets: np.ndarray, h: float) -> np.ndarray:
    n = spec.n
    m = len(S)
    U = spec.u0_values[S]
    KSS = [resolvent_matrix(z, spec.grid.x[S]) for z in spec.z]
    M = np.zeros((n * m, n * m), dtype=complex)
    Uh = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j:
                M[i * m:(i + 1) * m, j * m:(j + 1) * m] = h * KSS[i] * U[None, :, i, j]
                Uh[i * m:(i + 1) * m, j * m:(j + 1) * m] = np.diag(h * U[:, i, j])
    X = np.linalg.solve((np.eye(n * m) - M).T, Uh.T).T  # Uh (I - M)^{-1}
    KaS = _block_kernel(spec, targets, S)
    KSa = _block_kernel(spec, S, targets)
    t = len(targets)
    out = np.zeros((t, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            Xij = X[i * m:(i + 1) * m, j * m:(j + 1) * m]
            out[:, i, j] = np.sum((KaS[i] @ Xij) * KSa[j].T, axis=1)
    # diagonal defect of the mean-value kernel at nodes inside the support
    Ut = spec.u0_values[targets]
    return out - (h / 4.0) * Ut


def _neumann_diagonal_once(spec: LaxSpec, S: np.ndarray, h: float, tol: float = 1e-15,
                           max_terms: int = 200) -> np.ndarray:
    n = spec.n
    m = len(S)
    U = spec.u0_values[S]
    KSS = [resolvent_matrix(z, spec.grid.x[S]) for z in spec.z]
    M = np.zeros((n * m, n * m), dtype=complex)
    Kb = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        Kb[i * m:(i + 1) * m, i * m:(i + 1) * m] = KSS[i]
        for j in range(n):
            if i != j:
                M[i * m:(i + 1) * m, j * m:(j + 1) * m] = h * KSS[i] * U[None, :, i, j]
    term = M @ Kb
    total = term.copy()
    for _ in range(max_terms):
        term = M @ term
        total += term
        if np.max(np.abs(term)) < tol * max(1.0, np.max(np.abs(total))):
            break
    else:
        raise FredholmError("Neumann series did not converge")
    out = np.zeros((m, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            out[:, i, j] = np.diag(total[i * m:(i + 1) * m, j * m:(j + 1) * m])
    return out - (h / 4.0) * U


def greens_diagonal_renormalized(spec: LaxSpec, method: str = "dense", nodes: np.ndarray | None = None,
                                 check_smallness: bool = True, levels: int = 3) -> GreensDiagonal:
    """g(x) by the operator route ("dense" solve or "neumann" series) or from Jost solutions.

    The operator routes are extrapolated against the grid of every other
    node.  By default they return the nodes of that coarse grid; the dense
    route also accepts any ``nodes``, extrapolating each against the shifted
    coarse grid that contains it.  With ``levels=3`` (dense route) a 4h level
    is added and the h^4 term cancelled too; this needs k * 4h below about 1/2.
    """
    if method == "jost":
        return _jost_diagonal(spec, nodes)
    if method not in ("dense", "neumann"):
        raise ValueError(f"unknown method {method!r}")
    if check_smallness:
        norm = lambda_hs_norm(spec)
        if norm >= 1:
            raise FredholmError(f"||Lambda||_2 = {norm:.4g} >= 1")
    S = effective_support(spec)
    h = spec.grid.dx
    if len(S) == 0:
        targets = np.arange(0, spec.grid.n_points, 2) if nodes is None else np.asarray(nodes)
        return GreensDiagonal(spec.grid, targets, np.zeros((len(targets), spec.n, spec.n), complex), method)
    if method == "neumann":
        fine = _neumann_diagonal_once(spec, S, h)[::2]
        coarse = _neumann_diagonal_once(spec, S[::2], 2 * h)
        return GreensDiagonal(spec.grid, S[::2], (4 * fine - coarse) / 3, method)
    if nodes is None:
        targets = S[::2]
    else:
        targets = np.unique(np.asarray(nodes))
    fine = _dense_diagonal_once(spec, S, targets, h)
    f2 = _coarse_diagonal(spec, S, targets, 2, h)
    if levels == 2 or len(S) < 9:
        return GreensDiagonal(spec.grid, targets, (4 * fine - f2) / 3, method)
    f4 = _coarse_diagonal(spec, S, targets, 4, h)
    return GreensDiagonal(spec.grid, targets, (64 * fine - 20 * f2 + f4) / 45, method)


def _coarse_diagonal(spec: LaxSpec, S: np.ndarray, targets: np.ndarray, step: int, h: float) -> np.ndarray:
    """Diagonal on spacing step*h; each target uses the sub-grid S[r::step] that contains it."""
    out = None
    offset = (targets - S[0]) % step
    for r in range(step):
        mask = offset == r
        if np.any(mask):
            vals = _dense_diagonal_once(spec, S[r::step], targets[mask], step * h)
            if out is None:
                out = np.empty((len(targets),) + vals.shape[1:], dtype=complex)
            out[mask] = vals
    return out


def parity_nodes(spec: LaxSpec) -> np.ndarray:
    """All grid nodes sharing the parity of the support start."""
    S = effective_support(spec)
    start = int(S[0] % 2) if len(S) else 0
    return np.arange(start, spec.grid.n_points, 2)


# Functional derivatives ---------------------------------------------------------

def _trace_pairing(spec: LaxSpec, i: int, g: GreensDiagonal) -> np.ndarray:
    A = nabla_U0(spec, i)[g.nodes]
    return -np.einsum("xab,xba->x", A, g.values)


def functional_derivative_T(spec: LaxSpec, i: int, method: str = "general") -> SampledField:
    """Density of d log T^{-1} / d u_i on the full grid.

    ``general`` uses -tr(nabla_i U0 g) with g from Jost solutions; ``explicit``
    (qdNLS only) uses T times the cofactor products for dT^{-1}/dq, dT^{-1}/dr.
    """
    if method == "general":
        g = _jost_diagonal(spec)
        return SampledField(spec.grid, _trace_pairing(spec, i, g), f"dlogTinv/d{spec.field_names[i]}")
    if method != "explicit":
        raise ValueError(f"unknown method {method!r}")
    if spec.kind != "qdnls":
        raise ValueError("explicit products are for qdNLS")
    jost = solve_jost_set(spec, cross_validate=False)
    T_inv = transmission_wronskian(jost).T_inv
    if T_inv == 0:
        raise ZeroDivisionError("T^{-1} vanishes")
    P = jost.matrix()

    def c(a, b):
        return P[:, a - 1, b - 1]

    if i == 0:
        d = (c(1, 1) * (c(1, 2) * c(2, 3) - c(1, 3) * c(2, 2))
             + c(2, 1) * (c(2, 2) * c(3, 3) - c(2, 3) * c(3, 2))
             + c(3, 1) * (c(1, 3) * c(3, 2) - c(1, 2) * c(3, 3)))
    elif i == 1:
        d = (c(1, 1) * (c(1, 3) * c(3, 2) - c(1, 2) * c(3, 3))
             + c(2, 1) * (c(1, 2) * c(2, 3) - c(1, 3) * c(2, 2))
             + c(3, 1) * (c(2, 2) * c(3, 3) - c(2, 3) * c(3, 2)))
    else:
        raise IndexError("qdNLS has components 0 (q) and 1 (r)")
    # renormalized columns: the exponential factors of the three columns cancel
    return SampledField(spec.grid, d / T_inv, f"dlogTinv/d{spec.field_names[i]}")


def functional_derivative_logdet(spec: LaxSpec, i: int, method: str = "dense") -> SampledField:
    """Density of d log det2(1 + Lambda) / d u_i = -tr(nabla_i U0 g), g by the operator route.

    The dense route fills every grid node.  The Neumann route only reaches
    the coarse nodes of the support; the field is zero-filled in between, so
    integrate it with weight 2 dx via :func:`pair_with_direction`.
    """
    nodes = np.arange(spec.grid.n_points) if method == "dense" else None
    g = greens_diagonal_renormalized(spec, method, nodes=nodes)
    vals = np.zeros(spec.grid.n_points, dtype=complex)
    vals[g.nodes] = _trace_pairing(spec, i, g)
    tag = "" if method == "dense" else "[every other node]"
    return SampledField(spec.grid, vals, f"dlogdet2/d{spec.field_names[i]}{tag}")


def pair_with_direction(density: SampledField, v: SampledField, every_other: bool = False) -> complex:
    """int density * v dx; with ``every_other`` the sum runs over nonzero parity nodes with weight 2 dx."""
    if every_other:
        nz = np.flatnonzero(density.values)
        if nz.size == 0:
            return 0j
        sel = np.arange(nz[0] % 2, density.grid.n_points, 2)
        return complex(np.sum(density.values[sel] * v.values[sel]) * 2 * density.grid.dx)
    return complex(np.sum(density.values * v.values) * density.grid.dx)


def log_T_inv(spec: LaxSpec) -> complex:
    return complex(np.log(transmission_wronskian(solve_jost_set(spec, cross_validate=False)).T_inv))


def log_det2(spec: LaxSpec) -> complex:
    """Nystrom determinant with tr(Lambda^2), tr(Lambda^3) replaced by exact walk sums."""
    kernel = assemble_lambda(spec)
    return logdet2_matrix(kernel) + exact_low_order_correction(spec, kernel)


_FUNCTIONALS = {"logT_inv": log_T_inv, "logdet2": log_det2}


def _perturbed(spec: LaxSpec, i: int, v: SampledField, eps: float) -> LaxSpec:
    fields = list(spec.fields)
    fields[i] = fields[i].with_values(fields[i].values + eps * v.values)
    return spec.with_fields(fields)


def fd_oracle(functional: str, spec: LaxSpec, v: SampledField, i: int,
              epsilons: Sequence[float] | None = None) -> complex:
    """Centered difference of F(u + eps v e_i); with two step sizes the O(eps^2) terms are cancelled."""
    F = _FUNCTIONALS[functional]
    if epsilons is None:
        epsilons = FD_EPSILONS_DET if functional == "logdet2" else FD_EPSILONS
    if not np.any(v.values):
        return 0j
    d = [(F(_perturbed(spec, i, v, e)) - F(_perturbed(spec, i, v, -e))) / (2 * e) for e in epsilons]
    if len(d) == 1:
        return complex(d[0])
    e1, e2 = epsilons
    return complex((e1**2 * d[1] - e2**2 * d[0]) / (e1**2 - e2**2))


def gradient_check(functional: str, spec: LaxSpec, i: int, directions: Sequence[SampledField],
                   method: str | None = None) -> dict:
    """Relative l2 error between FD values and pairings of the density with each direction."""
    if functional == "logT_inv":
        dens = functional_derivative_T(spec, i, method or "general")
        pred = np.array([pair_with_direction(dens, v) for v in directions])
    elif functional == "logdet2":
        dens = functional_derivative_logdet(spec, i, method or "dense")
        sparse = (method or "dense") != "dense"
        pred = np.array([pair_with_direction(dens, v, every_other=sparse) for v in directions])
    else:
        raise ValueError(f"unknown functional {functional!r}")
    fd = np.array([fd_oracle(functional, spec, v, i) for v in directions])
    err = float(np.linalg.norm(fd - pred) / max(np.linalg.norm(fd), 1e-300))
    return {"functional": functional, "component": i, "fd": fd, "predicted": pred, "relative_error": err}


def write_diagonal_csv(path, g: GreensDiagonal) -> None:
    n = g.values.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["x"]
        for a in range(n):
            for b in range(n):
                header += [f"re{a + 1}{b + 1}", f"im{a + 1}{b + 1}"]
        w.writerow(header)
        for node, mat in zip(g.nodes, g.values):
            row = [f"{g.grid.x[node]:.17g}"]
            for v in mat.ravel():
                row += [f"{v.real:.17g}", f"{v.imag:.17g}"]
            w.writerow(row)


def bump_directions(rng: np.random.Generator, spec: LaxSpec, count: int) -> list:
    """Unit-width complex bumps centred at random points of the potential's support."""
    S = effective_support(spec, pad=0, rel_tol=1e-3)
    x = spec.grid.x
    lo, hi = (x[S[0]], x[S[-1]]) if len(S) else (-1.0, 1.0)
    out = []
    for _ in range(count):
        c = rng.uniform(lo, hi)
        a = complex(rng.normal(), rng.normal())
        out.append(standard_potential("bump", a / abs(a), 1.0, c, spec.grid, f"bump@{c:.3f}"))
    return out
