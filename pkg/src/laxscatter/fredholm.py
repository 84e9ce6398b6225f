"""Hilbert-Schmidt discretization of Lambda = -R0 U0 and 2-regularized determinants.

R0 = diag((d/dx - k omega_i)^{-1}) has the Volterra kernels

    K(x, y) = -1{x < y} exp(z (x - y))   for Re z > 0,
    K(x, y) =  1{x > y} exp(z (x - y))   for Re z < 0.

Position-space (Nystrom) matrices use the weight dx on both sides split as
sqrt(dx) K sqrt(dx).  The kernel jumps across x = y, so the diagonal takes
the mean of the one-sided limits (-1/2 or +1/2).  With that choice the
product rule for tr(M^2) carries a known O(h^2) diagonal defect,
(h^2/4) sum_x tr(U0(x)^2), which is subtracted exactly.  What remains is
O(h^2) and is removed by Richardson extrapolation against the grid of
every other node.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from . import _residue
from .field import GridSpec, SampledField, transform
from .jost import support_window
from .lax import LaxSpec

L_MAX = 40
DEFAULT_TOL = 1e-10
NORM_LIMIT = 100.0
EQUALITY_SMALLNESS = 0.5
SUPPORT_REL_TOL = 1e-16
PRINCIPAL_BRANCH_NORM = 0.8


class FredholmError(ValueError):
    """Outside the regime where a determinant computation is meaningful."""


@dataclass(frozen=True, eq=False)
class OperatorKernel:
    """Weighted matrix of an n_blocks x n_blocks block integral operator.

    ``matrix`` acts on sqrt(weight)-scaled samples, so its eigenvalues,
    traces and Frobenius norm approximate those of the operator.
    ``trace2_correction`` is added to tr(matrix^2).  ``coarse`` is the same
    operator on every other node, used for Richardson extrapolation.
    """

    grid: GridSpec
    matrix: np.ndarray
    n_blocks: int
    nodes: np.ndarray
    representation: str = "position"
    symmetrized: bool = False
    trace2_correction: complex = 0.0
    coarse: "OperatorKernel | None" = None
    label: str = ""

    @property
    def block_size(self) -> int:
        return len(self.nodes)

    def block(self, i: int, j: int) -> np.ndarray:
        m = self.block_size
        return self.matrix[i * m:(i + 1) * m, j * m:(j + 1) * m]

    @cached_property
    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.matrix) ** 2)))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        if self.matrix.size == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.matrix)

    def compose(self, other: "OperatorKernel") -> "OperatorKernel":
        """Kernel of self o other (weights are already absorbed)."""
        if other.grid != self.grid or not np.array_equal(other.nodes, self.nodes):
            raise ValueError("kernels live on different nodes")
        return OperatorKernel(self.grid, self.matrix @ other.matrix, self.n_blocks, self.nodes,
                              self.representation, label=f"({self.label})o({other.label})")

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Apply a scalar position-space kernel to samples on its nodes."""
        if self.representation != "position":
            raise ValueError("apply is defined for position-space kernels")
        return self.matrix @ np.asarray(values)

    @cached_property
    def _low_traces(self) -> dict:
        # tr(AB) = sum(A * B^T), so one product gives orders 2, 3 and 4
        M = self.matrix
        P = M @ M
        return {2: complex(np.trace(P)), 3: complex(np.sum(P * M.T)), 4: complex(np.sum(P * P.T))}

    def raw_trace_power(self, l: int) -> complex:
        if l == 1:
            t = complex(np.trace(self.matrix))
        elif l <= 4:
            t = self._low_traces[l]
        else:
            t = complex(np.sum(self.eigenvalues ** l))
        return t + (self.trace2_correction if l == 2 else 0.0)


def _check_z(z: complex) -> complex:
    z = complex(z)
    if z.real == 0:
        raise ValueError("resolvent needs Re z != 0")
    return z


def resolvent_matrix(z: complex, x: np.ndarray, diagonal: str = "mean") -> np.ndarray:
    """Unweighted kernel values K(x_a, x_b) of (d/dx - z)^{-1}.

    ``diagonal`` is "mean" (average of the one-sided limits) or "zero".
    """
    z = _check_z(z)
    D = x[:, None] - x[None, :]
    if z.real > 0:
        K = np.where(D < 0, -np.exp(z * np.minimum(D, 0.0)), 0.0)
        dval = -0.5
    else:
        K = np.where(D > 0, np.exp(z * np.maximum(D, 0.0)), 0.0)
        dval = 0.5
    np.fill_diagonal(K, dval if diagonal == "mean" else 0.0)
    return K


def resolvent_kernel(z: complex, grid: GridSpec, nodes: np.ndarray | None = None,
                     diagonal: str = "mean") -> OperatorKernel:
    """Scalar Nystrom kernel of (d/dx - z)^{-1} on the given grid nodes."""
    nodes = np.arange(grid.n_points) if nodes is None else np.asarray(nodes)
    K = resolvent_matrix(z, grid.x[nodes], diagonal)
    return OperatorKernel(grid, grid.dx * K, 1, nodes, label=f"R(z={z})")


def effective_support(spec: LaxSpec, pad: int = 4, rel_tol: float = SUPPORT_REL_TOL) -> np.ndarray:
    """Contiguous node range holding the non-negligible part of U0(u).

    The range starts on an even node and has odd length so that every other
    node forms a consistent coarse grid.
    """
    n = spec.grid.n_points
    mag = np.max(np.abs(spec.u0_values), axis=(1, 2))
    top = mag.max()
    if top == 0:
        return np.zeros(0, dtype=int)
    nz = np.flatnonzero(mag > rel_tol * top)
    lo = max(nz[0] - pad, 0)
    hi = min(nz[-1] + pad, n - 1)
    lo -= lo % 2
    if (hi - lo) % 2:
        hi = hi + 1 if hi + 1 < n else hi - 1
    return np.arange(lo, hi + 1)


def _nystrom_lambda(spec: LaxSpec, nodes: np.ndarray, h: float) -> OperatorKernel:
    n = spec.n
    x = spec.grid.x[nodes]
    U = spec.u0_values[nodes]
    m = len(nodes)
    M = np.zeros((n * m, n * m), dtype=complex)
    for i in range(n):
        K = resolvent_matrix(spec.z[i], x)
        for j in range(n):
            if i != j and np.any(U[:, i, j]):
                M[i * m:(i + 1) * m, j * m:(j + 1) * m] = -h * K * U[None, :, i, j]
    corr = -(h * h / 4.0) * np.sum(np.einsum("aij,aji->a", U, U))
    return OperatorKernel(spec.grid, M, n, nodes, "position", False, complex(corr), label=spec.label)


def assemble_lambda(spec: LaxSpec, symmetrized: bool = False, representation: str | None = None,
                    max_modes: int = 512, support_tol: float = SUPPORT_REL_TOL) -> OperatorKernel:
    """Discretize Lambda = -R0 U0 (or its symmetrized form -R0^{1/2} U0 R0^{1/2}).

    The position-space form (default, unsymmetrized only) restricts to the
    effective support and carries a coarse companion for extrapolation.  The
    Fourier form uses the multipliers (i xi - z)^{-1} or (i xi - z)^{-1/2}
    on the ``max_modes`` central frequencies.
    """
    if representation is None:
        representation = "fourier" if symmetrized else "position"
    if representation == "position":
        if symmetrized:
            raise ValueError("the symmetrized operator is only available in the Fourier representation")
        nodes = effective_support(spec, rel_tol=support_tol)
        h = spec.grid.dx
        fine = _nystrom_lambda(spec, nodes, h)
        if len(nodes) >= 3:
            coarse = _nystrom_lambda(spec, nodes[::2], 2 * h)
            fine = OperatorKernel(fine.grid, fine.matrix, fine.n_blocks, fine.nodes, "position", False,
                                  fine.trace2_correction, coarse, spec.label)
        return fine
    if representation != "fourier":
        raise ValueError(f"unknown representation {representation!r}")
    return _fourier_lambda(spec, symmetrized, max_modes)


def potential_spectra(spec: LaxSpec) -> dict:
    """Unitary spectra of the nonzero entries U0_ij(u(x))."""
    U = spec.u0_values
    out = {}
    for i in range(spec.n):
        for j in range(spec.n):
            if i != j and np.any(U[:, i, j]):
                out[(i, j)] = transform(SampledField(spec.grid, U[:, i, j])).coefficients
    return out


def _fourier_lambda(spec: LaxSpec, symmetrized: bool, max_modes: int) -> OperatorKernel:
    g = spec.grid
    N = g.n_points
    m = min(max_modes, N)
    c = N // 2
    sel = np.arange(c - m // 2, c - m // 2 + m)
    xi = g.xi[sel]
    spectra = potential_spectra(spec)
    n = spec.n
    left_pow, right_pow = (0.5, 0.5) if symmetrized else (1.0, 0.0)
    D = [(1j * xi - z) ** (-1.0) for z in spec.z]
    M = np.zeros((n * m, n * m), dtype=complex)
    diff = sel[:, None] - sel[None, :] + c
    ok = (diff >= 0) & (diff < N)
    for (i, j), F in spectra.items():
        Fd = np.where(ok, F[np.clip(diff, 0, N - 1)], 0.0)
        Di = D[i] ** left_pow if left_pow != 1.0 else D[i]
        Dj = D[j] ** right_pow if right_pow else np.ones(m)
        M[i * m:(i + 1) * m, j * m:(j + 1) * m] = -(Di[:, None] * Fd * Dj[None, :]) * g.dxi / np.sqrt(2 * np.pi)
    return OperatorKernel(g, M, n, sel, "fourier", symmetrized, label=spec.label)


def trace_power(kernel: OperatorKernel, l: int, extrapolate: bool = True) -> complex:
    """tr(Lambda^l) for l >= 2, extrapolated when a coarse companion exists."""
    if l < 2:
        raise ValueError("tr(Lambda^l) is only defined for l >= 2 in the regularized setting")
    t = kernel.raw_trace_power(l)
    if extrapolate and kernel.coarse is not None:
        t = (4.0 * t - kernel.coarse.raw_trace_power(l)) / 3.0
    return complex(t)


# Closed forms ---------------------------------------------------------------

def _reflect(F: np.ndarray) -> np.ndarray:
    """Coefficients at -xi on the ascending grid (the unmatched -pi/dx entry is dropped)."""
    out = np.zeros_like(F)
    out[1:] = F[1:][::-1]
    return out


def trace2_closed_form(q: SampledField, r: SampledField, k: float) -> complex:
    """Quadratic trace -6k int q_hat(xi) r_hat(-xi) / (xi^2 + 3k^2 - sqrt(3) k xi) d xi.

    Only the pairs (R1, R2) and (R3, R1) have overlapping kernel supports;
    each contributes twice to tr(Lambda^2), and their sum has the symbol
    -3k / (xi^2 + 3k^2 - sqrt(3) k xi).
    """
    if k <= 0:
        raise ValueError("k must be positive")
    Q = transform(q).coefficients
    R = transform(r).coefficients
    xi = q.grid.xi
    sym = xi**2 + 3 * k**2 - np.sqrt(3) * k * xi
    return complex(-6 * k * np.sum(Q * _reflect(R) / sym) * q.grid.dxi)


def trace2_conjugate_form(q: SampledField, k: float) -> float:
    """Quadratic trace for r = conj(q): -6k int |q_hat|^2 / (xi^2 + 3k^2 - sqrt(3) k xi), real and negative."""
    Q = transform(q).coefficients
    xi = q.grid.xi
    return float(-6 * k * np.sum(np.abs(Q) ** 2 / (xi**2 + 3 * k**2 - np.sqrt(3) * k * xi)) * q.grid.dxi)


def _qdnls_words_3():
    # resolvent indices and field names, e.g. R1 q R2 q R3 q
    return [((0, 1, 2), "qqq"), ((0, 1, 2), "rrr")]


def _qdnls_words_4():
    pairs = [((0, 1), "qr", (0, 2), "rq"), ((1, 2), "qr", (1, 0), "rq"), ((2, 0), "qr", (2, 1), "rq")]
    words = []
    for a, fa, b, fb in pairs:
        # (R_a1 f R_a2 g + R_b1 f' R_b2 g')^2 expands into four words
        for (c1, f1), (c2, f2) in itertools.product([(a, fa), (b, fb)], repeat=2):
            words.append((1.0, c1 + c2, f1 + f2))
    for cs, fs in [((0, 1, 2, 1), "qqrr"), ((1, 2, 0, 2), "qqrr"), ((2, 0, 1, 0), "qqrr")]:
        words.append((2.0, cs, fs))
    return words


def trace34_closed_form(q: SampledField, r: SampledField, k: float,
                        band_tol: float = 1e-14, quartic: bool = True) -> tuple[complex, complex]:
    """Cubic and quartic traces from the explicit word formulas.

    tr(Lambda^3) = -3 tr(R1 q R2 q R3 q + R1 r R2 r R3 r) and the quartic
    combination of products of R_i q R_j r, each word evaluated exactly on
    the Fourier side.  With ``quartic=False`` the O(n^3) quartic sum is
    skipped and returned as nan.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    from .lax import qdnls_generator

    z = k * qdnls_generator().array
    spec = {"q": transform(q).coefficients, "r": transform(r).coefficients}
    dxi = q.grid.dxi
    if not np.any(spec["q"]) and not np.any(spec["r"]):
        return 0j, 0j

    def word(cs, fs):
        Fs = [spec[f] for f in fs]
        if any(not np.any(F) for F in Fs):
            return 0j
        return _residue.trace_word([z[c] for c in cs], Fs, dxi, band_tol)

    t3 = -3 * sum(word(cs, fs) for cs, fs in _qdnls_words_3())
    if not quartic:
        return complex(t3), complex(np.nan)
    t4 = sum(w * word(cs, fs) for w, cs, fs in _qdnls_words_4())
    return complex(t3), complex(t4)


def closed_walks(n: int, l: int):
    """Index cycles i_1..i_l with cyclically adjacent entries distinct."""
    for w in itertools.product(range(n), repeat=l):
        if all(w[a] != w[(a + 1) % l] for a in range(l)):
            yield w


def cycle_expansion_trace(spec: LaxSpec, l: int, band_tol: float | None = 1e-14) -> complex:
    """tr(Lambda^l) = (-1)^l sum over closed walks of tr(R_i1 U_i1i2 R_i2 ... U_il i1)."""
    if not 2 <= l <= 4:
        raise ValueError("cycle expansion is implemented for l = 2, 3, 4")
    spectra = potential_spectra(spec)
    dxi = spec.grid.dxi
    total = 0j
    for w in closed_walks(spec.n, l):
        edges = [(w[a], w[(a + 1) % l]) for a in range(l)]
        if any(e not in spectra for e in edges):
            continue
        total += _residue.trace_word([spec.z[c] for c in w], [spectra[e] for e in edges], dxi,
                                     band_tol if l > 2 else None)
    return complex((-1) ** l * total)


# Determinants -------------------------------------------------------------------

@dataclass(frozen=True)
class TraceSeries:
    traces: dict
    value: complex
    tail_bound: float
    norm: float
    n_terms: int


def logdet2_series(kernel: OperatorKernel, tolerance: float = DEFAULT_TOL, l_max: int = L_MAX,
                   extrapolate: bool = True) -> TraceSeries:
    """sum_{l>=2} (-1)^(l+1)/l tr(Lambda^l) with a geometric tail bound."""
    norm = kernel.frobenius_norm
    if norm >= 1:
        raise FredholmError(f"||Lambda||_2 = {norm:.4g} >= 1: the trace series need not converge")
    traces = {}
    value = 0j
    tail = np.inf
    for l in range(2, l_max + 1):
        t = trace_power(kernel, l, extrapolate)
        traces[l] = t
        value += (-1) ** (l + 1) / l * t
        tail = norm ** (l + 1) / ((l + 1) * (1 - norm))
        if tail < tolerance:
            break
    return TraceSeries(traces, complex(value), float(tail), norm, l)


def det2_of_matrix(A: np.ndarray) -> complex:
    """det2(1 + A) = det(1 + A) exp(-tr A) for a finite matrix."""
    A = np.asarray(A, dtype=complex)
    if A.size == 0:
        return 1.0 + 0j
    if np.sqrt(np.sum(np.abs(A) ** 2)) > NORM_LIMIT:
        raise FredholmError("matrix norm too large for a reliable determinant")
    sign, logabs = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    return complex(sign * np.exp(logabs - np.trace(A)))


def _raw_logdet2(kernel: OperatorKernel) -> complex:
    A = kernel.matrix
    if A.size == 0:
        return 0j
    if kernel.frobenius_norm > NORM_LIMIT:
        raise FredholmError("kernel norm too large for a reliable determinant")
    sign, logabs = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    ld = logabs + 1j * np.angle(sign) - np.trace(A)
    if kernel.frobenius_norm < PRINCIPAL_BRANCH_NORM:
        # sum |log(1 + lambda) - lambda| <= n^2 / (2(1 - n)) < pi, so log det2 is a principal value
        ld = ld.real + 1j * np.angle(np.exp(1j * ld.imag))
    else:
        # the branch follows the product of the eigenvalue factors (1 + lambda) exp(-lambda)
        branch = np.sum(np.log(1 + kernel.eigenvalues) - kernel.eigenvalues)
        ld += 2j * np.pi * np.round((branch - ld).imag / (2 * np.pi))
    return complex(ld - 0.5 * kernel.trace2_correction)


def logdet2_matrix(kernel: OperatorKernel, extrapolate: bool = True) -> complex:
    """log det2(1 + Lambda) from the matrix determinant, extrapolated."""
    v = _raw_logdet2(kernel)
    if extrapolate and kernel.coarse is not None:
        v = (4.0 * v - _raw_logdet2(kernel.coarse)) / 3.0
    return complex(v)


def det2_matrix(kernel: OperatorKernel, extrapolate: bool = True) -> complex:
    return complex(np.exp(logdet2_matrix(kernel, extrapolate)))


# Hilbert-Schmidt norms ---------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(200)
_T_CUT = 40.0


def _half_line(t_end: np.ndarray, integrand) -> np.ndarray:
    # GL on [-_T_CUT, t_end] per entry of t_end
    lo = -_T_CUT
    half = 0.5 * (t_end - lo)
    t = lo + half[:, None] * (_GL_X[None, :] + 1.0)
    return np.sum(integrand(t) * _GL_W[None, :], axis=1) * half


def pair_weight(D: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """int dxi / (sqrt(xi^2 + alpha^2) sqrt((xi - D)^2 + beta^2)) for real D.

    The line is split between the two peaks; each half uses the substitution
    xi = alpha sinh t (or xi = D + beta sinh u) which makes the integrand
    decay exponentially.
    """
    D = np.atleast_1d(np.asarray(D, dtype=float))
    mid = D * alpha / (alpha + beta)
    a = _half_line(np.arcsinh(mid / alpha),
                   lambda t: 1.0 / np.sqrt((alpha * np.sinh(t) - D[:, None]) ** 2 + beta**2))
    # reflect u -> -u so the second half line is also (-inf, u_end]
    b = _half_line(-np.arcsinh((mid - D) / beta),
                   lambda u: 1.0 / np.sqrt((D[:, None] - beta * np.sinh(u)) ** 2 + alpha**2))
    return a + b


def hs_formula(F: np.ndarray, grid: GridSpec, zi: complex, zj: complex, band_tol: float = 1e-30) -> float:
    """(1/2pi) int int |f_hat(xi - eta)|^2 / (|i xi - zi| |i eta - zj|) d xi d eta."""
    P = np.abs(F) ** 2
    keep = P > band_tol * max(P.max(), 1e-300)
    if not np.any(keep):
        return 0.0
    d = grid.xi[keep]
    # |i eta - zj| with eta = xi - d: peak of the second factor sits at xi = d + Im zj
    W = pair_weight(d + zj.imag - zi.imag, abs(zi.real), abs(zj.real))
    return float(np.sum(P[keep] * W) * grid.dxi / (2 * np.pi))


@dataclass(frozen=True)
class HSNormResult:
    frobenius: float
    formula: float

    @property
    def ratio(self) -> float:
        """Frobenius^2 / formula value of ||.||_2^2."""
        return (self.frobenius / self.formula) ** 2 if self.formula else float("nan")


def hs_norm(q: SampledField, i: int, j: int, k: float, max_modes: int = 1024) -> HSNormResult:
    """HS norm of R_i^{1/2} q R_j^{1/2} (qdNLS resolvents, 0-based i != j).

    Returns the Frobenius norm of the Fourier-basis discretization and the
    square root of the double-integral formula.
    """
    if i == j:
        raise ValueError("i and j must differ")
    from .lax import qdnls_generator

    z = k * qdnls_generator().array
    g = q.grid
    F = transform(q).coefficients
    if not np.any(F):
        return HSNormResult(0.0, 0.0)
    N = g.n_points
    m = min(max_modes, N)
    c = N // 2
    sel = np.arange(c - m // 2, c - m // 2 + m)
    xi = g.xi[sel]
    diff = sel[:, None] - sel[None, :] + c
    ok = (diff >= 0) & (diff < N)
    Fd = np.where(ok, F[np.clip(diff, 0, N - 1)], 0.0)
    block = ((1j * xi - z[i]) ** -0.5)[:, None] * Fd * ((1j * xi - z[j]) ** -0.5)[None, :]
    block *= g.dxi / np.sqrt(2 * np.pi)
    frob = float(np.sqrt(np.sum(np.abs(block) ** 2)))
    return HSNormResult(frob, float(np.sqrt(hs_formula(F, g, z[i], z[j]))))


def lambda_hs_norm(spec: LaxSpec) -> float:
    """||Lambda||_2 of the symmetrized operator, summed over its off-diagonal blocks."""
    total = 0.0
    for (i, j), F in potential_spectra(spec).items():
        total += hs_formula(F, spec.grid, spec.z[i], spec.z[j])
    return float(np.sqrt(total))


# Equality check -------------------------------------------------------------------

@dataclass(frozen=True)
class EqualityReport:
    k: float
    T_inv: complex
    log_T_inv: complex
    log_det2_series: complex | None
    log_det2_matrix: complex
    traces: dict
    tail_bound: float
    hs_norm: float
    deviations: dict = dc_field(default_factory=dict)
    log_det2_exact_low: complex | None = None

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values()) if self.deviations else 0.0

    @property
    def deviation(self) -> float:
        """|log det2 + log T| for the most accurate determinant route available."""
        if "exact_low_vs_T" in self.deviations:
            return self.deviations["exact_low_vs_T"]
        return self.deviations.get("matrix_vs_T", 0.0)


def exact_low_order_correction(spec: LaxSpec, kernel: OperatorKernel, band_tol: float = 1e-12) -> complex:
    """Change in log det2 when the Nystrom tr(Lambda^2), tr(Lambda^3) are swapped for exact values.

    The Nystrom residual after extrapolation is O((kh)^4) and mostly sits in
    these two orders; the walk sums evaluate them without discretizing the
    resolvent.
    """
    out = 0j
    for l in (2, 3):
        exact = cycle_expansion_trace(spec, l, band_tol)
        out += (-1) ** (l + 1) / l * (exact - trace_power(kernel, l))
    return complex(out)


def verify_equality(spec: LaxSpec, tolerance: float = DEFAULT_TOL,
                    smallness: float = EQUALITY_SMALLNESS, exact_low_orders: bool = True,
                    series: bool = True) -> EqualityReport:
    """Compare log T^{-1} from the Jost Wronskian with log det2 by series and by matrix.

    With ``exact_low_orders`` a third determinant value replaces the
    quadratic and cubic traces of the matrix route by their exact values.
    ``series=False`` skips the trace series, whose high orders need a full
    eigendecomposition.
    """
    from .jost import solve_jost_set
    from .scattering import transmission_wronskian

    support_window(spec)
    norm = lambda_hs_norm(spec)
    if norm >= smallness:
        raise FredholmError(f"||Lambda||_2 = {norm:.4g} is not below {smallness}")
    T = transmission_wronskian(solve_jost_set(spec, cross_validate=False)).T_inv
    logT = complex(np.log(T))
    kernel = assemble_lambda(spec)
    mat = logdet2_matrix(kernel)
    dev = {"matrix_vs_T": abs(mat - logT)}
    ser = None
    if series:
        ser = logdet2_series(kernel, tolerance)
        dev["series_vs_T"] = abs(ser.value - logT)
        dev["series_vs_matrix"] = abs(ser.value - mat)
    exact_low = None
    if exact_low_orders and kernel.matrix.size:
        exact_low = mat + exact_low_order_correction(spec, kernel)
        dev["exact_low_vs_T"] = abs(exact_low - logT)
    return EqualityReport(spec.k, complex(T), logT, ser.value if ser else None, mat,
                          ser.traces if ser else {}, ser.tail_bound if ser else float("nan"),
                          norm, {k: float(v) for k, v in dev.items()}, exact_low)
