"""Microlocal Sobolev norms and the energies E_s(k0, q) = int_{k0}^inf k^{2s} A(k, q) dk.

A(k, q) = log det2(1 + Lambda) with r = conj(q).  Its quadratic part is
known in closed form,

    A_2(k) = -tr(Lambda^2)/2 = 3k int |q_hat|^2 / (xi^2 + 3k^2 - sqrt(3) k xi) d xi,

so that E_s^(2) = int |q_hat(xi)|^2 I_s(-xi; k0) d xi with

    I_s(xi; k0) = int_{k0}^inf 3 k^(1+2s) / (xi^2 + 3k^2 + sqrt(3) k xi) dk.

Only the higher-order remainder H(k) = A(k) - A_2(k) goes through the
k-quadrature.  For k <= K_NYSTROM it comes from the Nystrom determinant
with the discrete quadratic trace swapped for the exact one; above that the
cubic and quartic traces are evaluated exactly by residues and orders five
and up are dropped (their size is reported).  The two ranges are separate
Gauss-Legendre panels in log k.  Beyond k_max the quadratic part is still
exact and the cubic part follows the power law measured between k_max and
2 k_max.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import integrate

from .field import SampledField, transform
from .fredholm import FredholmError, assemble_lambda, trace34_closed_form
from .jost import SMALLNESS_DELTA, SmallnessError
from .lax import build_qdnls_spec
from .norms import sobolev_norm

SQRT3 = np.sqrt(3.0)
K_NYSTROM = 8.0
K_MAX_FACTOR = 64.0
DEFAULT_NK = 16
SPECTRUM_TOL = 1e-30
RESIDUE_BAND_TOL = 1e-10
# tails below this fraction of the peak change A(k) by far less than the quadrature error
NYSTROM_SUPPORT_TOL = 1e-12


def microlocal_norm(q: SampledField, s: float, k: float) -> float:
    """(int |q_hat|^2 (xi^2 + 3k^2)^s d xi)^(1/2)."""
    if k <= 0:
        raise ValueError("k must be positive")
    F = transform(q)
    return float(np.sqrt(np.sum(np.abs(F.coefficients) ** 2 * (F.xi**2 + 3 * k * k) ** s) * q.grid.dxi))


# Coercivity integral -------------------------------------------------------------

def _series_tail(xi: np.ndarray, s: float, K: float, n_terms: int = 80) -> np.ndarray:
    """int_K^inf k^(2s-1) / (1 + a/k + b/k^2) dk with a = xi/sqrt 3, b = xi^2/3, K >> |xi|."""
    a = xi / SQRT3
    b = xi**2 / 3.0
    # 1/(1 + a t + b t^2) = sum c_n t^n with c_n = -a c_{n-1} - b c_{n-2}
    c_prev2 = np.zeros_like(xi)
    c_prev = np.ones_like(xi)
    total = c_prev * K ** (2 * s) / (-2 * s)
    for n in range(1, n_terms):
        c = -a * c_prev - b * c_prev2
        total = total + c * K ** (2 * s - n) / (n - 2 * s)
        c_prev2, c_prev = c_prev, c
    return total


def coercivity_integral(xi, s: float, k0: float, sign: float = 1.0) -> np.ndarray:
    """int_{k0}^inf 3 k^(1+2s) / (xi^2 + 3k^2 + sign sqrt(3) k xi) dk, vectorized over xi."""
    if s >= 0:
        raise ValueError("the k-integral diverges for s >= 0")
    if k0 <= 0:
        raise ValueError("k0 must be positive")
    xi = sign * np.atleast_1d(np.asarray(xi, dtype=float))
    K = max(k0, 10.0 * (np.max(np.abs(xi)) + 1.0))
    if K > k0:
        # substitute k = exp(u) so the integrand stays smooth over decades
        def f(u):
            k = np.exp(u)
            return 3 * k ** (2 + 2 * s) / (xi**2 + 3 * k * k + SQRT3 * k * xi)

        head, _ = integrate.quad_vec(f, np.log(k0), np.log(K), epsabs=0.0, epsrel=1e-13)
    else:
        head = np.zeros_like(xi)
    return head + _series_tail(xi, s, K)


def middle_integral(xi, s: float, k0: float) -> np.ndarray:
    """int_{k0}^inf k^(1+2s) / (xi^2 + k^2) dk."""
    if s >= 0:
        raise ValueError("the k-integral diverges for s >= 0")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    vals = [integrate.quad(lambda k, x=x: k ** (1 + 2 * s) / (x * x + k * k), k0, np.inf,
                           epsabs=0.0, epsrel=1e-12, limit=200)[0] for x in xi]
    return np.array(vals)


def coercivity_ratio(s: float, k0: float, xi) -> np.ndarray:
    """I_s(xi; k0) / (xi^2 + k0^2)^s."""
    if not -0.5 < s < 0:
        raise ValueError("s must lie in (-1/2, 0)")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    return coercivity_integral(xi, s, k0) / (xi**2 + k0 * k0) ** s


# Energies ---------------------------------------------------------------------

def quadratic_density(q: SampledField, k: float) -> float:
    """A_2(k) = -tr(Lambda^2)/2 for r = conj(q)."""
    F = transform(q)
    xi = F.xi
    return float(3 * k * np.sum(np.abs(F.coefficients) ** 2 / (xi**2 + 3 * k * k - SQRT3 * k * xi)) * q.grid.dxi)


def quadratic_energy(q: SampledField, s: float, k0: float) -> float:
    """E_s^(2) = int |q_hat(xi)|^2 I_s(-xi; k0) d xi."""
    F = transform(q)
    w = np.abs(F.coefficients) ** 2
    if not np.any(w):
        return 0.0
    band = w > SPECTRUM_TOL * w.max()
    I = coercivity_integral(F.xi[band], s, k0, sign=-1.0)
    return float(np.sum(w[band] * I) * q.grid.dxi)


@dataclass(frozen=True)
class DensitySample:
    """Pieces of A(k) at one k: exact quadratic part, cubic, quartic and orders five and up.

    ``error`` is the size of the Richardson correction to the higher-order
    part, a conservative estimate of its discretization error.
    """

    k: float
    quadratic: float
    cubic: float
    quartic: float
    rest: float
    method: str
    error: float = 0.0

    @property
    def higher(self) -> float:
        return self.cubic + self.quartic + self.rest


def _nystrom_traces(matrix: np.ndarray, correction: complex) -> np.ndarray:
    """log det2, tr M^2, tr M^3, tr M^4 with a single matrix product."""
    P = matrix @ matrix
    t2 = np.trace(P) + correction
    t3 = np.sum(P * matrix.T)
    t4 = np.sum(P * P.T)
    sign, logabs = np.linalg.slogdet(np.eye(matrix.shape[0]) + matrix)
    logdet2 = logabs + 1j * np.angle(sign) - np.trace(matrix) - 0.5 * correction
    return np.array([logdet2, t2, t3, t4])


def _higher(v: np.ndarray) -> complex:
    return v[0] + v[1] / 2


def density_sample(q: SampledField, k: float, k_nystrom: float = K_NYSTROM) -> DensitySample:
    """A(k) split into orders for r = conj(q)."""
    A2 = quadratic_density(q, k)
    r = q.conj()
    if k <= k_nystrom:
        kern = assemble_lambda(build_qdnls_spec(q, r, k), support_tol=NYSTROM_SUPPORT_TOL)
        if kern.matrix.size == 0:
            return DensitySample(k, A2, 0.0, 0.0, 0.0, "nystrom")
        v = fine = _nystrom_traces(kern.matrix, kern.trace2_correction)
        if kern.coarse is not None:
            v = (4 * fine - _nystrom_traces(kern.coarse.matrix, kern.coarse.trace2_correction)) / 3
        logdet2, t2, t3, t4 = v
        rest = logdet2 - (-t2 / 2 + t3 / 3 - t4 / 4)
        return DensitySample(k, A2, float((t3 / 3).real), float((-t4 / 4).real), float(rest.real), "nystrom",
                             float(abs(_higher(v) - _higher(fine))))
    t3, t4 = trace34_closed_form(q, r, k, band_tol=RESIDUE_BAND_TOL)
    return DensitySample(k, A2, float((t3 / 3).real), float((-t4 / 4).real), 0.0, "residue")


def _log_panel(a: float, b: float, n: int):
    t, w = np.polynomial.legendre.leggauss(n)
    la, lb = np.log(a), np.log(b)
    u = 0.5 * (la + lb) + 0.5 * (lb - la) * t
    return np.exp(u), 0.5 * (lb - la) * w * np.exp(u)


def k_nodes(k0: float, k_max: float, n_k: int, k_nystrom: float = K_NYSTROM):
    """Gauss-Legendre nodes in log k, split into panels at k_nystrom."""
    if k_max <= k0:
        raise ValueError("k_max must exceed k0")
    if k0 < k_nystrom < k_max:
        # above k_nystrom the integrand is close to a power law and needs few nodes
        n2 = max(4, n_k // 4)
        n1 = max(2, n_k - n2)
        k1, w1 = _log_panel(k0, k_nystrom, n1)
        k2, w2 = _log_panel(k_nystrom, k_max, n2)
        return np.concatenate([k1, k2]), np.concatenate([w1, w2])
    return _log_panel(k0, k_max, n_k)


@dataclass
class EnergyResult:
    s: float
    k0: float
    k_max: float
    n_k: int
    Es: float
    contributions: dict
    tail: float
    quadrature_error: float
    truncation_estimate: float
    norm_sq: float
    discretization_error: float = 0.0
    samples: list = dc_field(default_factory=list, repr=False)

    @property
    def error_budget(self) -> float:
        return self.quadrature_error + self.discretization_error + self.truncation_estimate

    @property
    def Es2(self) -> float:
        return self.contributions[2]

    @property
    def tail_fraction(self) -> float:
        return abs(self.Es - self.Es2) / self.Es2 if self.Es2 else 0.0

    @property
    def coercivity(self) -> float:
        return self.Es2 / self.norm_sq if self.norm_sq else float("nan")

    def to_json(self) -> dict:
        return {"s": self.s, "k0": self.k0, "k_max": self.k_max, "n_k": self.n_k, "Es": self.Es,
                "Es2": self.Es2, "contributions": {str(l): v for l, v in self.contributions.items()},
                "tail": self.tail, "tail_fraction": self.tail_fraction,
                "quadrature_error": self.quadrature_error, "truncation_estimate": self.truncation_estimate,
                "discretization_error": self.discretization_error, "norm_sq": self.norm_sq, "coercivity": self.coercivity}


def check_smallness(q: SampledField, s: float, k0: float, delta: float = SMALLNESS_DELTA) -> None:
    """Require k0^(s + 1/2) > ||q||_{H^s} / delta."""
    nrm = sobolev_norm(q, s)
    if not k0 ** (s + 0.5) > nrm / delta:
        required = (nrm / delta) ** (1.0 / (s + 0.5))
        raise SmallnessError(f"k0 = {k0:.4g} is too small for ||q||_H^s = {nrm:.4g}; need k0 > {required:.4g}",
                             required)


def cubic_tail(q: SampledField, s: float, k_max: float) -> tuple[float, float]:
    """int_{k_max}^inf k^(2s) tr(Lambda^3)/3 dk from a power law through k_max and 2 k_max.

    Returns the tail and the measured exponent of tr(Lambda^3).
    """
    r = q.conj()
    ta = trace34_closed_form(q, r, k_max, RESIDUE_BAND_TOL, quartic=False)[0].real / 3
    tb = trace34_closed_form(q, r, 2 * k_max, RESIDUE_BAND_TOL, quartic=False)[0].real / 3
    if ta == 0 or tb == 0 or np.sign(ta) != np.sign(tb):
        return 0.0, float("nan")
    p = np.log(tb / ta) / np.log(2.0)
    if p + 2 * s >= -1:
        raise FredholmError(f"measured decay exponent {p:.3f} does not give an integrable tail")
    return float(-ta * k_max / (p + 2 * s + 1) * k_max ** (2 * s)), float(p)


def energy_density_samples(q: SampledField, k0: float, k_max: float, n_k: int,
                           k_nystrom: float = K_NYSTROM):
    ks, ws = k_nodes(k0, k_max, n_k, k_nystrom)
    return ks, ws, [density_sample(q, float(k), k_nystrom) for k in ks]


def energy_Es(q: SampledField, s: float, k0: float = 1.0, k_max: float | None = None, n_k: int = DEFAULT_NK,
              samples=None, check: bool = True, k_nystrom: float = K_NYSTROM) -> EnergyResult:
    """E_s(k0, q) with per-order contributions and error estimates.

    ``samples`` may carry (ks, ws, densities) from energy_density_samples so
    several s share one set of determinant evaluations.
    """
    if not -0.5 < s < 0:
        raise ValueError("s must lie in (-1/2, 0)")
    k_max = K_MAX_FACTOR * k0 if k_max is None else k_max
    if check:
        check_smallness(q, s, k0)
    norm_sq = microlocal_norm(q, s, k0) ** 2
    if not np.any(q.values):
        return EnergyResult(s, k0, k_max, n_k, 0.0, {2: 0.0, 3: 0.0, 4: 0.0, 5: 0.0}, 0.0, 0.0, 0.0, 0.0)
    if samples is None:
        samples = energy_density_samples(q, k0, k_max, n_k, k_nystrom)
    ks, ws, dens = samples
    weight = ks ** (2 * s) * ws
    cubic = np.array([d.cubic for d in dens])
    quartic = np.array([d.quartic for d in dens])
    rest = np.array([d.rest for d in dens])
    E2 = quadratic_energy(q, s, k0)
    E2_quad = float(np.sum(weight * np.array([d.quadratic for d in dens])))
    E2_quad += quadratic_energy(q, s, k_max)
    tail_hi, _ = cubic_tail(q, s, k_max)
    # key 5 collects orders five and up
    contributions = {2: E2, 3: float(np.sum(weight * cubic)), 4: float(np.sum(weight * quartic)),
                     5: float(np.sum(weight * rest))}
    Es = E2 + contributions[3] + contributions[4] + contributions[5] + tail_hi
    # dropped orders >= 5 above the Nystrom range, scaled from the last Nystrom node
    ny = [i for i, d in enumerate(dens) if d.method == "nystrom"]
    trunc = 0.0
    if ny and len(ny) < len(dens):
        i = ny[-1]
        kk = ks[len(ny):]
        trunc = float(np.sum(weight[len(ny):] * abs(rest[i]) * (ks[i] / kk) ** 2.5))
    disc = float(np.sum(weight * np.array([d.error for d in dens])))
    return EnergyResult(s, k0, k_max, n_k, float(Es), contributions, float(tail_hi), abs(E2_quad - E2),
                        trunc, norm_sq, disc, list(dens))


# A-priori experiment -----------------------------------------------------------

@dataclass
class AprioriReport:
    s: float
    k0: float
    times: list
    norms: list
    energies: list
    energy_drift: float
    norm_ratio: float
    integrator_error: float
    quadrature_error: float

    @property
    def within_budget(self) -> bool:
        """Relative E_s drift within the integrator error plus the budgets of both endpoints."""
        return self.energy_drift <= self.integrator_error + 2 * self.quadrature_error

    def to_json(self) -> dict:
        return {"s": self.s, "k0": self.k0, "times": self.times, "norms": self.norms,
                "Es": self.energies, "energy_drift": self.energy_drift, "norm_ratio": self.norm_ratio,
                "norm_ratio_series": [n / self.norms[0] if self.norms[0] else 0.0 for n in self.norms],
                "integrator_error": self.integrator_error, "quadrature_error": self.quadrature_error}


def apriori_experiment(trajectory, s_values, k0: float = 1.0, n_k: int = DEFAULT_NK,
                       snapshots: list | None = None) -> list:
    """Norms ||q(t)||_{H^s_k0} and energies E_s(k0, q(t)) along a trajectory.

    ``snapshots`` selects snapshot indices (default: first and last).  The
    integrator error is the relative Hamiltonian drift of the run; the
    quadrature error is the largest per-snapshot error budget of E_s.  All
    three are relative to E_s(0).
    """
    idx = [0, len(trajectory.snapshots) - 1] if snapshots is None else list(snapshots)
    idx = sorted(set(idx))
    s_values = list(np.atleast_1d(s_values))
    snaps = [trajectory.snapshots[i] for i in idx]
    times = [float(trajectory.times[i]) for i in idx]
    zero = not np.any(snaps[0].values)
    if not zero:
        for s in s_values:
            check_smallness(snaps[0], s, k0)
    per_snap = [None if zero else energy_density_samples(q, k0, K_MAX_FACTOR * k0, n_k) for q in snaps]
    integ = trajectory.max_relative_drift("hamiltonian") if trajectory.hamiltonian else 0.0
    reports = []
    for s in s_values:
        norms = [microlocal_norm(q, s, k0) for q in snaps]
        results = [energy_Es(q, s, k0, n_k=n_k, samples=smp, check=False) if smp is not None else None
                   for q, smp in zip(snaps, per_snap)]
        energies = [r.Es if r is not None else 0.0 for r in results]
        e0 = energies[0]
        drift = max(abs(e - e0) for e in energies) / abs(e0) if e0 else 0.0
        ratio = max(n / norms[0] for n in norms) if norms[0] else 0.0
        quad = max((r.error_budget for r in results if r is not None), default=0.0) / abs(e0) if e0 else 0.0
        reports.append(AprioriReport(float(s), k0, times, norms, energies, drift, ratio, integ, quad))
    return reports
