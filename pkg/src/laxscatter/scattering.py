"""Inverse transmission coefficient T^{-1}(k) from a Jost set.

Because tr J = 0 the column renormalizers multiply to one, so the
determinant of the renormalized columns equals the raw Wronskian and never
overflows.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .field import SampledField
from .jost import JostSet, JostSolution, JostError, solve_jost_set, support_window
from .lax import LaxSpec, build_qdnls_spec


class SingularColumnError(JostError):
    """A Jost column vanishes identically."""


@dataclass(frozen=True)
class TransmissionResult:
    k: float
    T_inv: complex
    method: str
    x_independence_span: float = 0.0
    diagnostics: dict = dc_field(default_factory=dict)

    def log_T_inv(self) -> complex:
        """Principal logarithm; T^{-1} must be nonzero."""
        if self.T_inv == 0:
            raise ValueError("T^{-1} vanishes; log is undefined")
        return complex(np.log(self.T_inv))


def wronskian_profile(jost: JostSet) -> np.ndarray:
    """det of the column matrix at every grid node."""
    return np.linalg.det(jost.matrix())


def _sample_nodes(jost: JostSet, count: int = 8) -> np.ndarray:
    a, b = jost.support_window() or (0, 0)
    if b - a < count:
        a, b = 0, jost.grid.n_points - 1
    return np.unique(np.linspace(a, b, count).round().astype(int))


def transmission_wronskian(jost: JostSet, at_x: int | None = None, n_samples: int = 8) -> TransmissionResult:
    """T^{-1} = det(Phi_1^-, ..., Phi_l^-, Phi_{l+1}^+, ..., Phi_n^+)."""
    for s in jost.solutions:
        if not np.any(s.values):
            raise SingularColumnError(f"column {s.index + 1} is identically zero")
    nodes = _sample_nodes(jost, n_samples)
    if at_x is None:
        at_x = int(nodes[len(nodes) // 2])
    W = np.linalg.det(jost.matrix(nodes))
    val = complex(np.linalg.det(jost.matrix(at_x)))
    span = float(np.max(np.abs(W[:, None] - W[None, :])))
    return TransmissionResult(jost.k, val, "wronskian", span,
                              {"at_x": at_x, "sample_nodes": nodes.tolist()})


def transmission_limit(left_jost: JostSolution, spec: LaxSpec) -> TransmissionResult:
    """T^{-1} as the right-edge value of the first component of Phi_1^-."""
    w = spec.J.array
    if left_jost.side != "left" or left_jost.index != 0:
        raise ValueError("the limit formula needs the first left Jost solution")
    if np.any(w[1:].real >= w[0].real):
        raise JostError("the first entry of J must have strictly the largest real part")
    a, b = support_window(spec)
    plateau = left_jost.values[b:, 0]
    flat = float(np.max(np.abs(plateau - plateau[-1])))
    return TransmissionResult(spec.k, complex(left_jost.values[-1, 0]), "limit", flat,
                              {"plateau_start": b})


def transmission(spec: LaxSpec, method: str = "wronskian") -> TransmissionResult:
    jost = solve_jost_set(spec, cross_validate=False)
    if method == "wronskian":
        return transmission_wronskian(jost)
    if method == "limit":
        return transmission_limit(jost.solutions[0], spec)
    raise ValueError(f"unknown method {method!r}")


def derivative_identity_residual(A: np.ndarray, V: np.ndarray) -> float:
    """|sum_i det(V with column i replaced by A v_i) - tr(A) det(V)|."""
    A = np.asarray(A, dtype=complex)
    V = np.asarray(V, dtype=complex)
    lhs = 0.0
    for i in range(V.shape[1]):
        Vi = V.copy()
        Vi[:, i] = A @ V[:, i]
        lhs = lhs + np.linalg.det(Vi)
    return float(abs(lhs - np.trace(A) * np.linalg.det(V)))


def wronskian_derivative_identity_check(jost: JostSet, spec: LaxSpec, rng=None, trials: int = 20) -> dict:
    """Algebraic identity on random matrices and dW/dx = 0 on the computed W."""
    rng = np.random.default_rng(0) if rng is None else rng
    n = jost.n
    alg = 0.0
    for _ in range(trials):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        V = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        alg = max(alg, derivative_identity_residual(A, V) / max(1.0, abs(np.linalg.det(V)) * np.abs(A).max()))
    W = wronskian_profile(jost)
    a, b = jost.support_window() or (0, 0)
    lo, hi = max(a - 4, 2), min(b + 4, jost.grid.n_points - 3)
    if hi <= lo:
        lo, hi = 2, jost.grid.n_points - 3
    idx = np.arange(lo, hi + 1)
    h = jost.grid.dx
    dW = (-W[idx + 2] + 8 * W[idx + 1] - 8 * W[idx - 1] + W[idx - 2]) / (12 * h)
    rel = float(np.max(np.abs(dW) / np.abs(W[idx])))
    return {"algebraic_residual": alg, "max_relative_dWdx": rel}


def conservation_probe(snapshots: Sequence[SampledField], k: float, times: Sequence[float] | None = None) -> dict:
    """T^{-1}(k, q(t)) with r = conj(q) for each snapshot, plus the largest relative drift."""
    vals = []
    for q in snapshots:
        spec = build_qdnls_spec(q, q.conj(), k)
        vals.append(transmission_wronskian(solve_jost_set(spec, cross_validate=False)).T_inv)
    vals = np.array(vals)
    drift = np.abs(vals - vals[0]) / abs(vals[0])
    return {"k": float(k), "times": list(times) if times is not None else list(range(len(vals))),
            "T_inv": vals, "relative_drift": drift, "max_relative_drift": float(drift.max())}


def log_transmission_sweep(ks: Sequence[float], T_invs: Sequence[complex]) -> np.ndarray:
    """log T^{-1} along a k-sweep: principal at the largest k, then nearest branch."""
    ks = np.asarray(ks, dtype=float)
    T = np.asarray(T_invs, dtype=complex)
    if np.any(T == 0):
        raise ValueError("T^{-1} vanishes on the sweep")
    order = np.argsort(-ks)
    out = np.empty(len(T), dtype=complex)
    prev = None
    for i in order:
        v = np.log(T[i])
        if prev is not None:
            v += 2j * np.pi * np.round((prev - v).imag / (2 * np.pi))
        out[i] = v
        prev = v
    return out
