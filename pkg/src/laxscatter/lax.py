"""Lax operator data L = d/dx - k J - U0(u).

U0 has polynomial entries in the field components u_1..u_m.  Entries are
stored as monomial maps (exponent tuple -> coefficient) so derivatives are
exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import Sequence

import numpy as np

from .field import GridSpec, SampledField, check_same_grid, standard_potential

OMEGA = np.exp(2j * np.pi / 3)


class LaxSpecError(ValueError):
    """A structural assumption on (J, U0) is violated.

    ``invariant`` names the violated condition.
    """

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class Polynomial:
    """Polynomial in m variables with complex coefficients."""

    def __init__(self, terms: dict | None = None, n_vars: int = 1):
        self.n_vars = int(n_vars)
        self.terms: dict[tuple, complex] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.n_vars or min(exps, default=0) < 0:
                raise ValueError(f"bad exponent vector {exps} for {self.n_vars} variables")
            if c != 0:
                self.terms[exps] = self.terms.get(exps, 0) + complex(c)

    @classmethod
    def variable(cls, i: int, n_vars: int, coeff: complex = 1.0) -> "Polynomial":
        e = [0] * n_vars
        e[i] = 1
        return cls({tuple(e): coeff}, n_vars)

    @classmethod
    def zero(cls, n_vars: int) -> "Polynomial":
        return cls({}, n_vars)

    def is_zero(self) -> bool:
        return not self.terms

    def has_constant_term(self) -> bool:
        return tuple([0] * self.n_vars) in self.terms

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Evaluate on stacked values ``u`` of shape (m, ...)."""
        u = np.asarray(u, dtype=complex)
        out = np.zeros(u.shape[1:], dtype=complex)
        for exps, c in self.terms.items():
            term = np.full(u.shape[1:], c, dtype=complex)
            for i, e in enumerate(exps):
                if e:
                    term = term * u[i] ** e
            out = out + term
        return out

    def derivative(self, i: int) -> "Polynomial":
        if not 0 <= i < self.n_vars:
            raise IndexError(f"component index {i} out of range")
        terms = {}
        for exps, c in self.terms.items():
            if exps[i] > 0:
                e = list(exps)
                e[i] -= 1
                terms[tuple(e)] = terms.get(tuple(e), 0) + c * exps[i]
        return Polynomial(terms, self.n_vars)

    def to_json(self) -> list:
        return [{"exponents": list(e), "coeff": [c.real, c.imag]} for e, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data: list, n_vars: int) -> "Polynomial":
        terms = {}
        for mono in data:
            c = mono["coeff"]
            c = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
            terms[tuple(mono["exponents"])] = terms.get(tuple(mono["exponents"]), 0) + c
        return cls(terms, n_vars)

    def __repr__(self):
        return f"Polynomial({self.terms!r})"


@dataclass(frozen=True, eq=False)
class DiagonalGenerator:
    """Diagonal entries omega_1..omega_n of J."""

    omegas: tuple

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(complex(w) for w in self.omegas))

    @property
    def n(self) -> int:
        return len(self.omegas)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.omegas, dtype=complex)

    @property
    def split_index(self) -> int:
        """Number l of entries with positive real part (left Jost solutions)."""
        return int(np.sum(self.array.real > 0))

    def validate(self) -> None:
        w = self.array
        if self.n < 2:
            raise LaxSpecError("size", "J needs at least two entries")
        scale = np.max(np.abs(w))
        if abs(w.sum()) > 1e-14 * max(scale, 1.0) * self.n:
            raise LaxSpecError("trace-free", f"sum of omegas is {w.sum()!r}")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if abs(w[i] - w[j]) <= 1e-12 * scale:
                    raise LaxSpecError("eigenvalues not distinct", f"omega_{i+1} = omega_{j+1}")
        if np.any(w.real == 0) or np.any(np.abs(w.real) <= 1e-14 * scale):
            raise LaxSpecError("Re(ω_j) = 0", "every omega needs a nonzero real part")
        re = w.real
        l = self.split_index
        if not (np.all(re[:l] > 0) and np.all(re[l:] < 0)):
            raise LaxSpecError("ordering", "entries with positive real part must come first")
        if np.any(np.diff(re[:l]) > 0) or np.any(np.diff(re[l:]) > 0):
            raise LaxSpecError("ordering", "real parts must be non-increasing")


@dataclass(frozen=True, eq=False)
class PotentialMatrix:
    """n x n matrix of polynomials in m field components."""

    entries: tuple
    n_fields: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(tuple(row) for row in self.entries))

    @property
    def n(self) -> int:
        return len(self.entries)

    def validate(self) -> None:
        for i, row in enumerate(self.entries):
            if len(row) != self.n:
                raise LaxSpecError("shape", "U0 must be square")
            for j, p in enumerate(row):
                if p.n_vars != self.n_fields:
                    raise LaxSpecError("shape", f"entry ({i+1},{j+1}) has wrong number of variables")
                if p.has_constant_term():
                    raise LaxSpecError("no constant terms", f"entry ({i+1},{j+1}) has a constant term")
                if i == j and not p.is_zero():
                    raise LaxSpecError("off-diagonal", f"diagonal entry ({i+1},{i+1}) is not zero")

    def derivative(self, i: int) -> "PotentialMatrix":
        return PotentialMatrix([[p.derivative(i) for p in row] for row in self.entries], self.n_fields)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """Values on stacked fields of shape (m, npts); returns (npts, n, n)."""
        npts = np.asarray(u).shape[1]
        out = np.zeros((npts, self.n, self.n), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, p in enumerate(row):
                if not p.is_zero():
                    out[:, i, j] = p(u)
        return out

    def to_json(self) -> list:
        return [[p.to_json() for p in row] for row in self.entries]

    @classmethod
    def from_json(cls, data: list, n_fields: int) -> "PotentialMatrix":
        return cls([[Polynomial.from_json(p, n_fields) for p in row] for row in data], n_fields)


@dataclass(frozen=True, eq=False)
class LaxSpec:
    """Validated operator data (J, U0, k) together with the fields u."""

    J: DiagonalGenerator
    U0: PotentialMatrix
    k: float
    fields: tuple
    label: str = ""
    kind: str = "general"
    field_names: tuple = dc_field(default=())

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))
        if not self.field_names:
            object.__setattr__(self, "field_names", tuple(f"u{i+1}" for i in range(len(self.fields))))

    @property
    def n(self) -> int:
        return self.J.n

    @property
    def split_index(self) -> int:
        return self.J.split_index

    @property
    def grid(self) -> GridSpec:
        return self.fields[0].grid

    @property
    def z(self) -> np.ndarray:
        """Resolvent poles k*omega_j."""
        return self.k * self.J.array

    @cached_property
    def u_stack(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    @cached_property
    def u0_values(self) -> np.ndarray:
        """U0(u(x)) at every node, shape (npts, n, n)."""
        vals = self.U0.evaluate(self.u_stack)
        vals.setflags(write=False)
        return vals

    def support_indices(self) -> np.ndarray:
        mask = np.zeros(self.grid.n_points, dtype=bool)
        for f in self.fields:
            mask |= f.values != 0
        return np.flatnonzero(mask)

    def with_fields(self, fields: Sequence[SampledField]) -> "LaxSpec":
        return LaxSpec(self.J, self.U0, self.k, tuple(fields), self.label, self.kind, self.field_names)

    def with_k(self, k: float) -> "LaxSpec":
        _check_k(k)
        return LaxSpec(self.J, self.U0, float(k), self.fields, self.label, self.kind, self.field_names)

    def to_json(self) -> dict:
        return {
            "omegas": [[w.real, w.imag] for w in self.J.omegas],
            "U0": self.U0.to_json(),
            "k": self.k,
            "kind": self.kind,
            "field_names": list(self.field_names),
        }


def _check_k(k) -> None:
    if not np.isfinite(k) or k <= 0:
        raise LaxSpecError("k > 0", f"spectral parameter must be positive, got {k!r}")


def qdnls_generator() -> DiagonalGenerator:
    return DiagonalGenerator((1.0, OMEGA**2, OMEGA))


def qdnls_potential_matrix() -> PotentialMatrix:
    q = Polynomial.variable(0, 2)
    r = Polynomial.variable(1, 2)
    o = Polynomial.zero(2)
    return PotentialMatrix([[o, q, r], [r, o, q], [q, r, o]], 2)


def build_qdnls_spec(q: SampledField, r: SampledField, k: float) -> LaxSpec:
    """qdNLS operator: J = diag(1, w^2, w), U0 rows (0 q r; r 0 q; q r 0)."""
    _check_k(k)
    check_same_grid(q, r)
    return LaxSpec(qdnls_generator(), qdnls_potential_matrix(), float(k), (q, r),
                   label=f"qdnls[{q.label}; {r.label}]", kind="qdnls", field_names=("q", "r"))


def build_general_spec(J: DiagonalGenerator | Sequence[complex], U0: PotentialMatrix,
                       u: Sequence[SampledField], k: float, label: str = "") -> LaxSpec:
    """Validate (J, U0, u, k) and return a spec."""
    if not isinstance(J, DiagonalGenerator):
        J = DiagonalGenerator(tuple(J))
    J.validate()
    U0.validate()
    _check_k(k)
    if U0.n != J.n:
        raise LaxSpecError("shape", f"J has {J.n} entries but U0 is {U0.n}x{U0.n}")
    if len(u) != U0.n_fields:
        raise LaxSpecError("shape", f"U0 uses {U0.n_fields} fields, got {len(u)}")
    check_same_grid(*u)
    return LaxSpec(J, U0, float(k), tuple(u), label=label)


def evaluate_U0(spec: LaxSpec, x_index: int | None = None) -> np.ndarray:
    """U0(u(x)) at one node, or at all nodes when ``x_index`` is None."""
    vals = spec.u0_values
    return vals if x_index is None else vals[x_index].copy()


def nabla_U0(spec: LaxSpec, i: int, x_index: int | None = None) -> np.ndarray:
    """Partial derivative of U0 with respect to u_i, evaluated at u(x)."""
    if not 0 <= i < spec.U0.n_fields:
        raise IndexError(f"component index {i} out of range for {spec.U0.n_fields} fields")
    d = spec.U0.derivative(i).evaluate(spec.u_stack)
    return d if x_index is None else d[x_index]


def random_general_spec(rng: np.random.Generator, n: int, grid: GridSpec, k: float,
                        amplitude: float = 0.15, n_fields: int = 2, quadratic: bool = True) -> LaxSpec:
    """Random valid spec with l = n//2 left indices and bump-class fields."""
    l = n // 2
    pos = np.sort(rng.uniform(0.6, 1.4, l))[::-1]
    neg = -np.sort(rng.uniform(0.6, 1.4, n - l))
    neg *= pos.sum() / -neg.sum()
    im = rng.uniform(-1.0, 1.0, n)
    im -= im.mean()
    omegas = np.concatenate([pos, np.sort(neg)[::-1]]) + 1j * im
    omegas[-1] -= omegas.sum()
    J = DiagonalGenerator(tuple(omegas))

    zero = Polynomial.zero(n_fields)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            if i == j:
                row.append(zero)
                continue
            terms = {}
            for v in range(n_fields):
                e = [0] * n_fields
                e[v] = 1
                terms[tuple(e)] = complex(*rng.normal(size=2)) / np.sqrt(2 * n_fields)
            if quadratic and rng.uniform() < 0.5:
                e = [0] * n_fields
                e[int(rng.integers(n_fields))] += 2
                terms[tuple(e)] = terms.get(tuple(e), 0) + 0.5 * complex(*rng.normal(size=2))
            row.append(Polynomial(terms, n_fields))
        rows.append(row)
    U0 = PotentialMatrix(rows, n_fields)

    fields = []
    for v in range(n_fields):
        width = rng.uniform(1.5, 2.5)
        center = rng.uniform(-1.0, 1.0)
        amp = amplitude * np.exp(2j * np.pi * rng.uniform())
        fields.append(standard_potential("bump", amp, width, center, grid, label=f"u{v+1}"))
    return build_general_spec(J, U0, fields, k, label=f"random{n}x{n}")


def spec_from_json(data: dict, fields: Sequence[SampledField]) -> LaxSpec:
    """Rebuild a spec from :meth:`LaxSpec.to_json` output and field data."""
    omegas = [complex(w[0], w[1]) if isinstance(w, (list, tuple)) else complex(w) for w in data["omegas"]]
    n_fields = len(fields)
    U0 = PotentialMatrix.from_json(data["U0"], n_fields)
    if data.get("kind") == "qdnls" and n_fields == 2:
        spec = build_qdnls_spec(fields[0], fields[1], float(data["k"]))
        if not np.allclose(spec.J.array, omegas):
            raise LaxSpecError("qdnls", "omegas do not match the qdNLS generator")
        return spec
    return build_general_spec(omegas, U0, fields, float(data["k"]))
