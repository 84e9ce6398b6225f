"""Uniform grids, sampled complex fields and their unitary Fourier data.

The transform approximates the continuous unitary Fourier transform

    q_hat(xi) = (2 pi)^(-1/2) * int q(x) exp(-i xi x) dx

on the grid x_j = -L + j dx and the frequency grid xi_m = -pi/dx + m dxi,
so that sum |q_hat|^2 dxi equals sum |q|^2 dx exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on [-L, L) with n nodes."""

    half_width: float
    n_points: int

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_points

    @property
    def dxi(self) -> float:
        return np.pi / self.half_width

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_width + self.dx * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequencies in ascending order, starting at -pi/dx."""
        xi = -np.pi / self.dx + self.dxi * np.arange(self.n_points)
        xi.setflags(write=False)
        return xi

    @cached_property
    def xi_fft(self) -> np.ndarray:
        """Frequencies in numpy FFT order, for internal spectral multipliers."""
        xi = 2.0 * np.pi * np.fft.fftfreq(self.n_points, self.dx)
        xi.setflags(write=False)
        return xi

    def index_of(self, x: float) -> int:
        """Index of the node closest to x."""
        return int(np.clip(np.rint((x + self.half_width) / self.dx), 0, self.n_points - 1))

    def coarsened(self) -> "GridSpec":
        """Grid made of every other node."""
        return make_grid(self.half_width, self.n_points // 2)


def make_grid(L: float, n: int) -> GridSpec:
    """Build a grid on [-L, L) with n nodes (n a power of two, n >= 16)."""
    if not np.isfinite(L) or L <= 0:
        raise GridError(f"half width must be positive, got {L!r}")
    if int(n) != n or n < 16 or (int(n) & (int(n) - 1)) != 0:
        raise GridError(f"n_points must be a power of two >= 16, got {n!r}")
    return GridSpec(float(L), int(n))


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledField:
    """Complex samples of a function on a grid."""

    grid: GridSpec
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n_points,):
            raise GridError(f"expected {self.grid.n_points} samples, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"field {self.label!r} has non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def conj(self, label: str | None = None) -> "SampledField":
        return SampledField(self.grid, np.conj(self.values), label if label is not None else f"conj({self.label})")

    def with_values(self, values, label: str | None = None) -> "SampledField":
        return SampledField(self.grid, values, self.label if label is None else label)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dx))

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.grid.dx)

    def support_indices(self) -> np.ndarray:
        """Indices of nodes where the field is not exactly zero."""
        return np.flatnonzero(self.values != 0)


@dataclass(frozen=True, eq=False)
class SpectrumField:
    """Unitary Fourier coefficients on the ascending frequency grid."""

    grid: GridSpec
    coefficients: np.ndarray
    label: str = ""

    def __post_init__(self):
        coef = _frozen(self.coefficients)
        if coef.shape != (self.grid.n_points,):
            raise GridError(f"expected {self.grid.n_points} coefficients, got shape {coef.shape}")
        object.__setattr__(self, "coefficients", coef)

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2) * self.grid.dxi))


def _alternating(n: int) -> np.ndarray:
    return np.where(np.arange(n) % 2 == 0, 1.0, -1.0)


def _phase(grid: GridSpec) -> np.ndarray:
    # exp(i xi_m L) is exactly (-1)^(m - n/2)
    return _alternating(grid.n_points) * (1.0 if (grid.n_points // 2) % 2 == 0 else -1.0)


def transform(f: SampledField) -> SpectrumField:
    """Unitary transform of a sampled field."""
    g = f.grid
    alt = _alternating(g.n_points)
    coef = g.dx / np.sqrt(2.0 * np.pi) * _phase(g) * np.fft.fft(f.values * alt)
    return SpectrumField(g, coef, f.label)


def inverse_transform(F: SpectrumField) -> SampledField:
    """Inverse of :func:`transform`."""
    g = F.grid
    alt = _alternating(g.n_points)
    vals = g.dxi / np.sqrt(2.0 * np.pi) * g.n_points * alt * np.fft.ifft(F.coefficients * _phase(g))
    return SampledField(g, vals, F.label)


def check_same_grid(*fields) -> GridSpec:
    grids = {f.grid for f in fields}
    if len(grids) != 1:
        raise GridError("fields live on different grids")
    return grids.pop()


def spectral_apply(values: np.ndarray, grid: GridSpec, symbol) -> np.ndarray:
    """Apply the periodic Fourier multiplier ``symbol(xi)`` to grid values."""
    return np.fft.ifft(np.fft.fft(values) * symbol(grid.xi_fft))


def fourier_midpoints(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Trigonometric interpolation at x_j + dx/2, for j = 0..n-2.

    Midpoints between two exact zeros are set to zero so that compactly
    supported data stays compactly supported.
    """
    vals = np.asarray(values, dtype=complex)
    shifted = np.fft.ifft(np.fft.fft(vals) * np.exp(0.5j * grid.xi_fft * grid.dx))[:-1]
    zero = (vals[:-1] == 0) & (vals[1:] == 0)
    shifted[zero] = 0.0
    return shifted


def _bump_profile(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    inside = np.abs(t) < 1
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def standard_potential(kind: str, amplitude: complex, width: float, center: float, grid: GridSpec,
                       label: str | None = None) -> SampledField:
    """Test potentials: ``gaussian`` a*exp(-t^2), ``sech`` a*sech(t), ``bump``.

    Here t = (x - center)/width.  The bump is a*exp(-1/(1 - t^2)) for |t| < 1
    and exactly zero elsewhere.
    """
    if not width > 0:
        raise ValueError(f"width must be positive, got {width!r}")
    t = (grid.x - center) / width
    if kind == "gaussian":
        prof = np.exp(-t**2)
    elif kind == "sech":
        prof = 1.0 / np.cosh(t)
    elif kind == "bump":
        prof = _bump_profile(t)
    else:
        raise ValueError(f"unknown potential kind {kind!r}")
    vals = complex(amplitude) * prof
    if kind == "bump":
        vals[prof == 0] = 0.0
    return SampledField(grid, vals, label or f"{kind}(a={amplitude}, w={width}, c={center})")


def smooth_plateau(grid: GridSpec, inner: float, outer: float, center: float = 0.0) -> np.ndarray:
    """Smooth cutoff equal to 1 on |x-c| <= inner and exactly 0 on |x-c| >= outer."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    s = np.clip((np.abs(grid.x - center) - inner) / (outer - inner), 0.0, 1.0)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    a, b = f(1.0 - s), f(s)
    return a / (a + b)


def mollify(field: SampledField, inner: float, outer: float, center: float = 0.0) -> SampledField:
    """Multiply by a smooth plateau so the result is exactly compactly supported."""
    cut = smooth_plateau(field.grid, inner, outer, center)
    vals = field.values * cut
    vals = np.where(cut == 0, 0.0, vals)
    return SampledField(field.grid, vals, f"mollified({field.label})")


def write_field_csv(path, field: SampledField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re", "im"])
        for x, v in zip(field.x, field.values):
            w.writerow([f"{x:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def write_spectrum_csv(path, spec: SpectrumField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["xi", "re", "im"])
        for xi, v in zip(spec.xi, spec.coefficients):
            w.writerow([f"{xi:.17g}", f"{v.real:.17g}", f"{v.imag:.17g}"])


def read_field_csv(path, label: str | None = None) -> SampledField:
    """Read a field written by :func:`write_field_csv`; the grid is inferred from x."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "re", "im"]:
        raise ValueError(f"{path}: expected header x,re,im")
    data = np.array([[float(c) for c in row] for row in rows[1:] if row], dtype=float)
    x = data[:, 0]
    grid = make_grid(-x[0], len(x))
    if not np.allclose(x, grid.x, rtol=0, atol=1e-9 * grid.half_width):
        raise GridError(f"{path}: x column is not a uniform grid on [-L, L)")
    return SampledField(grid, data[:, 1] + 1j * data[:, 2], label or str(path))
