"""Time integration of i q_t + (1/sqrt 3) q_xx + 2i conj(q) conj(q)_x = 0.

Written as q_t = (i/sqrt 3) q_xx - (conj(q)^2)_x, the linear part is applied
exactly in Fourier space (integrating factor) and the nonlinearity is
advanced with classical RK4, evaluated pseudospectrally with 2/3
dealiasing.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import GridSpec, SampledField, mollify, read_field_csv, write_field_csv

SQRT3 = np.sqrt(3.0)
BLOWUP = 1e6


class EvolutionError(RuntimeError):
    """Blow-up or non-finite values during time stepping."""


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    t_end: float
    dealias: bool = True
    stride: int = 1
    nonlinear: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")

    @property
    def n_steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if not np.isclose(n * self.dt, self.t_end, rtol=1e-12, atol=1e-14):
            raise ValueError("t_end must be an integer multiple of dt")
        return n

    def explicit_stability_limit(self, grid: GridSpec) -> float:
        """dx^2 sqrt(3) / pi^2, the step an explicit scheme would need; recorded only."""
        return grid.dx**2 * SQRT3 / np.pi**2


@dataclass
class TrajectoryRecord:
    times: list
    snapshots: list
    mass: list = dc_field(default_factory=list)
    hamiltonian: list = dc_field(default_factory=list)
    info: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    def final(self) -> SampledField:
        return self.snapshots[-1]

    def max_relative_drift(self, key: str) -> float:
        series = np.asarray(getattr(self, key), dtype=float)
        if series.size == 0 or series[0] == 0:
            return float(np.max(np.abs(series - series[0]))) if series.size else 0.0
        return float(np.max(np.abs(series - series[0])) / abs(series[0]))


def _derivative(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    return np.fft.ifft(1j * grid.xi_fft * np.fft.fft(values))


def mass(q: SampledField) -> float:
    """int |q|^2 dx."""
    return float(np.sum(np.abs(q.values) ** 2) * q.grid.dx)


def hamiltonian(q: SampledField, imag_tol: float = 1e-10) -> float:
    """H = int (i/(2 sqrt 3))(q' r - q r') - (r^3 + q^3)/3 dx with r = conj(q)."""
    v = q.values
    r = np.conj(v)
    qx = _derivative(v, q.grid)
    rx = np.conj(qx)
    H = np.sum(1j / (2 * SQRT3) * (qx * r - v * rx) - (r**3 + v**3) / 3.0) * q.grid.dx
    scale = max(1.0, float(np.sum(np.abs(v) ** 2) * q.grid.dx))
    if abs(H.imag) > imag_tol * scale:
        raise ValueError(f"Hamiltonian has imaginary part {H.imag:.3g}")
    return float(H.real)


def evolve_qdnls(q0: SampledField, config: EvolutionConfig, edge_tol: float = 1e-12) -> TrajectoryRecord:
    """Integrating-factor RK4; snapshots every ``stride`` steps including t = 0 and t_end."""
    grid = q0.grid
    edge = max(abs(q0.values[0]), abs(q0.values[-1]))
    if edge > edge_tol:
        raise ValueError(f"initial datum is {edge:.3g} at the grid edge; it must decay below {edge_tol}")
    xi = grid.xi_fft
    dt = config.dt
    E = np.exp(-1j * xi**2 / SQRT3 * dt / 2)
    E2 = E * E
    mask = (np.abs(xi) < (2.0 / 3.0) * np.pi / grid.dx) if config.dealias else np.ones_like(xi, dtype=bool)
    dxi = -1j * xi * mask

    if config.nonlinear:
        def N(Q):
            q = np.fft.ifft(Q)
            return dxi * np.fft.fft(np.conj(q) ** 2)
    else:
        def N(Q):
            return np.zeros_like(Q)

    Q = np.fft.fft(q0.values)
    times, snaps = [0.0], [q0]
    n_steps = config.n_steps
    for step in range(1, n_steps + 1):
        a = N(Q)
        b = N(E * (Q + dt / 2 * a))
        c = N(E * Q + dt / 2 * b)
        d = N(E2 * Q + dt * E * c)
        Q = E2 * Q + dt / 6 * (E2 * a + 2 * E * (b + c) + d)
        if step % config.stride == 0 or step == n_steps:
            q = np.fft.ifft(Q)
            if not np.all(np.isfinite(q)):
                raise EvolutionError(f"non-finite values at t = {step * dt:.6g}")
            if np.max(np.abs(q)) > BLOWUP:
                raise EvolutionError(f"blow-up guard triggered at t = {step * dt:.6g}")
            times.append(step * dt)
            snaps.append(SampledField(grid, q, f"{q0.label}@t={step * dt:.6g}"))
    rec = TrajectoryRecord(times, snaps,
                           info={"dt": dt, "t_end": config.t_end, "dealias": config.dealias,
                                 "nonlinear": config.nonlinear,
                                 "explicit_stability_limit": config.explicit_stability_limit(grid)})
    rec.mass = [mass(s) for s in snaps]
    rec.hamiltonian = [hamiltonian(s) for s in snaps]
    return rec


def scattering_window(q: SampledField, inner: float | None = None, outer: float | None = None) -> SampledField:
    """Cut a snapshot to compact support with a smooth plateau (0.45 L, 0.55 L by default).

    Evolved snapshots carry tiny dispersive tails up to the grid edge; Jost
    solutions need exactly compact support.
    """
    L = q.grid.half_width
    inner = 0.45 * L if inner is None else inner
    outer = 0.55 * L if outer is None else outer
    out = mollify(q, inner, outer)
    return out.with_values(out.values, q.label)


def save_trajectory(record: TrajectoryRecord, directory) -> None:
    """One CSV per snapshot plus manifest.json with times and invariants."""
    os.makedirs(directory, exist_ok=True)
    files = []
    for i, snap in enumerate(record.snapshots):
        name = f"snapshot_{i:05d}.csv"
        write_field_csv(os.path.join(directory, name), snap)
        files.append(name)
    manifest = {"times": [float(t) for t in record.times], "files": files,
                "invariants": {"mass": [float(m) for m in record.mass],
                               "hamiltonian": [float(h) for h in record.hamiltonian]},
                "info": record.info}
    with open(os.path.join(directory, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_trajectory(directory) -> TrajectoryRecord:
    with open(os.path.join(directory, "manifest.json")) as fh:
        manifest = json.load(fh)
    snaps = [read_field_csv(os.path.join(directory, f)) for f in manifest["files"]]
    inv = manifest["invariants"]
    return TrajectoryRecord(manifest["times"], snaps, inv["mass"], inv["hamiltonian"], manifest.get("info", {}))
