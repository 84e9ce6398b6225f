"""Run configuration for the command-line front end.

A run is described by one JSON or TOML file plus flag overrides.  Every key
is checked before anything is computed; problems are reported as
``ConfigError`` naming the offending field, e.g. ``spec.U0[1][2][0].coeff``.

Potentials come from one of three places:

* ``spec``: path to a JSON file holding ``LaxSpec.to_json()`` output plus a
  ``fields`` list (and optionally a ``grid``);
* ``potential``: a qdNLS pair ``{q = FIELD, r = FIELD or "conj"}``;
* ``suite``: one of the named suites (``qdnls``, ``general``, ``small``, ``zero``).

A FIELD is either ``{kind, amplitude, width, center[, mollify]}`` with
``kind`` one of gaussian, sech, bump and ``amplitude`` a number or
``[re, im]``, or ``{csv = path}`` pointing at a file written by
``write_field_csv``.  Relative paths resolve against the file that names them.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, field as dc_field, replace
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .field import GridError, GridSpec, SampledField, make_grid, mollify, read_field_csv, standard_potential
from .lax import LaxSpec, LaxSpecError, build_qdnls_spec, spec_from_json
from .suites import DEFAULT_GRID, general_suite, qdnls_pairs, small_amplitude_suite, trajectory_datum

COMMANDS = ("jost", "transmission", "det2", "verify-equality", "greens", "gradcheck",
            "energy", "evolve", "norms", "full-report")
SUITES = ("qdnls", "general", "small", "zero")
FIELD_KINDS = ("gaussian", "sech", "bump")

# default tolerance per command; each is the acceptance bound of the check it gates
DEFAULT_TOL = {
    "jost": 1e-8,
    "transmission": 1e-8,
    "det2": 1e-6,
    "verify-equality": 1e-6,
    "greens": 1e-7,
    "gradcheck": 1e-5,
    "energy": 0.5,
    "evolve": 1e-5,
    "norms": 1e-8,
    "full-report": 1e-6,
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is a dotted path to the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: str | None = None
    potential: dict | None = None
    suite: str | None = None
    grid_L: float = DEFAULT_GRID[0]
    grid_n: int = DEFAULT_GRID[1]
    k: tuple = (4.0,)
    s: tuple = (-0.1, -0.25, -0.4)
    k0: float = 1.0
    tol: float | None = None
    out: str = "laxscatter_out"
    seed: int = 0
    dt: float = 1e-3
    t_end: float = 0.1
    stride: int = 10
    p: tuple = (1.0, 2.0)
    n_directions: int = 3
    n_y: int = 16
    n_k: int = 16
    series: bool = True
    workers: int = 1
    base_dir: str = dc_field(default=".", compare=False)

    @property
    def tolerance(self) -> float:
        return DEFAULT_TOL[self.command] if self.tol is None else self.tol

    def grid(self) -> GridSpec:
        return make_grid(self.grid_L, self.grid_n)

    def to_json(self) -> dict:
        # the output directory is left out so reports written to different places compare equal
        out = {k: getattr(self, k) for k in _KEYS if k != "out"}
        out["command"] = self.command
        out["tolerance"] = self.tolerance
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


# Scalar validators -----------------------------------------------------------------

def _number(path: str, v, positive: bool = False, nonneg: bool = False) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    v = float(v)
    if not np.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and v <= 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v!r}")
    return v


def _integer(path: str, v, minimum: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if v < minimum:
        raise ConfigError(path, f"must be at least {minimum}, got {v}")
    return int(v)


def _numbers(path: str, v, **kw) -> tuple:
    items = v if isinstance(v, (list, tuple)) else [v]
    if not items:
        raise ConfigError(path, "must not be empty")
    return tuple(_number(f"{path}[{i}]", x, **kw) for i, x in enumerate(items))


def _complex(path: str, v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ConfigError(path, "complex values are written [re, im]")
        return complex(_number(f"{path}[0]", v[0]), _number(f"{path}[1]", v[1]))
    return complex(_number(path, v))


def _s_values(path: str, v) -> tuple:
    vals = _numbers(path, v)
    for i, s in enumerate(vals):
        if not -0.5 < s < 0:
            raise ConfigError(f"{path}[{i}]", f"s must lie in (-1/2, 0), got {s}")
    return vals


def _p_values(path: str, v) -> tuple:
    items = v if isinstance(v, (list, tuple)) else [v]
    out = []
    for i, x in enumerate(items):
        if x in ("inf", "infinity"):
            out.append(float("inf"))
            continue
        x = _number(f"{path}[{i}]", x)
        if x < 1:
            raise ConfigError(f"{path}[{i}]", f"p must be at least 1, got {x}")
        out.append(x)
    if not out:
        raise ConfigError(path, "must not be empty")
    return tuple(out)


def _choice(path: str, v, options) -> str:
    if v not in options:
        raise ConfigError(path, f"expected one of {', '.join(options)}, got {v!r}")
    return v


def _string(path: str, v) -> str:
    if not isinstance(v, str) or not v:
        raise ConfigError(path, f"expected a non-empty string, got {v!r}")
    return v


def _boolean(path: str, v) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(path, f"expected true or false, got {v!r}")
    return v


_VALIDATORS = {
    "spec": _string,
    "potential": lambda p, v: _check_potential(p, v),
    "suite": lambda p, v: _choice(p, v, SUITES),
    "grid_L": lambda p, v: _number(p, v, positive=True),
    "grid_n": lambda p, v: _integer(p, v, 8),
    "k": lambda p, v: _numbers(p, v, positive=True),
    "s": _s_values,
    "k0": lambda p, v: _number(p, v, positive=True),
    "tol": lambda p, v: _number(p, v, positive=True),
    "out": _string,
    "seed": lambda p, v: _integer(p, v, 0),
    "dt": lambda p, v: _number(p, v, positive=True),
    "t_end": lambda p, v: _number(p, v, nonneg=True),
    "stride": lambda p, v: _integer(p, v, 1),
    "p": _p_values,
    "n_directions": lambda p, v: _integer(p, v, 1),
    "n_y": lambda p, v: _integer(p, v, 1),
    "n_k": lambda p, v: _integer(p, v, 4),
    "series": _boolean,
    "workers": lambda p, v: _integer(p, v, 1),
}
_KEYS = tuple(_VALIDATORS)


def _check_keys(path: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a table, got {type(data).__name__}")
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _check_field(path: str, v) -> dict:
    _check_keys(path, v, ("kind", "amplitude", "width", "center", "mollify", "csv", "label"))
    if "csv" in v:
        extra = set(v) - {"csv", "label"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "not allowed together with csv")
        _string(f"{path}.csv", v["csv"])
        return v
    for key in ("kind", "amplitude", "width"):
        if key not in v:
            raise ConfigError(f"{path}.{key}", "missing")
    _choice(f"{path}.kind", v["kind"], FIELD_KINDS)
    _complex(f"{path}.amplitude", v["amplitude"])
    _number(f"{path}.width", v["width"], positive=True)
    if "center" in v:
        _number(f"{path}.center", v["center"])
    if "mollify" in v:
        m = _numbers(f"{path}.mollify", v["mollify"], positive=True)
        if len(m) != 2 or not m[0] < m[1]:
            raise ConfigError(f"{path}.mollify", "expected [inner, outer] with inner < outer")
    return v


def _check_potential(path: str, v) -> dict:
    _check_keys(path, v, ("q", "r"))
    if "q" not in v:
        raise ConfigError(f"{path}.q", "missing")
    _check_field(f"{path}.q", v["q"])
    r = v.get("r", "conj")
    if r != "conj":
        _check_field(f"{path}.r", r)
    return v


# Loading ---------------------------------------------------------------------------

def read_config_file(path) -> dict:
    """Parse a .json or .toml file into a dict; parse errors become ConfigError."""
    path = str(path)
    try:
        if path.endswith(".toml"):
            with open(path, "rb") as fh:
                return tomllib.load(fh)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("config", f"{path} is not valid: {exc}") from None


def build_config(command: str, data: dict | None = None, overrides: dict | None = None,
                 base_dir: str = ".") -> RunConfig:
    """Validate file values, then flag overrides (flags win), into a RunConfig."""
    _choice("command", command, COMMANDS)
    values: dict[str, Any] = {}
    for source in (data or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
        _check_keys("", source, _KEYS)
        for key, v in source.items():
            values[key] = _VALIDATORS[key](key, v)
    sources = [key for key in ("spec", "potential", "suite") if key in values]
    if len(sources) > 1:
        raise ConfigError(sources[1], f"conflicts with {sources[0]}; give only one potential source")
    config = replace(RunConfig(command), **values, base_dir=base_dir)
    try:
        config.grid()
    except GridError as exc:
        raise ConfigError("grid_n" if "n_points" in str(exc) else "grid_L", str(exc)) from None
    return config


def load_config(command: str, path=None, overrides: dict | None = None) -> RunConfig:
    data = read_config_file(path) if path else {}
    base = os.path.dirname(os.path.abspath(path)) if path else "."
    return build_config(command, data, overrides, base)


# Potentials ------------------------------------------------------------------------

def _resolve(base: str, p: str) -> str:
    return p if os.path.isabs(p) else os.path.join(base, p)


def make_field(path: str, desc: dict, grid: GridSpec, base_dir: str, label: str) -> SampledField:
    """Sample a validated FIELD descriptor on ``grid``."""
    _check_field(path, desc)
    if "csv" in desc:
        try:
            f = read_field_csv(_resolve(base_dir, desc["csv"]), desc.get("label", label))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{path}.csv", str(exc)) from None
        if f.grid != grid:
            raise ConfigError(f"{path}.csv", f"grid (L={f.grid.half_width}, n={f.grid.n_points}) "
                                             f"differs from the run grid (L={grid.half_width}, n={grid.n_points})")
        return f
    center = float(desc.get("center", 0.0))
    f = standard_potential(desc["kind"], _complex(f"{path}.amplitude", desc["amplitude"]),
                           float(desc["width"]), center, grid, desc.get("label", label))
    if "mollify" in desc:
        inner, outer = (float(x) for x in desc["mollify"])
        f = mollify(f, inner, outer, center)
        f = f.with_values(f.values, desc.get("label", label))
    return f


def _check_polynomial(path: str, data, n_fields: int) -> None:
    if not isinstance(data, list):
        raise ConfigError(path, "expected a list of monomials")
    for m, mono in enumerate(data):
        mp = f"{path}[{m}]"
        _check_keys(mp, mono, ("exponents", "coeff"))
        for key in ("exponents", "coeff"):
            if key not in mono:
                raise ConfigError(f"{mp}.{key}", "missing")
        e = mono["exponents"]
        if (not isinstance(e, list) or len(e) != n_fields
                or any(isinstance(x, bool) or not isinstance(x, int) or x < 0 for x in e)):
            raise ConfigError(f"{mp}.exponents", f"expected {n_fields} nonnegative integers, got {e!r}")
        _complex(f"{mp}.coeff", mono["coeff"])


def _check_spec_document(doc, n_default_grid) -> None:
    _check_keys("spec", doc, ("schema", "omegas", "U0", "k", "kind", "field_names", "fields", "grid"))
    for key in ("omegas", "U0", "fields"):
        if key not in doc:
            raise ConfigError(f"spec.{key}", "missing")
    if "schema" in doc and doc["schema"] != "laxscatter/1":
        raise ConfigError("spec.schema", f"unsupported schema {doc['schema']!r}")
    om = doc["omegas"]
    if not isinstance(om, list) or len(om) < 2:
        raise ConfigError("spec.omegas", "expected a list of at least two complex numbers")
    for i, w in enumerate(om):
        _complex(f"spec.omegas[{i}]", w)
    fields = doc["fields"]
    if not isinstance(fields, list) or not fields:
        raise ConfigError("spec.fields", "expected a non-empty list of field descriptors")
    for i, f in enumerate(fields):
        _check_field(f"spec.fields[{i}]", f)
    U0 = doc["U0"]
    if not isinstance(U0, list) or len(U0) != len(om):
        raise ConfigError("spec.U0", f"expected {len(om)} rows to match omegas")
    for i, row in enumerate(U0):
        if not isinstance(row, list) or len(row) != len(om):
            raise ConfigError(f"spec.U0[{i}]", f"expected {len(om)} entries")
        for j, poly in enumerate(row):
            _check_polynomial(f"spec.U0[{i}][{j}]", poly, len(fields))
    if "k" in doc:
        _number("spec.k", doc["k"], positive=True)
    if "kind" in doc:
        _choice("spec.kind", doc["kind"], ("qdnls", "general"))
    if "grid" in doc:
        _check_keys("spec.grid", doc["grid"], ("L", "n"))
        _number("spec.grid.L", doc["grid"].get("L", n_default_grid[0]), positive=True)
        _integer("spec.grid.n", doc["grid"].get("n", n_default_grid[1]), 8)


def load_spec_file(path: str, config: RunConfig) -> tuple[LaxSpec, GridSpec]:
    """Read a spec document; the run grid wins over the file's grid only when given explicitly."""
    full = _resolve(config.base_dir, path)
    try:
        with open(full) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError("spec", f"cannot read {full}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("spec", f"{full} is not valid JSON: {exc}") from None
    _check_spec_document(doc, (config.grid_L, config.grid_n))
    g = doc.get("grid", {})
    try:
        grid = make_grid(float(g.get("L", config.grid_L)), int(g.get("n", config.grid_n)))
    except GridError as exc:
        raise ConfigError("spec.grid", str(exc)) from None
    base = os.path.dirname(os.path.abspath(full))
    names = doc.get("field_names") or [f"u{i + 1}" for i in range(len(doc["fields"]))]
    fields = [make_field(f"spec.fields[{i}]", f, grid, base, str(names[i]) if i < len(names) else f"u{i + 1}")
              for i, f in enumerate(doc["fields"])]
    data = dict(doc)
    data.setdefault("k", config.k[0])
    try:
        spec = spec_from_json(data, fields)
    except LaxSpecError as exc:
        raise ConfigError(f"spec ({exc.invariant})", str(exc)) from None
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError("spec", str(exc)) from None
    return spec, grid


@dataclass(frozen=True)
class Target:
    """Specs to run, one per potential, each still to be paired with every k."""

    specs: tuple
    name: str

    def at(self, ks) -> list[LaxSpec]:
        return [s.with_k(k) for s in self.specs for k in ks]

    @property
    def qdnls(self) -> bool:
        return all(s.kind == "qdnls" for s in self.specs)


def _label(spec: LaxSpec, i: int) -> LaxSpec:
    return spec if spec.label else LaxSpec(spec.J, spec.U0, spec.k, spec.fields, f"spec{i}", spec.kind,
                                           spec.field_names)


def resolve_target(config: RunConfig) -> Target:
    """The potentials named by the config; the first qdNLS suite pair by default."""
    grid = config.grid()
    k = config.k[0]
    if config.spec is not None:
        spec, _ = load_spec_file(config.spec, config)
        specs, name = [spec], os.path.basename(config.spec)
    elif config.potential is not None:
        pot = config.potential
        q = make_field("potential.q", pot["q"], grid, config.base_dir, "q")
        r_desc = pot.get("r", "conj")
        r = q.conj("r") if r_desc == "conj" else make_field("potential.r", r_desc, grid, config.base_dir, "r")
        specs, name = [build_qdnls_spec(q, r, k)], "potential"
    elif config.suite == "qdnls":
        specs, name = [build_qdnls_spec(q, r, k) for q, r in qdnls_pairs(grid)], "qdnls"
    elif config.suite == "general":
        specs, name = general_suite(grid, seed=config.seed, k=k), "general"
    elif config.suite == "small":
        specs, name = [build_qdnls_spec(q, q.conj(), k) for q in small_amplitude_suite(grid)], "small"
    elif config.suite == "zero":
        z = SampledField(grid, np.zeros(grid.n_points, complex), "zero")
        specs, name = [build_qdnls_spec(z, z, k)], "zero"
    else:
        q, r = qdnls_pairs(grid)[0]
        specs, name = [build_qdnls_spec(q, r, k)], "default"
    return Target(tuple(_label(s, i) for i, s in enumerate(specs)), name)


def evolution_datum(config: RunConfig) -> SampledField:
    """Initial datum for ``evolve``: the configured q, else the standard trajectory datum."""
    if config.potential is not None:
        return make_field("potential.q", config.potential["q"], config.grid(), config.base_dir, "q")
    if config.spec is not None or config.suite is not None:
        target = resolve_target(config)
        if not target.qdnls:
            raise ConfigError("spec" if config.spec else "suite", "evolution needs a qdNLS potential")
        return target.specs[0].fields[0]
    return trajectory_datum(config.grid())
