import json

import numpy as np
import pytest

from laxscatter.config import (COMMANDS, DEFAULT_TOL, ConfigError, build_config, evolution_datum,
                               load_config, resolve_target)
from laxscatter.field import write_field_csv
from laxscatter.report import dumps, format_float


def test_defaults():
    cfg = build_config("jost")
    assert cfg.tolerance == DEFAULT_TOL["jost"]
    assert cfg.grid().n_points == 1024
    assert set(DEFAULT_TOL) == set(COMMANDS)


def test_flags_override_file(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text('k = [2.0, 4.0]\ntol = 1e-3\n[potential.q]\nkind = "gaussian"\namplitude = [0.1, 0.0]\nwidth = 1.0\n')
    cfg = load_config("det2", str(p), {"tol": 1e-4, "k": None})
    assert cfg.k == (2.0, 4.0) and cfg.tol == 1e-4
    assert cfg.potential["q"]["kind"] == "gaussian"


@pytest.mark.parametrize("data, field", [
    ({"k": [2.0, -1.0]}, "k[1]"),
    ({"s": [-0.7]}, "s[0]"),
    ({"grid_n": 1000}, "grid_n"),
    ({"bogus": 1}, "bogus"),
    ({"potential": {"q": {"kind": "box", "amplitude": 1, "width": 1}}}, "potential.q.kind"),
    ({"potential": {"q": {"kind": "gaussian", "amplitude": [1, 2, 3], "width": 1}}}, "potential.q.amplitude"),
    ({"suite": "qdnls", "potential": {"q": {"csv": "a.csv"}}}, "suite"),
    ({"p": [0.5]}, "p[0]"),
    ({"series": "yes"}, "series"),
])
def test_invalid_fields_named(data, field):
    with pytest.raises(ConfigError) as exc:
        build_config("energy", data)
    assert exc.value.field == field


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("jost", str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="not valid"):
        load_config("jost", str(bad))


def test_conj_default_and_csv_field(tmp_path, small_grid):
    from laxscatter.field import standard_potential
    q = standard_potential("gaussian", 0.1 + 0.1j, 1.0, 0.0, small_grid)
    write_field_csv(tmp_path / "q.csv", q)
    (tmp_path / "run.json").write_text(json.dumps(
        {"grid_n": 256, "potential": {"q": {"csv": "q.csv"}}}))
    cfg = load_config("transmission", str(tmp_path / "run.json"))
    spec = resolve_target(cfg).specs[0]
    assert np.array_equal(spec.fields[1].values, np.conj(q.values))
    assert np.array_equal(evolution_datum(cfg).values, q.values)


def test_csv_grid_mismatch(tmp_path, small_grid):
    from laxscatter.field import standard_potential
    write_field_csv(tmp_path / "q.csv", standard_potential("gaussian", 0.1, 1.0, 0.0, small_grid))
    (tmp_path / "run.json").write_text(json.dumps({"potential": {"q": {"csv": "q.csv"}}}))
    with pytest.raises(ConfigError, match="differs from the run grid"):
        resolve_target(load_config("jost", str(tmp_path / "run.json")))


def test_spec_document_errors_named(tmp_path):
    doc = {"omegas": [1, -1], "U0": [[[], [{"exponents": [1, 0], "coeff": 1}]], [[], []]],
           "fields": [{"kind": "gaussian", "amplitude": 0.1, "width": 1}]}
    (tmp_path / "s.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError) as exc:
        resolve_target(build_config("jost", {"spec": str(tmp_path / "s.json")}))
    assert exc.value.field == "spec.U0[0][1][0].exponents"


def test_suites_resolve(small_grid):
    sizes = {name: len(resolve_target(build_config("jost", {"suite": name, "grid_n": 256})).specs)
             for name in ("qdnls", "general", "small", "zero")}
    assert sizes == {"qdnls": 10, "general": 6, "small": 4, "zero": 1}


def test_config_json_omits_out():
    a = build_config("jost", {"out": "a"}).to_json()
    assert "out" not in a and a == build_config("jost", {"out": "b"}).to_json()


def test_report_float_format():
    assert format_float(0.1) == "0.10000000000000001"
    assert format_float(3.0) == "3.0"
    assert format_float(float("nan")) == '"nan"'
    assert json.loads(dumps({"b": 1j, "a": np.float64(2.5)})) == {"a": 2.5, "b": {"im": 1.0, "re": 0.0}}
    assert dumps({"b": 1, "a": 2}).index('"a"') < dumps({"b": 1, "a": 2}).index('"b"')
