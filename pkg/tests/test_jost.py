import numpy as np
import pytest

from laxscatter import _kernels
from laxscatter.field import make_grid, standard_potential
from laxscatter.jost import (JostError, SmallnessError, contraction_factor, jost_asymptotics_check,
                             solve_jost_march, solve_jost_set, solve_left_jost_volterra, write_jost_csv)
from laxscatter.lax import build_qdnls_spec, random_general_spec


def _bump_spec(grid, k, a=0.1):
    q = standard_potential("bump", a, 2.0, 0.0, grid)
    return build_qdnls_spec(q, q, k)


def test_zero_potential(zero_spec):
    vol = solve_left_jost_volterra(zero_spec)
    assert vol.iterations == 1
    assert np.array_equal(vol.values, np.tile([1, 0, 0], (zero_spec.grid.n_points, 1)))
    for j, side in enumerate(["left", "right", "right"]):
        sol = solve_jost_march(zero_spec, side, j)
        assert np.array_equal(sol.values[:, j], np.ones(zero_spec.grid.n_points))
        assert jost_asymptotics_check(sol)["edge_deviation"] == 0.0
    jost = solve_jost_set(zero_spec)
    assert np.array_equal(jost.matrix(100), np.eye(3))


def test_frozen_ode_oracle(frozen, grid):
    # T^{-1} against an adaptive DOP853 integration of the analytic bump
    for e in frozen["jost"]:
        q = standard_potential("bump", complex(*e["q"][:2]), e["q"][2], e["q"][3], grid)
        r = standard_potential("bump", complex(*e["r"][:2]), e["r"][2], e["r"][3], grid)
        sol = solve_jost_march(build_qdnls_spec(q, r, e["k"]), "left", 0)
        assert abs(sol.values[-1, 0] - complex(*e["T_inv"])) < 1e-8


@pytest.mark.parametrize("k", [2.0, 4.0, 8.0, 16.0])
def test_volterra_matches_march(grid, k):
    spec = _bump_spec(grid, k)
    vol = solve_left_jost_volterra(spec)
    march = solve_jost_march(spec, "left", 0)
    assert np.max(np.abs(vol.values - march.values)) < 1e-8


def test_contraction_scales_like_inverse_sqrt_k(grid):
    ks = np.array([2.0, 4.0, 8.0, 16.0])
    rates = np.array([solve_left_jost_volterra(_bump_spec(grid, k)).contraction_factor for k in ks])
    assert np.all(np.diff(rates) < 0)
    # doubling k cuts the rate by at least sqrt(2) * (1 - 0.1)
    assert np.all(rates[:-1] / rates[1:] >= np.sqrt(2) * 0.9)
    scaled = rates * np.sqrt(ks)
    assert scaled.max() / scaled.min() < 3


def test_exterior_plateau_equals_first_component(bump_spec):
    sol = solve_jost_march(bump_spec, "left", 0)
    a, b = sol.support_window
    tail = sol.values[b:, 0]
    assert np.max(np.abs(tail - tail[-1])) < 1e-14


def test_march_is_fourth_order():
    errs = []
    vals = {}
    for n in (256, 512, 1024, 4096):
        g = make_grid(20.0, n)
        spec = build_qdnls_spec(standard_potential("bump", 0.3, 2.0, 0.0, g),
                                standard_potential("bump", 0.3j, 2.0, 0.2, g), 4.0)
        vals[n] = solve_jost_march(spec, "left", 0).values[-1, 0]
    errs = [abs(vals[n] - vals[4096]) for n in (256, 512, 1024)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(10 < r < 20 for r in ratios)


def test_asymptotics_and_neumann_bound(bump_spec):
    spec = _bump_spec(bump_spec.grid, 2.0)
    vol = solve_left_jost_volterra(spec)
    diag = jost_asymptotics_check(vol)
    assert diag["edge_deviation"] < 1e-10
    assert diag["sup_norm"] <= diag["neumann_bound"]
    assert jost_asymptotics_check(solve_jost_march(spec, "left", 0))["edge_deviation"] < 1e-10


def test_smallness_error_names_required_k(grid):
    spec = _bump_spec(grid, 2.0, a=2.0)
    with pytest.raises(SmallnessError) as err:
        solve_left_jost_volterra(spec)
    assert "need k >=" in str(err.value)


def test_noncompact_support_rejected(grid):
    q = standard_potential("sech", 0.1, 1.0, 0.0, grid)
    with pytest.raises(JostError):
        solve_jost_march(build_qdnls_spec(q, q, 2.0), "left", 0)


def test_bad_side_and_index(bump_spec):
    with pytest.raises(ValueError):
        solve_jost_march(bump_spec, "up", 0)
    with pytest.raises(IndexError):
        solve_jost_march(bump_spec, "left", 3)


def test_general_spec_ordering(grid):
    spec = random_general_spec(np.random.default_rng(2), 4, grid, 3.0)
    jost = solve_jost_set(spec)
    assert [s.side for s in jost.solutions] == ["left", "left", "right", "right"]
    assert jost.n_left == 2 and jost.n_right == 2


def test_contraction_factor_of_geometric_increments():
    assert contraction_factor([1.0, 0.5, 0.25, 0.125]) == pytest.approx(0.5)
    assert contraction_factor([]) == 0.0


@pytest.mark.skipif("cython" not in _kernels.KERNELS, reason="compiled kernel not built")
def test_backends_agree(bump_spec):
    a, b = 400, 624
    U = np.ascontiguousarray(bump_spec.u0_values[a:b + 1])
    rng = np.random.default_rng(0)
    Um = U[:-1] + 1e-3 * rng.normal(size=U[:-1].shape)
    d = bump_spec.k * (bump_spec.J.array - 1.0)
    p0 = np.array([1, 0, 0], dtype=complex)
    py = _kernels.march(U, Um, d, bump_spec.grid.dx, p0, backend="python")
    cy = _kernels.march(U, Um, d, bump_spec.grid.dx, p0, backend="cython")
    assert np.max(np.abs(py - cy)) < 1e-14


def test_etd_coefficients_reduce_to_rk4_weights():
    E, E2, Q, f1, f2, f3 = _kernels.etd_coefficients(np.array([0.0]), 1.0)
    assert E[0] == 1 and E2[0] == 1
    assert Q[0] == pytest.approx(0.5, abs=1e-15)
    for f in (f1, f2, f3):
        assert f[0] == pytest.approx(1 / 6, abs=1e-15)


def test_jost_csv(tmp_path, bump_spec):
    sol = solve_jost_march(bump_spec, "left", 0)
    write_jost_csv(tmp_path / "j.csv", sol)
    data = np.loadtxt(tmp_path / "j.csv", delimiter=",", skiprows=1)
    assert data.shape == (bump_spec.grid.n_points, 7)
    assert np.array_equal(data[:, 1] + 1j * data[:, 2], sol.values[:, 0])
