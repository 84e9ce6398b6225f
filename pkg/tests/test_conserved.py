import numpy as np
import pytest
from hypothesis import given, strategies as st

from laxscatter.conserved import (apriori_experiment, check_smallness, coercivity_integral, coercivity_ratio,
                                  energy_density_samples, energy_Es, k_nodes, microlocal_norm,
                                  middle_integral, quadratic_density, quadratic_energy)
from laxscatter.evolve import TrajectoryRecord
from laxscatter.field import standard_potential
from laxscatter.fredholm import trace2_conjugate_form
from laxscatter.jost import SmallnessError
from laxscatter.norms import sobolev_norm


@pytest.fixture(scope="module")
def small_q(grid):
    return standard_potential("gaussian", 0.08, 1.0, 0.0, grid)


@pytest.fixture(scope="module")
def small_samples(small_q):
    return energy_density_samples(small_q, 1.0, 64.0, 16)


def test_middle_integral_closed_form():
    assert abs(middle_integral(0.0, -0.25, 1.0)[0] - 2.0) < 1e-8


def test_coercivity_integral_against_quadrature(frozen):
    for e in frozen["coercivity_integral"]:
        val = coercivity_integral(e["xi"], e["s"], e["k0"])[0]
        assert val == pytest.approx(e["value"], rel=1e-10)


def test_coercivity_integral_sign_flip():
    xi = np.array([-4.0, 0.5, 7.0])
    assert np.allclose(coercivity_integral(xi, -0.3, 1.0, sign=-1.0), coercivity_integral(-xi, -0.3, 1.0),
                       rtol=1e-13)


@given(st.floats(-0.45, -0.1), st.floats(0.5, 3.0))
def test_coercivity_ratio_bounded(s, k0):
    ratio = coercivity_ratio(s, k0, np.linspace(-200, 200, 41))
    assert np.all((ratio >= 0.1) & (ratio <= 10))


@given(st.floats(-0.49, -0.01), st.floats(0.5, 3.0))
def test_coercivity_ratio_at_zero_frequency(s, k0):
    # int_{k0}^inf k^(2s-1) dk = k0^(2s) / (-2s), so the constant degenerates as s -> 0
    assert coercivity_ratio(s, k0, 0.0)[0] == pytest.approx(-0.5 / s, rel=1e-10)


def test_coercivity_domain():
    with pytest.raises(ValueError):
        coercivity_integral(0.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        coercivity_ratio(-0.6, 1.0, 0.0)
    with pytest.raises(ValueError):
        coercivity_integral(0.0, -0.2, 0.0)


def test_microlocal_norm_reduces_to_sobolev(small_q):
    # (xi^2 + 3k^2)^s with 3k^2 = 1
    for s in (-0.4, -0.1, 0.5):
        assert microlocal_norm(small_q, s, 3**-0.5) == pytest.approx(sobolev_norm(small_q, s), rel=1e-13)


def test_quadratic_density_is_half_trace(small_q):
    for k in (1.0, 4.0):
        assert quadratic_density(small_q, k) == pytest.approx(-trace2_conjugate_form(small_q, k) / 2, rel=1e-13)


def test_quadratic_energy_against_quadrature(frozen, grid):
    for e in frozen["quadratic_energy"]:
        q = standard_potential("gaussian", e["a"], 1.0, 0.0, grid)
        assert quadratic_energy(q, e["s"], e["k0"]) == pytest.approx(e["value"], rel=1e-10)


def test_quadratic_energy_scales_quadratically(small_q):
    a = quadratic_energy(small_q, -0.25, 1.0)
    b = quadratic_energy(small_q.with_values(2 * small_q.values), -0.25, 1.0)
    assert b == pytest.approx(4 * a, rel=1e-13)


def test_energy_close_to_quadratic_part(small_q, small_samples):
    for s in (-0.1, -0.25, -0.4):
        r = energy_Es(small_q, s, samples=small_samples)
        assert abs(r.Es - r.Es2) < 0.5 * r.Es2
        assert 0.1 <= r.coercivity <= 10
        assert r.error_budget < 1e-3 * r.Es
        assert set(r.to_json()) >= {"Es", "Es2", "coercivity", "tail_fraction"}


def test_energy_cubic_is_leading_correction(small_q, small_samples):
    r = energy_Es(small_q, -0.25, samples=small_samples)
    c = r.contributions
    assert abs(c[3]) > abs(c[4]) > abs(c[5])


def test_energy_of_zero(grid):
    z = standard_potential("gaussian", 0.0, 1.0, 0.0, grid)
    assert energy_Es(z, -0.25).Es == 0


def test_smallness_enforced(grid):
    big = standard_potential("gaussian", 2.0, 1.0, 0.0, grid)
    with pytest.raises(SmallnessError, match="need k0 >"):
        check_smallness(big, -0.25, 1.0)
    with pytest.raises(SmallnessError):
        energy_Es(big, -0.25)


def test_k_nodes_cover_range():
    ks, ws = k_nodes(1.0, 64.0, 16)
    assert np.all((ks > 1) & (ks < 64))
    # dk/k is du in log k, integrated exactly
    assert np.sum(ws / ks) == pytest.approx(np.log(64.0), rel=1e-13)
    with pytest.raises(ValueError):
        k_nodes(2.0, 1.0, 8)


def test_apriori_on_static_trajectory(small_q, small_samples):
    rec = TrajectoryRecord([0.0, 1.0], [small_q, small_q], [1.0, 1.0], [0.5, 0.5])
    (rep,) = apriori_experiment(rec, [-0.25], n_k=16)
    assert rep.energy_drift == 0 and rep.norm_ratio == 1
    assert rep.within_budget
