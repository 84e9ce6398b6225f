import numpy as np
import pytest

from laxscatter.jost import solve_jost_set
from laxscatter.lax import random_general_spec
from laxscatter.scattering import (conservation_probe, derivative_identity_residual, log_transmission_sweep,
                                   transmission, transmission_limit, transmission_wronskian,
                                   wronskian_derivative_identity_check)


def test_zero_potential_gives_one(zero_spec):
    jost = solve_jost_set(zero_spec)
    assert transmission_wronskian(jost).T_inv == 1
    assert transmission_limit(jost.solutions[0], zero_spec).T_inv == 1


def test_wronskian_is_x_independent(bump_spec):
    res = transmission_wronskian(solve_jost_set(bump_spec))
    assert len(res.diagnostics["sample_nodes"]) == 8
    assert res.x_independence_span < 1e-9 * abs(res.T_inv)


def test_limit_plateau_and_cross_method(bump_spec):
    jost = solve_jost_set(bump_spec)
    lim = transmission_limit(jost.solutions[0], bump_spec)
    assert lim.x_independence_span < 1e-10
    assert abs(lim.T_inv - transmission_wronskian(jost).T_inv) < 1e-9 * abs(lim.T_inv)


def test_general_spec_wronskian(grid):
    spec = random_general_spec(np.random.default_rng(5), 4, grid, 3.0)
    res = transmission(spec)
    assert res.x_independence_span < 1e-8 * abs(res.T_inv)


def test_derivative_identity():
    rng = np.random.default_rng(0)
    V = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert derivative_identity_residual(np.eye(3), V) < 1e-13
    assert abs(derivative_identity_residual(np.eye(3), V)) < 1e-13 * abs(3 * np.linalg.det(V))


def test_identity_check_on_run(bump_spec):
    out = wronskian_derivative_identity_check(solve_jost_set(bump_spec), bump_spec)
    assert out["algebraic_residual"] < 1e-13
    assert out["max_relative_dWdx"] < 1e-8


def test_zero_trajectory_probe(zero_pair):
    probe = conservation_probe([zero_pair[0]] * 3, 2.0)
    assert np.all(probe["T_inv"] == 1)
    assert probe["max_relative_drift"] == 0


def test_log_branch_tracking():
    ks = [1.0, 2.0, 3.0]
    T = np.exp(1j * np.array([3.0, 3.2, 3.3]))
    logs = log_transmission_sweep(ks, T)
    # principal value at the largest k, then continuous across the branch cut
    assert np.allclose(logs.imag, np.array([3.0, 3.2, 3.3]) - 2 * np.pi)
    with pytest.raises(ValueError):
        log_transmission_sweep([1.0], [0.0])


def test_log_undefined_for_vanishing_T(bump_spec):
    from laxscatter.scattering import TransmissionResult
    with pytest.raises(ValueError):
        TransmissionResult(1.0, 0j, "wronskian").log_T_inv()


def test_unknown_method(bump_spec):
    with pytest.raises(ValueError):
        transmission(bump_spec, "magic")
