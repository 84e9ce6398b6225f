import numpy as np
import pytest
from hypothesis import given, strategies as st

from laxscatter.field import SampledField, standard_potential
from laxscatter.lax import (OMEGA, DiagonalGenerator, LaxSpecError, Polynomial, PotentialMatrix,
                            build_general_spec, build_qdnls_spec, evaluate_U0, nabla_U0,
                            random_general_spec, spec_from_json)


def _const(grid, value):
    return SampledField(grid, np.full(grid.n_points, value))


def _akns(grid, J):
    q = Polynomial.variable(0, 2)
    r = Polynomial.variable(1, 2)
    o = Polynomial.zero(2)
    U0 = PotentialMatrix([[o, q], [r, o]], 2)
    u = [standard_potential("bump", 0.2, 1.0, 0.0, grid)] * 2
    return build_general_spec(J, U0, u, 1.0)


def test_zero_potential_leaves_kJ(zero_pair):
    spec = build_qdnls_spec(*zero_pair, 1.0)
    assert not np.any(evaluate_U0(spec))
    assert np.allclose(spec.z, [1.0, OMEGA**2, OMEGA])


def test_qdnls_generator_ordering(bump_spec):
    w = bump_spec.J.array
    assert bump_spec.split_index == 1
    assert w[1].real == pytest.approx(-0.5) and w[2].real == pytest.approx(-0.5)
    assert abs(w.sum()) < 1e-15


def test_akns_spec_is_valid(small_grid):
    spec = _akns(small_grid, (1.0, -1.0))
    assert spec.n == 2 and spec.split_index == 1


@pytest.mark.parametrize("J, invariant", [((1j, -1j), "Re(ω_j) = 0"),
                                          ((1.0, 1.0, -2.0), "eigenvalues not distinct"),
                                          ((1.0, 1.0), "trace-free"),
                                          ((-1.0, 1.0), "ordering")])
def test_invalid_generators(small_grid, J, invariant):
    with pytest.raises(LaxSpecError) as err:
        _akns(small_grid, J) if len(J) == 2 else DiagonalGenerator(J).validate()
    assert err.value.invariant == invariant


def test_potential_matrix_rejections():
    x = Polynomial.variable(0, 1)
    o = Polynomial.zero(1)
    with pytest.raises(LaxSpecError, match="off-diagonal"):
        PotentialMatrix([[x, x], [x, o]], 1).validate()
    with pytest.raises(LaxSpecError, match="no constant terms"):
        PotentialMatrix([[o, Polynomial({(0,): 1.0}, 1)], [x, o]], 1).validate()


def test_nonpositive_k(bump_pair):
    with pytest.raises(LaxSpecError, match="k > 0"):
        build_qdnls_spec(*bump_pair, 0.0)


def test_evaluate_qdnls_substitution(small_grid):
    spec = build_qdnls_spec(_const(small_grid, 2.0), _const(small_grid, 3j), 1.0)
    expected = np.array([[0, 2, 3j], [3j, 0, 2], [2, 3j, 0]])
    assert np.array_equal(evaluate_U0(spec, 5), expected)


def test_quadratic_entry_and_derivative(small_grid):
    sq = Polynomial({(2,): 1.0}, 1)
    o = Polynomial.zero(1)
    spec = build_general_spec((1.0, -1.0), PotentialMatrix([[o, sq], [o, o]], 1), [_const(small_grid, 2.0)], 1.0)
    assert evaluate_U0(spec, 0)[0, 1] == 4
    assert nabla_U0(spec, 0, 0)[0, 1] == 4


def test_nabla_qdnls_is_constant(bump_spec):
    P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    d = nabla_U0(bump_spec, 0)
    assert np.all(d == P)
    with pytest.raises(IndexError):
        nabla_U0(bump_spec, 2)


def test_trace_of_U_vanishes(grid):
    rng = np.random.default_rng(1)
    for n in (2, 3, 4, 5):
        spec = random_general_spec(rng, n, grid, 2.5)
        U = spec.k * np.diag(spec.J.array)[None] + evaluate_U0(spec)
        assert np.max(np.abs(np.trace(U, axis1=1, axis2=2))) < 1e-13


@given(st.integers(0, 2**32 - 1))
def test_nabla_matches_finite_differences(seed):
    # centred differences of a polynomial matrix: error ratio ~ 4 when eps halves
    from laxscatter.field import make_grid
    g = make_grid(4.0, 16)
    rng = np.random.default_rng(seed)
    spec = random_general_spec(rng, 3, g, 1.0, amplitude=1.0)
    v = rng.normal(size=g.n_points) + 1j * rng.normal(size=g.n_points)
    for i in range(2):
        exact = v[:, None, None] * nabla_U0(spec, i)

        def fd(eps):
            up = [f.with_values(f.values + (eps * v if j == i else 0)) for j, f in enumerate(spec.fields)]
            dn = [f.with_values(f.values - (eps * v if j == i else 0)) for j, f in enumerate(spec.fields)]
            return (evaluate_U0(spec.with_fields(up)) - evaluate_U0(spec.with_fields(dn))) / (2 * eps)

        e1 = np.max(np.abs(fd(1e-4) - exact))
        e2 = np.max(np.abs(fd(1e-5) - exact))
        # quadratic entries are differenced exactly up to round-off
        assert e2 < 1e-8 and (e1 < 1e-9 or e2 < e1)


def test_polynomial_json_round_trip(grid):
    spec = random_general_spec(np.random.default_rng(4), 4, grid, 3.0)
    back = spec_from_json(spec.to_json(), spec.fields)
    # monomials come back sorted, so only the summation order changes
    assert np.max(np.abs(evaluate_U0(back) - evaluate_U0(spec))) < 1e-16
    assert np.array_equal(back.J.array, spec.J.array)


def test_random_spec_is_seeded(grid):
    a = random_general_spec(np.random.default_rng(9), 4, grid, 3.0)
    b = random_general_spec(np.random.default_rng(9), 4, grid, 3.0)
    assert np.array_equal(evaluate_U0(a), evaluate_U0(b))
    assert a.split_index == 2
