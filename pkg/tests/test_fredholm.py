import numpy as np
import pytest
from hypothesis import given, strategies as st

from laxscatter.field import standard_potential, transform
from laxscatter.fredholm import (FredholmError, assemble_lambda, cycle_expansion_trace, det2_matrix,
                                 det2_of_matrix, exact_low_order_correction, hs_formula, hs_norm,
                                 lambda_hs_norm, logdet2_matrix, logdet2_series, resolvent_kernel,
                                 resolvent_matrix, trace2_closed_form, trace2_conjugate_form,
                                 trace34_closed_form, trace_power, verify_equality)
from laxscatter.lax import OMEGA, build_qdnls_spec, qdnls_generator, random_general_spec
from laxscatter.scattering import transmission


def _gauss(grid, a, c=0.0):
    return standard_potential("gaussian", a, 1.0, c, grid)


def test_upper_resolvent_kernel():
    x = np.linspace(-1, 1, 5)
    K = resolvent_matrix(2.0, x, diagonal="zero")
    D = x[:, None] - x[None, :]
    assert np.allclose(K, np.where(D < 0, -np.exp(2.0 * D), 0.0))
    assert np.all(np.diag(resolvent_matrix(2.0, x)) == -0.5)


def test_lower_resolvent_support():
    x = np.linspace(-1, 1, 7)
    K = resolvent_matrix(2.0 * OMEGA**2, x, diagonal="zero")
    assert np.all(K[np.triu_indices(7)] == 0)
    assert np.all(K[np.tril_indices(7, -1)] != 0)
    assert np.all(np.diag(resolvent_matrix(2.0 * OMEGA, x)) == 0.5)


def test_imaginary_pole_rejected(small_grid):
    with pytest.raises(ValueError):
        resolvent_kernel(2j, small_grid)


@pytest.mark.parametrize("z", [1.0, -1.0 + 0.5j, 2.0 * OMEGA])
@pytest.mark.parametrize("m", [-3, 0, 5])
def test_resolvent_symbol_on_grid_modes(grid, z, m):
    # extrapolated quadrature of (d - z)^{-1} e^{i xi x} against e^{i xi x} / (i xi - z); the truncated
    # integral adds a boundary term of size exp(-|Re z| distance), so compare well inside
    xi = m * grid.dxi
    f = np.exp(1j * xi * grid.x)
    fine = resolvent_kernel(z, grid).apply(f)
    nodes = np.arange(0, grid.n_points, 2)
    coarse = resolvent_kernel(z, grid, nodes).apply(f[nodes]) * 2
    extrap = (4 * fine[nodes] - coarse) / 3
    inner = np.abs(grid.x[nodes]) < grid.half_width - 16 / abs(complex(z).real)
    expected = f[nodes] / (1j * xi - z)
    assert np.max(np.abs(extrap - expected)[inner]) < 1e-6


def test_zero_potential_kernel(zero_spec):
    K = assemble_lambda(zero_spec)
    assert K.matrix.size == 0
    assert trace_power(K, 2) == 0
    assert logdet2_series(K).value == 0
    assert det2_matrix(K) == 1
    F = assemble_lambda(zero_spec, representation="fourier")
    assert not np.any(F.matrix)


def test_symmetrized_trace_matches_unsymmetrized(grid):
    spec = build_qdnls_spec(_gauss(grid, 0.3), _gauss(grid, 0.2j, 0.3), 2.0)
    t_sym = trace_power(assemble_lambda(spec, symmetrized=True), 2)
    t_un = trace_power(assemble_lambda(spec, representation="fourier"), 2)
    assert abs(t_sym - t_un) < 1e-9


def test_hs_formula_against_double_integral(frozen, grid):
    for e in frozen["hs_square"]:
        z = e["k"] * qdnls_generator().array
        F = transform(_gauss(grid, e["a"])).coefficients
        val = hs_formula(F, grid, z[e["i"]], z[e["j"]])
        assert val == pytest.approx(e["value"], rel=1e-10)


def test_hs_norm_two_sided(grid):
    q = _gauss(grid, 0.3)
    res = hs_norm(q, 0, 1, 2.0)
    assert 0.5 <= res.ratio <= 2
    assert hs_norm(q.with_values(np.zeros(grid.n_points)), 0, 1, 2.0).formula == 0
    with pytest.raises(ValueError):
        hs_norm(q, 1, 1, 2.0)


def test_hs_norm_decays_in_k(grid):
    ks = np.array([2.0, 4.0, 8.0, 16.0])
    vals = np.array([hs_norm(_gauss(grid, 0.3), 0, 1, k).formula for k in ks])
    assert np.all(np.diff(vals) < 0)
    # ||.||_2^2 ~ k^(-1-2s) with s = 0 for L2 data at large k
    slope = np.polyfit(np.log(ks[1:]), np.log(vals[1:] ** 2), 1)[0]
    assert -1.3 < slope < -0.7


def test_lambda_norm_nonincreasing_in_k(grid):
    from laxscatter.suites import qdnls_pairs
    for q, r in qdnls_pairs(grid)[:4]:
        norms = [lambda_hs_norm(build_qdnls_spec(q, r, k)) for k in (2.0, 4.0, 8.0, 16.0)]
        assert np.all(np.diff(norms) <= 0)


def test_trace2_against_real_space_oracle(frozen, grid):
    for e in frozen["trace2"]:
        q = _gauss(grid, complex(*e["a"]))
        r = _gauss(grid, complex(*e["b"]), e["c"])
        ref = complex(*e["value"])
        assert abs(trace2_closed_form(q, r, e["k"]) - ref) < 1e-12
        nys = trace_power(assemble_lambda(build_qdnls_spec(q, r, e["k"])), 2)
        assert abs(nys - ref) <= 1e-6 * (1 + abs(ref))


def test_trace2_conjugate_is_real_negative_and_comparable(grid):
    q = _gauss(grid, 0.2 + 0.1j, 0.4)
    k = 3.0
    t = trace2_conjugate_form(q, k)
    assert t < 0
    assert abs(trace2_closed_form(q, q.conj(), k) - t) < 1e-14
    F = transform(q)
    simple = -np.sum(k * np.abs(F.coefficients) ** 2 / (F.xi**2 + 3 * k * k)) * grid.dxi
    # symbol ratio (xi^2 + 3k^2) / (xi^2 + 3k^2 - sqrt(3) k xi) lies in [2/3, 2]; prefactor 6
    assert 4 <= t / simple <= 12


def test_zero_closed_forms(zero_pair):
    assert trace2_closed_form(*zero_pair, 2.0) == 0
    assert trace34_closed_form(*zero_pair, 2.0) == (0j, 0j)


def test_decoupled_cubic_and_quartic(grid):
    q = _gauss(grid, 0.3)
    zero = q.with_values(np.zeros(grid.n_points))
    t3, t4 = trace34_closed_form(q, zero, 2.0)
    assert t4 == 0
    K = assemble_lambda(build_qdnls_spec(q, zero, 2.0))
    assert abs(trace_power(K, 3) - t3) <= 1e-6 * (1 + abs(t3))
    assert abs(trace_power(K, 4)) < 1e-10


def test_cubic_quartic_against_nystrom(grid):
    q, r = _gauss(grid, 0.3), _gauss(grid, 0.2j, 0.3)
    K = assemble_lambda(build_qdnls_spec(q, r, 2.0))
    t3, t4 = trace34_closed_form(q, r, 2.0)
    assert abs(trace_power(K, 3) - t3) <= 1e-6 * (1 + abs(t3))
    assert abs(trace_power(K, 4) - t4) <= 1e-6 * (1 + abs(t4))
    spec = build_qdnls_spec(q, r, 2.0)
    assert abs(cycle_expansion_trace(spec, 3) - t3) < 1e-10
    assert abs(cycle_expansion_trace(spec, 4) - t4) < 1e-10


def test_quartic_band_cut_is_negligible(grid):
    from laxscatter.suites import qdnls_pairs
    q, r = qdnls_pairs(grid)[5]
    a = trace34_closed_form(q, r, 4.0, band_tol=1e-8)
    b = trace34_closed_form(q, r, 4.0, band_tol=1e-9)
    assert abs(a[0] - b[0]) < 1e-12 and abs(a[1] - b[1]) < 1e-12


def test_schatten_holder(bump_spec):
    K = assemble_lambda(bump_spec)
    norm = K.frobenius_norm
    for l in range(2, 9):
        assert abs(trace_power(K, l, extrapolate=False)) ** (1 / l) <= norm * (1 + 1e-12)


def test_trace_power_needs_order_two(bump_spec):
    with pytest.raises(ValueError):
        trace_power(assemble_lambda(bump_spec), 1)


def test_series_tail_bound_is_honoured(bump_spec):
    K = assemble_lambda(bump_spec)
    ser = logdet2_series(K, 1e-10)
    longer = logdet2_series(K, 0.0, l_max=ser.n_terms + 5)
    assert abs(longer.value - ser.value) < 1e-10
    assert abs(ser.value - logdet2_matrix(K)) < 1e-8


def test_det2_scalar_identities():
    assert det2_of_matrix(np.zeros((4, 4))) == 1
    for a in (0.3, -0.2 + 0.1j):
        A = np.zeros((3, 3), dtype=complex)
        A[0, 0] = a
        assert det2_of_matrix(A) == pytest.approx((1 + a) * np.exp(-a), rel=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_det2_factorises_over_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    A = 0.1 * (rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    lam = np.linalg.eigvals(A)
    assert det2_of_matrix(A) == pytest.approx(np.prod((1 + lam) * np.exp(-lam)), rel=1e-12)


def test_large_matrix_refused():
    with pytest.raises(FredholmError):
        det2_of_matrix(100 * np.ones((4, 4)))


def test_log_det_equals_log_det2_structurally(bump_spec):
    K = assemble_lambda(bump_spec)
    A = K.matrix
    assert np.trace(A) == 0
    sign, logabs = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    ld = logabs + 1j * np.angle(sign)
    assert abs(ld - logdet2_matrix(K, extrapolate=False) - 0.5 * K.trace2_correction) < 1e-10


def test_equality_zero_potential(zero_spec):
    rep = verify_equality(zero_spec)
    assert rep.T_inv == 1 and rep.log_det2_matrix == 0
    assert rep.max_deviation == 0


def test_equality_bump_k3(bump_spec):
    rep = verify_equality(bump_spec)
    assert rep.deviation < 1e-6
    assert rep.deviations["series_vs_matrix"] < 1e-8
    assert abs(rep.log_det2_exact_low - rep.log_T_inv) == rep.deviation


@pytest.mark.parametrize("n", [2, 4])
def test_equality_random_general(grid, n):
    spec = random_general_spec(np.random.default_rng(11 + n), n, grid, 3.0)
    assert verify_equality(spec, series=False).deviation < 1e-6


def test_equality_refuses_large_norm(grid):
    q = standard_potential("bump", 3.0, 2.0, 0.0, grid)
    with pytest.raises(FredholmError):
        verify_equality(build_qdnls_spec(q, q, 2.0))


def test_exact_low_order_correction_is_small(bump_spec):
    K = assemble_lambda(bump_spec)
    corr = exact_low_order_correction(bump_spec, K)
    assert abs(corr) < 1e-6
    assert abs(logdet2_matrix(K) + corr - np.log(transmission(bump_spec).T_inv)) < 1e-8
