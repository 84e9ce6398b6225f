import numpy as np
import pytest
from hypothesis import given, strategies as st

from laxscatter.field import (GridError, SampledField, fourier_midpoints, inverse_transform, make_grid,
                              mollify, read_field_csv, smooth_plateau, standard_potential, transform,
                              write_field_csv)


def test_make_grid_spacing():
    g = make_grid(16.0, 1024)
    assert g.dx == 0.03125
    assert g.dxi == pytest.approx(np.pi / 16, rel=1e-15)
    assert g.x[0] == -16.0 and g.x[-1] == 16.0 - g.dx


@pytest.mark.parametrize("L, n", [(16.0, 7), (16.0, 8), (16.0, 1000), (0.0, 64), (-1.0, 64), (np.inf, 64)])
def test_make_grid_rejects(L, n):
    with pytest.raises(GridError):
        make_grid(L, n)


def test_transform_of_zero(small_grid):
    F = transform(SampledField(small_grid, np.zeros(small_grid.n_points)))
    assert not np.any(F.coefficients)


@pytest.mark.parametrize("m", [0, 17, 128, 255])
def test_pure_mode_is_delta(small_grid, m):
    g = small_grid
    F = transform(SampledField(g, np.exp(1j * g.xi[m] * g.x)))
    # 2L / sqrt(2 pi) is the amplitude consistent with Parseval under the d xi weight
    expected = np.zeros(g.n_points)
    expected[m] = 2 * g.half_width / np.sqrt(2 * np.pi)
    assert np.max(np.abs(F.coefficients - expected)) < 1e-11


def test_transform_matches_direct_sum(small_grid):
    # unitary transform with kernel exp(-i xi x), by explicit summation
    g = small_grid
    rng = np.random.default_rng(3)
    f = rng.normal(size=g.n_points) + 1j * rng.normal(size=g.n_points)
    direct = np.exp(-1j * np.outer(g.xi, g.x)) @ f * g.dx / np.sqrt(2 * np.pi)
    F = transform(SampledField(g, f))
    assert np.max(np.abs(F.coefficients - direct)) < 1e-12 * np.max(np.abs(direct))


@given(st.integers(0, 2**32 - 1), st.sampled_from([16, 64, 256]))
def test_parseval_and_round_trip(seed, n):
    g = make_grid(8.0, n)
    rng = np.random.default_rng(seed)
    f = SampledField(g, rng.normal(size=n) + 1j * rng.normal(size=n))
    F = transform(f)
    l2 = np.sum(np.abs(f.values) ** 2) * g.dx
    assert abs(l2 - np.sum(np.abs(F.coefficients) ** 2) * g.dxi) <= 1e-10 * l2
    back = inverse_transform(F)
    assert np.max(np.abs(back.values - f.values)) <= 1e-12 * np.max(np.abs(f.values))


def test_gaussian_zero_amplitude(grid):
    assert not np.any(standard_potential("gaussian", 0.0, 1.3, 0.5, grid).values)


def test_bump_tails_are_bitwise_zero(grid):
    b = standard_potential("bump", 1.0, 2.0, 0.0, grid)
    outside = np.abs(grid.x) >= 2.0
    assert np.all(b.values[outside] == 0)
    assert np.all(b.values[~outside] != 0)


def test_gaussian_mass(grid):
    g = standard_potential("gaussian", 1.0, 1.0, 0.0, grid)
    assert abs(g.l2_norm() ** 2 - np.sqrt(np.pi / 2)) < 1e-12


def test_unknown_kind_and_bad_width(grid):
    with pytest.raises(ValueError):
        standard_potential("square", 1.0, 1.0, 0.0, grid)
    with pytest.raises(ValueError):
        standard_potential("bump", 1.0, 0.0, 0.0, grid)


def test_grid_mismatch_and_nonfinite(grid, small_grid):
    with pytest.raises(GridError):
        SampledField(grid, np.zeros(small_grid.n_points))
    with pytest.raises(ValueError):
        SampledField(small_grid, np.full(small_grid.n_points, np.nan))


def test_plateau_and_mollify(grid):
    cut = smooth_plateau(grid, 4.0, 6.0)
    assert np.all(cut[np.abs(grid.x) <= 4.0] == 1.0)
    assert np.all(cut[np.abs(grid.x) >= 6.0] == 0.0)
    m = mollify(standard_potential("gaussian", 1.0, 1.0, 0.0, grid), 4.0, 6.0)
    assert np.all(m.values[np.abs(grid.x) >= 6.0] == 0)


def test_fourier_midpoints_of_smooth_field(grid):
    g = standard_potential("gaussian", 1.0, 1.0, 0.0, grid)
    mid = fourier_midpoints(g.values, grid)
    exact = np.exp(-(grid.x[:-1] + grid.dx / 2) ** 2)
    assert np.max(np.abs(mid - exact)) < 1e-12


def test_csv_round_trip(tmp_path, small_grid):
    f = standard_potential("sech", 0.3 - 0.2j, 1.0, 0.5, small_grid, "s")
    write_field_csv(tmp_path / "f.csv", f)
    back = read_field_csv(tmp_path / "f.csv")
    assert back.grid == small_grid
    assert np.array_equal(back.values, f.values)
