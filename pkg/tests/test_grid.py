import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nanorod.grid import (PhaseGrid, build_grid, d3_dp3, d_dp, d_dr, integrate_phase_space)


def test_default_spacing():
    g = build_grid(-8, 8, -8, 8, 120, 120)
    assert g.dr == pytest.approx(16 / 119, abs=1e-15)
    assert g.dp == pytest.approx(0.134454, abs=1e-6)


def test_corner_grid_spacing_and_rejection():
    # two points per axis give unit spacing, but the stencils need >= 8 points
    assert PhaseGrid(0, 1, 0, 1, 2, 2).dr == 1.0
    with pytest.raises(ValueError):
        build_grid(0, 1, 0, 1, 2, 2)


def test_uniform_partition():
    g = build_grid(-1, 1, -1, 1, 9, 9)
    assert np.array_equal(g.r, -1 + np.arange(9) * 0.25)
    assert g.r[4] == 0.0


@pytest.mark.parametrize("bounds", [(1, -1, 0, 1), (0, 1, 2, 2), (math.nan, 1, 0, 1),
                                    (0, math.inf, 0, 1)])
def test_bad_bounds(bounds):
    with pytest.raises(ValueError):
        build_grid(*bounds, 10, 10)


def test_node_coordinates_reproducible():
    g = build_grid(-3.3, 4.1, -2, 7, 17, 23)
    assert all(g.r[i] == g.r_min + i * g.dr for i in range(g.n_r))
    assert all(g.p[j] == g.p_min + j * g.dp for j in range(g.n_p))


def test_first_derivatives_of_constants(grid_default):
    f = np.full(grid_default.shape, 3.7)
    assert np.all(d_dr(f, grid_default)[2:-2] == 0.0)
    assert np.all(d_dp(f, grid_default)[:, 2:-2] == 0.0)


def test_first_derivative_of_linear(grid_default):
    R, P = grid_default.mesh()
    assert np.allclose(d_dr(R, grid_default)[2:-2], 1.0, atol=1e-12, rtol=0)


@pytest.mark.parametrize("degree", [0, 1, 2, 3, 4])
def test_first_derivative_exact_for_quartics(degree):
    g = build_grid(-2, 2, -2, 2, 20, 20)
    R, P = g.mesh()
    f = P**degree
    exact = degree * P ** (degree - 1) if degree else 0 * P
    assert np.allclose(d_dp(f, g)[:, 2:-2], exact[:, 2:-2], atol=1e-11, rtol=0)
    assert np.allclose(d_dr(R**degree, g)[2:-2], exact.T[2:-2], atol=1e-11, rtol=0)


def test_p_squared(grid_default):
    R, P = grid_default.mesh()
    assert np.allclose(d_dp(P**2, grid_default)[:, 2:-2], 2 * P[:, 2:-2], atol=1e-11, rtol=0)


def _truncation_bound(h, f5_max):
    # leading error term of the 5-point central first derivative
    return h**4 / 30 * f5_max


def test_sin_derivative_within_truncation_bound(grid_default):
    R, _ = grid_default.mesh()
    err = np.abs(d_dr(np.sin(R), grid_default) - np.cos(R))[2:-2].max()
    assert err <= 1.01 * _truncation_bound(grid_default.dr, 1.0)


@pytest.mark.xfail(strict=True, reason="h^4/30 truncation error of the prescribed stencil is "
                   "1.09e-5 at this spacing, above the quoted 5e-6")
def test_sin_derivative_quoted_tolerance(grid_default):
    R, _ = grid_default.mesh()
    assert np.abs(d_dr(np.sin(R), grid_default) - np.cos(R))[2:-2].max() < 5e-6


def test_gaussian_derivative_within_truncation_bound(grid_default):
    _, P = grid_default.mesh()
    f = np.exp(-P**2)
    err = np.abs(d_dp(f, grid_default) + 2 * P * f)[:, 2:-2].max()
    # max |d^5 exp(-x^2)/dx^5| = 32.39 (attained near x = 0.43)
    x = np.linspace(-4, 4, 20001)
    f5 = np.abs(-(32 * x**5 - 160 * x**3 + 120 * x) * np.exp(-x**2)).max()
    assert err <= 1.05 * _truncation_bound(grid_default.dp, f5)


@pytest.mark.xfail(strict=True, reason="truncation error of the prescribed stencil for "
                   "exp(-P^2) at dp=0.134 is 3.5e-4, above the quoted 1e-5")
def test_gaussian_derivative_quoted_tolerance(grid_default):
    _, P = grid_default.mesh()
    f = np.exp(-P**2)
    assert np.abs(d_dp(f, grid_default) + 2 * P * f)[:, 2:-2].max() < 1e-5


def test_first_derivative_fourth_order():
    errs = []
    for n in (41, 81, 161):
        g = build_grid(-math.pi, math.pi, -1, 1, n, 8)
        R, _ = g.mesh()
        errs.append(np.abs(d_dr(np.sin(R), g) - np.cos(R))[2:-2].max())
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 3.8)


def test_third_derivative_polynomials():
    g = build_grid(-2, 2, -2, 2, 20, 20)
    _, P = g.mesh()
    assert np.allclose(d3_dp3(P**2, g)[:, 3:-3], 0.0, atol=1e-9)
    assert np.allclose(d3_dp3(P**3, g)[:, 3:-3], 6.0, atol=1e-9)
    assert np.allclose(d3_dp3(P**4, g)[:, 3:-3], 24 * P[:, 3:-3], atol=1e-8)


def test_third_derivative_sin(grid_default):
    _, P = grid_default.mesh()
    err = np.abs(d3_dp3(np.sin(P), grid_default) + np.cos(P))[:, 3:-3].max()
    assert err < 1e-4


def test_stencil_needs_enough_points():
    g = PhaseGrid(0, 1, 0, 1, 4, 4)
    with pytest.raises(ValueError):
        d_dr(np.zeros((4, 4)), g)
    with pytest.raises(ValueError):
        d3_dp3(np.zeros((4, 4)), g)


def test_leading_axes_carried(small_grid):
    R, P = small_grid.mesh()
    f = np.stack([np.sin(R), np.cos(P)])
    assert np.array_equal(d_dr(f, small_grid)[0], d_dr(np.sin(R), small_grid))
    assert np.array_equal(d_dp(f, small_grid)[1], d_dp(np.cos(P), small_grid))


def test_area(grid_default):
    assert integrate_phase_space(np.ones(grid_default.shape), grid_default) == pytest.approx(256, abs=1e-10)


def test_gaussian_normalization(grid_default):
    R, P = grid_default.mesh()
    f = np.exp(-(R + 1.6) ** 2 / (2 * 0.6071**2)) * np.exp(-2 * 0.6071**2 * P**2) / math.pi
    assert abs(integrate_phase_space(f, grid_default) - 1) < 1e-6


def test_odd_integrand_vanishes(grid_default):
    R, P = grid_default.mesh()
    assert abs(integrate_phase_space(R * np.exp(-R**2 - P**2), grid_default)) < 1e-15


def test_non_finite_rejected(small_grid):
    f = np.zeros(small_grid.shape)
    f[3, 3] = np.nan
    with pytest.raises(ValueError):
        integrate_phase_space(f, small_grid)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_integration_linear(a, b):
    g = build_grid(-3, 3, -2, 2, 16, 12)
    R, P = g.mesh()
    f1, f2 = np.exp(-R**2) * np.cos(P), R**2 * P
    lhs = integrate_phase_space(a * f1 + b * f2, g)
    rhs = a * integrate_phase_space(f1, g) + b * integrate_phase_space(f2, g)
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(seed=st.integers(0, 2**32 - 1))
def test_odd_axis_flip_negates(seed):
    g = build_grid(-4, 4, -3, 3, 21, 15)
    f = np.random.default_rng(seed).normal(size=g.shape)
    assert integrate_phase_space(f[::-1], g) == pytest.approx(integrate_phase_space(f, g), abs=1e-10)
    odd = f - f[::-1]
    assert integrate_phase_space(odd[::-1], g) == pytest.approx(-integrate_phase_space(odd, g), abs=1e-10)


def test_mixed_derivatives_commute_fourth_order():
    defects = []
    for n in (40, 80):
        g = build_grid(-5, 5, -5, 5, n, n)
        R, P = g.mesh()
        f = np.exp(-(R**2 + P**2) / 2) * np.sin(R + 0.5 * P)
        a = d_dr(d_dp(f, g), g)
        b = d_dp(d_dr(f, g), g)
        defects.append(np.abs(a - b)[4:-4, 4:-4].max())
    # stencils along different axes commute exactly in the interior
    assert max(defects) < 1e-12
