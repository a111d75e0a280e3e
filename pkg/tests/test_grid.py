import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landau_blowup.errors import ConfigurationError, DataError, TruncationWarning
from landau_blowup.grid import (
    RadialGrid,
    build_grid,
    cumulative_integral,
    derivative_matrix,
    differentiate,
    fornberg_weights,
    integrate,
    moments,
    tail_integral,
)


def gaussian_moment(k):
    """int_0^inf r^k exp(-r^2) dr."""
    return 0.5 * math.gamma((k + 1) / 2)


class TestBuildGrid:
    @pytest.mark.parametrize("scheme", ["uniform", "graded"])
    def test_shape_and_endpoints(self, scheme):
        g = build_grid(30.0, 256, scheme)
        assert g.N == 256 and len(g) == 257
        assert g.nodes[0] == 0.0 and g.r_max == 30.0
        assert np.all(np.diff(g.nodes) > 0)

    def test_graded_refines_origin(self):
        g = build_grid(30.0, 1024, "graded")
        assert np.mean(g.nodes <= 30.0 / 8) > 0.3

    @pytest.mark.parametrize("n", [0, 10, 63, 100.5])
    def test_too_few_intervals(self, n):
        with pytest.raises(ConfigurationError):
            build_grid(30.0, n)

    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            build_grid(30.0, 128, "chebyshev")

    def test_nodes_must_start_at_zero(self):
        with pytest.raises(ConfigurationError):
            RadialGrid(np.linspace(0.1, 1.0, 100), "uniform")

    def test_nodes_are_read_only(self, grid):
        with pytest.raises(ValueError):
            grid.nodes[3] = 1.0


class TestRadialField:
    def test_non_finite_rejected(self, grid):
        y = np.zeros(len(grid))
        y[5] = np.nan
        with pytest.raises(DataError, match="node 5"):
            grid.field(y)

    def test_wrong_length(self, grid):
        with pytest.raises(ConfigurationError):
            grid.field(np.zeros(7))

    def test_parity_algebra(self, grid):
        even = grid.evaluate(lambda r: np.exp(-r * r))
        odd = grid.evaluate(lambda r: r, parity="odd")
        assert (even * odd).parity == "odd"
        assert (odd * odd).parity == "even"
        assert (even + odd).parity == "none"

    def test_grid_mismatch(self, grid, grid512):
        with pytest.raises(ConfigurationError):
            grid.evaluate(np.cos) + grid512.evaluate(np.cos)


class TestQuadrature:
    @pytest.mark.parametrize("k", range(0, 17))
    def test_gaussian_moments(self, grid, k):
        mu = grid.evaluate(lambda r: np.exp(-r * r))
        assert integrate(mu, k) == pytest.approx(gaussian_moment(k), rel=1e-12)

    @pytest.mark.parametrize("deg", range(0, 6))
    def test_polynomials_exact(self, deg):
        g = build_grid(2.0, 100, "graded")
        val = integrate(g.evaluate(lambda r: r**deg), 0, warn=False)
        assert val == pytest.approx(2.0 ** (deg + 1) / (deg + 1), rel=1e-13)

    @pytest.mark.parametrize("k", [-1, 17, 2.5])
    def test_bad_power(self, grid, k):
        with pytest.raises(ConfigurationError):
            integrate(grid.evaluate(np.exp), k)

    def test_truncation_warning(self, grid):
        slow = grid.evaluate(lambda r: 1.0 / (1.0 + r**4))
        with pytest.warns(TruncationWarning):
            integrate(slow, 4)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            integrate(grid.evaluate(lambda r: np.exp(-r * r)), 4)

    def test_cumulative_and_tail_are_complementary(self, grid):
        y = np.exp(-grid.nodes) * (1 + grid.nodes)
        total = cumulative_integral(grid, y)[-1]
        np.testing.assert_allclose(cumulative_integral(grid, y) + tail_integral(grid, y), total, rtol=0, atol=1e-13)

    def test_cumulative_matches_closed_form(self, grid):
        r = grid.nodes
        F = cumulative_integral(grid, np.exp(-r))
        np.testing.assert_allclose(F, 1 - np.exp(-r), atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        a=st.floats(-5, 5),
        b=st.floats(-5, 5),
        s=st.floats(0.2, 3.0),
    )
    def test_linearity(self, grid, a, b, s):
        f = grid.evaluate(lambda r: np.exp(-r * r / s))
        h = grid.evaluate(lambda r: r * r * np.exp(-r * r))
        lhs = integrate(a * f + b * h, 2)
        rhs = a * integrate(f, 2) + b * integrate(h, 2)
        assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(a) + abs(b)))


class TestMoments:
    def test_gaussian_moments_closed_form(self, grid):
        r = grid.nodes
        m = moments(grid.evaluate(lambda x: np.exp(-x * x)))
        from scipy.special import erf

        A2 = math.sqrt(math.pi) / 4 * erf(r) - r * np.exp(-r * r) / 2
        A4 = 3 * math.sqrt(math.pi) / 8 * erf(r) - np.exp(-r * r) * (r**3 / 2 + 3 * r / 4)
        np.testing.assert_allclose(m.A2.values, A2, atol=1e-13)
        np.testing.assert_allclose(m.A4.values, A4, atol=1e-13)
        np.testing.assert_allclose(m.B1.values, np.exp(-r * r) / 2, atol=1e-13)


class TestDifferentiation:
    def test_fornberg_reproduces_classic_stencil(self):
        w = fornberg_weights(0.0, np.array([-1.0, 0.0, 1.0]), 2)
        np.testing.assert_allclose(w[2], [1.0, -2.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(w[1], [-0.5, 0.0, 0.5], atol=1e-14)

    @pytest.mark.parametrize("accuracy,order_min", [(2, 1.8), (4, 3.5)])
    @pytest.mark.parametrize("deriv", [1, 2])
    def test_convergence_order(self, accuracy, order_min, deriv):
        errs = []
        for n in (256, 512, 1024):
            g = build_grid(30.0, n)
            r = g.nodes
            f = g.evaluate(lambda x: np.exp(-x * x) * np.cos(x))
            exact = (
                -np.exp(-r * r) * (2 * r * np.cos(r) + np.sin(r))
                if deriv == 1
                else np.exp(-r * r) * ((4 * r * r - 3) * np.cos(r) + 4 * r * np.sin(r))
            )
            D = derivative_matrix(g, deriv, accuracy, "even")
            errs.append(np.max(np.abs(D @ f.values - exact)))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= order_min), orders

    def test_odd_parity_at_origin(self, grid):
        f = grid.evaluate(lambda r: np.sin(r) * np.exp(-r * r), parity="odd")
        d = differentiate(f, 1, accuracy=4)
        assert d.parity == "even"
        assert d.values[0] == pytest.approx(1.0, abs=1e-6)

    def test_even_first_derivative_vanishes_at_origin(self, grid):
        d = differentiate(grid.evaluate(lambda r: np.cos(r)), 1)
        assert d.values[0] == 0.0 and d.parity == "odd"

    def test_bad_arguments(self, grid):
        with pytest.raises(ConfigurationError):
            derivative_matrix(grid, 3)
        with pytest.raises(ConfigurationError):
            derivative_matrix(grid, 1, accuracy=5)
