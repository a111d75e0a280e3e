import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from landau_blowup.biharmonic import (
    algebraic_residual,
    cross_derivative_error,
    sign_properties,
    solve_biharmonic,
    verify_biharmonic_residual,
)
from landau_blowup.errors import ConfigurationError, PreconditionError
from landau_blowup.grid import build_grid
from landau_blowup.potentials import maxwellian

from helpers import smooth_field


def maxwellian_oracle(r):
    """Closed-form derivatives of the biharmonic potential of exp(-r^2)."""
    A2 = math.sqrt(math.pi) / 4 * erf(r) - r * np.exp(-r * r) / 2
    A4 = 3 * math.sqrt(math.pi) / 8 * erf(r) - np.exp(-r * r) * (r**3 / 2 + 3 * r / 4)
    B1 = np.exp(-r * r) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        g_r = -A2 / 2 + A4 / (6 * r * r) - r * B1 / 3
        g_rr = -A4 / (3 * r**3) - B1 / 3
        g_rrr = A4 / r**4
    g_r[0], g_rr[0], g_rrr[0] = 0.0, -1.0 / 6.0, 0.0
    return g_r, g_rr, g_rrr


class TestMaxwellianOracle:
    def test_derivatives_match_closed_form(self, grid):
        d = solve_biharmonic(maxwellian(grid))
        g_r, g_rr, g_rrr = maxwellian_oracle(grid.nodes)
        # away from the origin, where the closed form itself is cancellation-prone
        ok = grid.nodes > 0.05
        np.testing.assert_allclose(d.g_r.values[ok], g_r[ok], atol=1e-12)
        np.testing.assert_allclose(d.g_rr.values[ok], g_rr[ok], atol=1e-12)
        np.testing.assert_allclose(d.g_rrr.values[ok], g_rrr[ok], atol=1e-12)

    def test_origin_values(self, grid):
        d = solve_biharmonic(maxwellian(grid))
        assert d.g_rr.values[0] == pytest.approx(-1.0 / 6.0, abs=1e-12)
        assert d.g_r.values[0] == 0.0 and d.g_rrr.values[0] == 0.0

    def test_far_field_decay(self, grid):
        d = solve_biharmonic(maxwellian(grid))
        r = grid.nodes[-1]
        # g_rr ~ -(sqrt(pi)/8) r^-3 far out
        assert -d.g_rr.values[-1] * r**3 == pytest.approx(math.sqrt(math.pi) / 8, rel=1e-6)

    def test_residuals(self, grid):
        d = solve_biharmonic(maxwellian(grid))
        mu = maxwellian(grid)
        assert algebraic_residual(d, mu) < 1e-12
        assert verify_biharmonic_residual(d, mu) < 1e-4

    def test_cross_derivative_second_order(self):
        errs = [cross_derivative_error(solve_biharmonic(maxwellian(build_grid(30.0, n)))) for n in (256, 512, 1024)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders > 1.8), orders


class TestSigns:
    def test_maxwellian(self, grid):
        assert sign_properties(maxwellian(grid)).all

    def test_random_nonnegative_sources(self, grid512):
        rng = np.random.default_rng(7)
        for _ in range(100):
            f = smooth_field(grid512, rng, nonnegative=True, decay=rng.uniform(0.3, 2.0))
            rep = sign_properties(f)
            assert rep.all, rep

    def test_negative_source_rejected(self, grid):
        f = grid.evaluate(lambda r: np.exp(-r * r) * (1 - r))
        with pytest.raises(PreconditionError, match="node"):
            sign_properties(f)


class TestLinearity:
    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
    def test_solver_is_linear(self, grid512, a, b, seed):
        rng = np.random.default_rng(seed)
        f = smooth_field(grid512, rng)
        h = smooth_field(grid512, rng)
        lhs = solve_biharmonic(a * f + b * h)
        df, dh = solve_biharmonic(f), solve_biharmonic(h)
        for name in ("g_r", "g_rr", "g_rrr", "g_rrrr", "g1"):
            expect = a * getattr(df, name).values + b * getattr(dh, name).values
            got = getattr(lhs, name).values
            np.testing.assert_allclose(got, expect, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_grid_mismatch(grid, grid512):
    d = solve_biharmonic(maxwellian(grid))
    with pytest.raises(ConfigurationError):
        algebraic_residual(d, maxwellian(grid512))
