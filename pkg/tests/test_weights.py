import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from landau_blowup.errors import ConfigurationError, ConstructionError
from landau_blowup.grid import build_grid
from landau_blowup.weights import (
    F_profile,
    assemble_w,
    build_eta,
    build_family,
    build_rho2,
    eta0,
    find_R2,
    weight_certificate,
)

STRUCTURAL = (
    "rho_gaussian_inside_R1",
    "eta_in_unit_interval",
    "eta_one_inside_R1",
    "q_le_2rho",
    "rho_mu_le_1",
    "rho_mu_nonincreasing",
    "R2_bound",
    "rho_lower_bound",
    "ode_residual",
    "eta_ode_inequality",
)


class TestProfile:
    def test_R2_frozen_value(self):
        R2 = find_R2(4)
        assert F_profile(R2, 4) == pytest.approx(1.0, abs=1e-12)
        assert R2 == pytest.approx(9.274466432, abs=1e-8)

    @pytest.mark.parametrize("R1", [4, 5, 6, 8, 10, 15])
    def test_R2_bound(self, R1):
        R2 = find_R2(R1)
        assert R1 < R2 <= math.sqrt(5) * (R1 + 1)

    def test_F_vanishes_at_R1_and_increases(self):
        r = np.linspace(4, 9, 200)
        F = F_profile(r, 4)
        assert F[0] == pytest.approx(0.0, abs=1e-15)
        assert np.all(np.diff(F) > 0)

    def test_eta0_pieces(self):
        R2 = find_R2(4)
        r = np.array([0.0, 2.0, 4.0, 6.0, R2, 20.0])
        e = eta0(r, 4, R2)
        assert e[0] == e[1] == e[2] == 1.0
        assert 0 < e[3] < 1
        assert e[4] == 0.0 and e[5] == 0.0

    def test_eta_is_continuous_and_bounded(self, grid):
        eta, R2, R1s = build_eta(grid, 4, 2.5)
        v = eta.values
        assert np.all((v >= 0) & (v <= 1))
        assert 4 < R1s < R2
        far = grid.nodes >= R1s
        np.testing.assert_allclose(v[far], 0.25 / grid.nodes[far] ** 2, rtol=1e-14)


class TestFamily:
    def test_gaussian_inside(self, family):
        r = family.grid.nodes
        inside = r <= 4
        np.testing.assert_allclose(family.log_rho.values[inside], r[inside] ** 2, rtol=1e-14)
        np.testing.assert_allclose(family.lam.values[inside], 2 * r[inside], rtol=1e-12)

    def test_rho_at_R1(self):
        g = build_grid(30.0, 1024)
        # place a node exactly at R1 by interpolation of the log
        fam = build_family(g)
        assert np.interp(4.0, g.nodes, fam.log_rho.values) == pytest.approx(16.0, abs=1e-3)
        assert fam.rho.values[0] == 1.0

    def test_rho2_values(self, grid):
        rho2 = build_rho2(grid, 12.5).values
        r = grid.nodes
        np.testing.assert_allclose(rho2, r * r * (1 + r * r) ** 5.25, rtol=1e-14)
        assert rho2[0] == 0.0

    def test_W_at_origin(self, family):
        assert assemble_w(family).values[0] == pytest.approx(family.K1 + 1 / (4 * math.pi))

    @pytest.mark.parametrize("R1", [4, 6])
    def test_structural_checks_pass(self, R1):
        fam = build_family(build_grid(30.0, 1024), R1=R1)
        cert = weight_certificate(fam)
        for name in STRUCTURAL + ("q_far_power_law", "rho_far_power_law"):
            assert cert[name].passed, (name, cert[name])

    def test_W_limit_at_small_K1(self, family):
        cert = weight_certificate(family.with_K1(1e-30))
        assert cert["W_far_limit"].passed and cert.passed

    def test_refinement_stability(self, family):
        fine = build_family(build_grid(30.0, 2048))
        coarse = family
        assert fine.R2 == coarse.R2 and fine.R1_star == coarse.R1_star
        for r in (5.0, 8.0, 12.0, 25.0):
            a = np.interp(r, coarse.grid.nodes, coarse.log_rho.values)
            b = np.interp(r, fine.grid.nodes, fine.log_rho.values)
            assert a == pytest.approx(b, rel=1e-5)
        assert weight_certificate(fine)["ode_residual"].passed

    def test_large_R1_uses_logs(self):
        fam = build_family(build_grid(30.0, 1024), R1=10)
        assert np.all(np.isfinite(fam.log_rho.values))
        cert = weight_certificate(fam)
        for name in STRUCTURAL:
            assert cert[name].passed, name
        big = build_family(build_grid(40.0, 1024), R1=27)
        with pytest.raises(ConstructionError, match="log_rho"):
            big.rho

    def test_as_dict(self, family):
        d = weight_certificate(family).as_dict()
        assert d["R1"] == 4 and len(d["checks"]) == 13


class TestFaultInjection:
    def test_rho_above_gaussian(self, family):
        rho = family.rho.values.copy()
        i = int(np.searchsorted(family.grid.nodes, 2.0))
        rho[i] *= 1.01
        cert = weight_certificate(family.with_rho(rho))
        assert not cert["rho_gaussian_inside_R1"].passed
        assert not cert["rho_mu_le_1"].passed
        assert cert["rho_gaussian_inside_R1"].worst_r == pytest.approx(family.grid.nodes[i])

    def test_rho_bump_outside(self, family):
        rho = family.rho.values.copy()
        r = family.grid.nodes
        i = int(np.searchsorted(r, 6.0))
        rho[i] *= 3.0
        cert = weight_certificate(family.with_rho(rho))
        assert not cert["rho_mu_nonincreasing"].passed

    def test_rho_dip_outside(self, family):
        rho = family.rho.values.copy()
        i = int(np.searchsorted(family.grid.nodes, 12.0))
        rho[i] = 0.9 * math.exp(16.0)
        cert = weight_certificate(family.with_rho(rho))
        assert not cert["rho_lower_bound"].passed


class TestErrors:
    @pytest.mark.parametrize("R1", [3, 4.5, -1])
    def test_bad_R1(self, grid, R1):
        with pytest.raises(ConfigurationError):
            build_eta(grid, R1)

    @pytest.mark.parametrize("k", [2.0, 20.0, 1.0])
    def test_bad_k(self, grid, k):
        with pytest.raises(ConfigurationError):
            build_eta(grid, 4, k)

    @pytest.mark.parametrize("k2", [3.0, 13.0, 14.0])
    def test_bad_k2(self, grid, k2):
        with pytest.raises(ConfigurationError):
            build_rho2(grid, k2)

    @pytest.mark.parametrize("K1", [0.0, -1.0])
    def test_bad_K1(self, grid, family, K1):
        with pytest.raises(ConfigurationError):
            build_family(grid, K1=K1)
        with pytest.raises(ConfigurationError):
            family.with_K1(K1)


@settings(max_examples=20, deadline=None)
@given(k=st.floats(2.1, 8.0))
def test_eta_far_tail_property(grid512, k):
    eta, R2, R1s = build_eta(grid512, 4, k)
    r = grid512.nodes
    far = r >= R1s
    np.testing.assert_allclose(eta.values[far] * r[far] ** 2, (k - 2) / 2, rtol=1e-13)
    assert np.all(np.diff(eta.values[r >= 4]) <= 1e-15)
