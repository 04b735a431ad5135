from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinematch.pricing import (DomainError, GridError, HGrid, H_grid, H_value, NonMonotoneDiagonalError,
                                 PriceSystem, certify_continuous_feasibility, f_inverse, f_of, g_of,
                                 grid_violations, interpolate_h, phi1, phi2, phi_general)

IDENTITY = HGrid.identity(10)
unit = st.floats(0.0, 1.0)


@pytest.fixture(scope="module")
def grid20(solved_grids):
    res = solved_grids("fully", 20, True)
    return res.grid, res.gamma


@pytest.fixture(scope="module")
def prices40(fully_grid_40):
    return PriceSystem(fully_grid_40.grid)


class TestHGrid:
    def test_identity_is_valid(self):
        assert grid_violations(IDENTITY) == []

    def test_boundary_rows(self):
        vals = IDENTITY.values.copy()
        vals[3, 0] = 0.01
        with pytest.raises(GridError):
            HGrid(10, vals)

    def test_strict_monotonicity(self):
        vals = IDENTITY.values.copy()
        vals[2, 5] = vals[2, 4]
        with pytest.raises(GridError):
            HGrid(10, vals)

    def test_lipschitz(self):
        vals = np.tile(np.r_[np.zeros(1), np.linspace(0.5, 1, 10)], (11, 1))
        with pytest.raises(GridError, match="4/n"):
            HGrid(10, vals)

    def test_json_round_trip(self, tmp_path):
        IDENTITY.save(tmp_path / "g.json")
        assert HGrid.load(tmp_path / "g.json") == IDENTITY

    def test_shape(self):
        with pytest.raises(GridError):
            HGrid(3, np.zeros((3, 3)))


class TestInterpolation:
    def test_grid_points(self, grid20):
        grid, _ = grid20
        assert interpolate_h(grid, 0.35, 0.6) == grid.values[7, 12]

    def test_cell_midpoint(self, grid20):
        grid, _ = grid20
        v = grid.values
        expected = (v[3, 5] + v[3, 6] + v[4, 5] + v[4, 6]) / 4
        assert interpolate_h(grid, 3.5 / 20, 5.5 / 20) == pytest.approx(expected, abs=1e-15)

    @given(unit, unit)
    def test_identity_grid(self, tau, theta):
        assert interpolate_h(IDENTITY, tau, theta) == pytest.approx(theta, abs=1e-12)

    @settings(max_examples=200)
    @given(unit, unit, unit)
    def test_monotone_in_theta(self, tau, t1, t2):
        lo, hi = sorted((t1, t2))
        grid = HGrid.from_function(8, lambda t, h: h ** 1.2 * (1 - 0.1 * t) + 0.1 * t * h)
        assert interpolate_h(grid, tau, lo) <= interpolate_h(grid, tau, hi) + 1e-15


class TestPrices:
    def test_endpoints(self, prices40):
        assert f_inverse(prices40, 0.0) == 0.0
        assert f_inverse(prices40, 1.0) == 1.0

    def test_identity_prices(self):
        ps = PriceSystem(IDENTITY)
        assert f_of(ps, 0.42) == pytest.approx(0.42, abs=1e-10)
        assert g_of(ps, 0.2, 0.55) == pytest.approx(0.55, abs=1e-10)

    def test_round_trip_on_solved_grid(self, prices40):
        assert f_of(prices40, f_inverse(prices40, 0.37)) == pytest.approx(0.37, abs=1e-9)

    def test_diagonal_identity(self, prices40):
        assert g_of(prices40, 0.3, 0.3) == pytest.approx(f_of(prices40, 0.3), abs=1e-8)

    @given(unit)
    def test_g_at_one(self, a):
        assert g_of(PriceSystem(IDENTITY), a, 1.0) == 1.0

    def test_g_domain(self, prices40):
        with pytest.raises(DomainError):
            g_of(prices40, 0.5, 0.2)

    def test_non_monotone_diagonal_rejected(self):
        with pytest.raises(NonMonotoneDiagonalError):
            PriceSystem.from_f_inverse([0.0, 0.6, 0.5, 1.0])

    @settings(max_examples=60, deadline=None)
    @given(unit)
    def test_f_round_trip_dense(self, tau):
        ps = PriceSystem(HGrid.from_function(12, lambda t, h: h * (1 - 0.2 * t * (1 - h))))
        assert f_of(ps, f_inverse(ps, tau)) == pytest.approx(tau, abs=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(unit, unit, unit)
    def test_g_nondecreasing_and_bounded(self, a, x1, x2):
        ps = PriceSystem(HGrid.from_function(12, lambda t, h: h * (1 - 0.2 * t * (1 - h))))
        lo, hi = sorted((max(a, x1), max(a, x2)))
        g_lo, g_hi = g_of(ps, a, lo), g_of(ps, a, hi)
        assert 0.0 <= g_lo <= g_hi + 1e-12 <= 1.0 + 1e-12

    def test_row_is_interpolated(self, prices40):
        row = prices40.row(0.5)
        assert np.array_equal(row, prices40.grid.values[20])


class TestH:
    def test_diagonal(self, grid20):
        grid, _ = grid20
        assert H_value(grid, 0.4, 0.4) == pytest.approx(0.4 * interpolate_h(grid, 0.4, 0.4), abs=1e-15)

    @given(unit, unit)
    def test_identity_closed_form(self, a, b):
        tau, theta = sorted((a, b))
        assert H_value(IDENTITY, tau, theta) == pytest.approx((theta ** 2 + tau ** 2) / 2, abs=1e-12)

    def test_identity_zero_one(self):
        assert H_value(IDENTITY, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_matches_discrete_sum(self, grid20):
        grid, _ = grid20
        n = grid.n
        discrete = H_grid(grid)
        i, j = np.triu_indices(n + 1)
        exact = H_value(grid, i / n, j / n)
        assert np.max(np.abs(exact - discrete[i, j])) <= 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            H_value(IDENTITY, 0.6, 0.5)


class TestGainBounds:
    def test_phi1_origin(self, grid20):
        assert phi1(grid20[0], 0.0, 0.0) == pytest.approx(1.0, abs=1e-15)

    def test_phi1_identity_minimum(self):
        t = np.linspace(0, 1, 201)
        tau, theta = np.meshgrid(t, t, indexing="ij")
        mask = tau <= theta
        vals = phi1(IDENTITY, tau[mask], theta[mask])
        k = int(np.argmin(vals))
        assert vals[k] == pytest.approx(0.5, abs=1e-12)
        assert (tau[mask][k], theta[mask][k]) == (0.0, 1.0)

    def test_phi_general_boundary(self, grid20):
        assert phi_general(grid20[0], 0.0, 1.0) == pytest.approx(H_value(grid20[0], 0.0, 1.0), abs=1e-15)

    @given(unit, unit)
    def test_phi_general_identity(self, a, b):
        tau, theta = sorted((a, b))
        assert phi_general(IDENTITY, tau, theta) == pytest.approx((theta ** 2 + tau ** 2) / 2 + (1 - theta) ** 2,
                                                                  abs=1e-12)

    def test_phi2_domain(self):
        with pytest.raises(DomainError):
            phi2(IDENTITY, 0.0, 0.2, 0.1, 0.5)

    def test_solved_grid_meets_gamma_at_grid_points(self, grid20):
        grid, gamma = grid20
        n = grid.n
        i, j = np.triu_indices(n + 1)
        assert np.min(phi1(grid, i / n, j / n)) >= gamma - 1e-9
        iu, ju = np.repeat(i, i.size), np.repeat(j, j.size)
        iv, jv = np.tile(i, i.size), np.tile(j, j.size)
        keep = iv >= n - ju
        vals = phi2(grid, iu[keep] / n, ju[keep] / n, iv[keep] / n, jv[keep] / n)
        assert np.min(vals) >= gamma - 1e-9


class TestCertification:
    def test_identity_fails_at_06(self):
        rep = certify_continuous_feasibility(IDENTITY, 0.6, num_samples=20_000, seed=1)
        assert not rep.passed
        assert rep.min_phi1 == pytest.approx(0.5, abs=0.02)

    def test_gamma_zero_passes(self):
        assert certify_continuous_feasibility(IDENTITY, 0.0, num_samples=5_000, seed=2).passed
        assert certify_continuous_feasibility(IDENTITY, 0.0, num_samples=5_000, seed=2, family="general").passed

    def test_seeded(self):
        a = certify_continuous_feasibility(IDENTITY, 0.3, num_samples=3_000, seed=5)
        b = certify_continuous_feasibility(IDENTITY, 0.3, num_samples=3_000, seed=5)
        assert a.to_dict() == b.to_dict()
