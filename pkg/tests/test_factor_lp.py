from __future__ import annotations

import itertools
import json
from pathlib import Path

import numpy as np
import pytest

from onlinematch.factor_lp import (Family, FactorLPSpec, build_fully_online_lp, build_general_arrival_lp,
                                   build_naive_lp, count_phi2_tuples, naive_violations, phi1_margin,
                                   phi2_violations, solve_factor_lp)
from onlinematch.lp import solve
from onlinematch.pricing import grid_violations


def gamma(family: str, n: int, **kw) -> float:
    return solve_factor_lp(FactorLPSpec(family, n, **kw)).gamma


@pytest.fixture(scope="module")
def fully_curve():
    return {n: gamma("fully", n, use_row_generation=n > 8) for n in range(4, 21)}


class TestFactorLPSpec:
    def test_aliases(self):
        assert FactorLPSpec("fully", 10).family is Family.FULLY
        assert FactorLPSpec("GeneralArrival", 10).family is Family.GENERAL

    @pytest.mark.parametrize("kw", [dict(family="fully", n=3),
                                    dict(family="general", n=8, use_row_generation=True),
                                    dict(family="fully", n=8, use_row_generation=True, use_auxiliary_H=False),
                                    dict(family="fully", n=8, lipschitz=False)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            FactorLPSpec(**kw)


class TestCounts:
    def test_n4_layout(self):
        direct = build_fully_online_lp(4, use_auxiliary_H=False)
        aux = build_fully_online_lp(4)
        assert direct.lp.num_vars == 25 + 1
        assert aux.lp.num_vars == 25 + 1 + 25
        assert direct.counts["phi1"] == aux.counts["phi1"] == 15

    @pytest.mark.parametrize("n", [4, 5, 7])
    def test_four_tuple_count_by_enumeration(self, n):
        pairs = [(i, j) for i in range(n + 1) for j in range(i, n + 1)]
        brute = sum(1 for (iu, ju), (iv, jv) in itertools.product(pairs, pairs) if iv >= n - ju)
        assert count_phi2_tuples(n) == brute
        assert build_fully_online_lp(n).counts["phi2"] == brute

    def test_auxiliary_rows_are_sparse(self):
        g = build_fully_online_lp(6)
        mat, _, _ = g.lp.constraint_arrays()
        nnz = np.diff(mat.indptr)
        phi2_rows = nnz[-g.counts["phi2"]:]
        assert phi2_rows.max() <= 4


@pytest.mark.parametrize("n", [4, 6, 8])
def test_auxiliary_H_is_exact_substitution(n):
    assert gamma("fully", n) == pytest.approx(gamma("fully", n, use_auxiliary_H=False), abs=1e-8)
    assert gamma("general", n) == pytest.approx(gamma("general", n, use_auxiliary_H=False), abs=1e-8)


@pytest.mark.parametrize("n", [6, 8, 10])
def test_row_generation_matches_enumeration(n):
    res = solve_factor_lp(FactorLPSpec("fully", n, use_row_generation=True))
    assert res.gamma == pytest.approx(gamma("fully", n), abs=1e-6)
    assert res.rounds >= 2
    assert res.constraint_counts["phi2"] < count_phi2_tuples(n)


def test_separator_finds_nothing_at_the_optimum():
    res = solve_factor_lp(FactorLPSpec("fully", 8))
    assert len(phi2_violations(res.h_values, res.gamma, 8)) == 0
    assert len(phi2_violations(res.h_values, res.gamma + 0.01, 8)) > 0


def test_general_origin_row():
    n = 6
    g = build_general_arrival_lp(n)
    mat, rel, rhs = g.lp.constraint_arrays()
    target = {g.gamma_index: 1.0, int(g.H_index[0, 0]): -1.0, int(g.h_index[n, n]): -1.0}
    hits = [r for r in range(mat.shape[0])
            if dict(zip(mat.indices[mat.indptr[r]:mat.indptr[r + 1]].tolist(),
                        mat.data[mat.indptr[r]:mat.indptr[r + 1]].tolist())) == target]
    assert len(hits) == 1
    assert rel[hits[0]] == 0 and rhs[hits[0]] == pytest.approx(-phi1_margin(n))
    # h(n,n) is pinned to 1 and H(0,0) integrates over an empty range, so the row caps Gamma at 1 - margin
    assert g.lp.lb[int(g.h_index[n, n])] == g.lp.ub[int(g.h_index[n, n])] == 1.0
    sol = solve(g.lp)
    assert sol.values[int(g.H_index[0, 0])] == pytest.approx(0.0, abs=1e-12)


def test_naive_identity_point():
    # identity h at theta_v = 1, tau_v = 0, tau_u = 0: 1 * 1 - 1/2 + 0
    n = 10
    h = np.arange(n + 1) / n
    trapezoid = np.sum(h[:-1] + h[1:]) / (2 * n)
    assert 1.0 * h[n] - trapezoid + 0.0 * h[0] == pytest.approx(0.5, abs=1e-15)
    assert naive_violations(h) == []


class TestSolvedGrids:
    @pytest.mark.parametrize("family", ["fully", "general"])
    def test_grid_is_valid(self, family):
        res = solve_factor_lp(FactorLPSpec(family, 10))
        assert res.status == "optimal"
        assert grid_violations(res.grid) == []
        assert res.grid.values[:, 0].tolist() == [0.0] * 11
        assert res.grid.values[:, -1].tolist() == [1.0] * 11

    def test_naive_grid_is_row_constant(self):
        res = solve_factor_lp(FactorLPSpec("naive", 12))
        assert np.all(res.grid.values == res.grid.values[0])
        assert naive_violations(res.h_values) == []

    def test_without_lipschitz_is_marked(self):
        res = solve_factor_lp(FactorLPSpec("general", 10, lipschitz=False))
        assert res.status == "optimal-unvalidated"
        assert res.gamma >= gamma("general", 10) - 1e-9

    def test_certificate_is_deterministic(self):
        res = solve_factor_lp(FactorLPSpec("fully", 8))
        a, b = res.certificate(2_000, seed=3), res.certificate(2_000, seed=3)
        assert a == b and a["pass"] and a["gamma"] == res.gamma

    def test_gamma_is_the_objective(self):
        g = build_naive_lp(8)
        sol = solve(g.lp)
        assert sol.objective_value == pytest.approx(gamma("naive", 8), abs=1e-12)


class TestCurves:
    def test_consecutive_differences_are_small(self, fully_curve):
        # the margins are of order 1/n^2, so very coarse grids jump further
        diffs = [abs(fully_curve[n + 1] - fully_curve[n]) for n in range(9, 20)]
        assert max(diffs) < 0.02

    def test_naive_below_fully(self, fully_curve):
        for n in range(5, 21):
            assert gamma("naive", n) <= fully_curve[n] + 1e-9

    @pytest.mark.parametrize("n", [10, 20, 40])
    def test_general_stays_below_continuous_value(self, n, solved_grids):
        assert solved_grids("general", n).gamma <= 0.527

    def test_recorded_fully_values(self, solved_grids):
        frozen = json.loads((Path(__file__).parent / "data" / "regression.json").read_text())["fully_grid_gammas"]
        for n_str, expected in frozen.items():
            n = int(n_str)
            assert solved_grids("fully", n, n > 10).gamma == pytest.approx(expected, abs=1e-7)
