"""Factor-revealing LPs for the price-function grid.

Three families:

* ``FullyOnline``: two-dimensional grid ``h(i, j)`` with two gain-bound
  constraint families (one on pairs, one on four-tuples).
* ``GeneralArrival``: two-dimensional grid with one gain-bound family on pairs.
* ``NaiveOneDim``: a one-dimensional ``h`` (prices that ignore the arrival-time
  level) for the general model.

Grid indices ``(i, j)`` stand for ``(tau, theta) = (i/n, j/n)``. The discrete
integral of a row is the trapezoid sum, which is exact for the interpolated row.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .lp import GE, LE, EQ, LinearProgram, LPSolution, RowBlock, solve, solve_with_row_generation
from .pricing import (GridError, HGrid, H_grid, certify_continuous_feasibility, diagonal_cells_monotone,
                      grid_violations)

log = logging.getLogger(__name__)

# strict monotonicity is imposed as a minimum step; the solver's own
# feasibility tolerance (1e-9) would swallow anything much smaller
MONOTONE_GAP = 1e-6
SEPARATION_TOL = 1e-7
CUTS_PER_ROUND = 10_000


class Family(str, Enum):
    FULLY = "FullyOnline"
    GENERAL = "GeneralArrival"
    NAIVE = "NaiveOneDim"

    @classmethod
    def parse(cls, s: str) -> "Family":
        aliases = {"fully": cls.FULLY, "general": cls.GENERAL, "naive": cls.NAIVE}
        return aliases.get(s.lower()) or cls(s)


@dataclass(frozen=True)
class FactorLPSpec:
    family: Family
    n: int
    use_row_generation: bool = False
    use_auxiliary_H: bool = True
    monotone_gap: float = MONOTONE_GAP
    max_rounds: int = 200
    backend: str = "auto"
    # the general family without Lipschitz rows is an ablation; its grid skips validation
    lipschitz: bool = True

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family.parse(self.family))
        if self.n < 4:
            raise ValueError("grid resolution n must be at least 4")
        if self.use_row_generation and self.family is not Family.FULLY:
            raise ValueError("row generation is only used for the four-tuple family")
        if self.use_row_generation and not self.use_auxiliary_H:
            raise ValueError("row generation needs the auxiliary H variables")
        if not self.lipschitz and self.family is not Family.GENERAL:
            raise ValueError("dropping the Lipschitz rows is only supported for the general family")


def phi1_margin(n: int) -> float:
    return 5.0 / (2 * n * n)


def phi2_margin(n: int) -> float:
    return 5.0 / (n * n)


# -- variable layout --------------------------------------------------------

@dataclass
class GridLP:
    """A built LP together with the index maps needed to read the grid back."""

    lp: LinearProgram
    family: Family
    n: int
    h_index: np.ndarray            # (n+1, n+1) or (n+1,) variable ids
    gamma_index: int
    H_index: Optional[np.ndarray] = None
    P_index: Optional[np.ndarray] = None
    counts: dict = field(default_factory=dict)

    def gamma_of(self, sol: LPSolution) -> float:
        return float(sol.values[self.gamma_index])

    def h_of(self, sol: LPSolution) -> np.ndarray:
        return np.asarray(sol.values)[self.h_index]


def _add_grid_variables(lp: LinearProgram, n: int) -> np.ndarray:
    idx = np.empty((n + 1, n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            # boundary values are fixed through the bounds
            lo, hi = (0.0, 0.0) if j == 0 else (1.0, 1.0) if j == n else (0.0, 1.0)
            idx[i, j] = lp.add_variable(f"h_{i}_{j}", lo, hi)
    return idx


def _block(rows, cols, vals, nrows, nvars, rel, rhs) -> RowBlock:
    mat = sp.csr_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))), shape=(nrows, nvars))
    rel_codes = np.full(nrows, {LE: 0, EQ: 1, GE: 2}[rel], dtype=np.int8)
    return RowBlock(mat, rel_codes, np.broadcast_to(np.asarray(rhs, float), (nrows,)).copy())


def _shape_rows(lp: LinearProgram, h: np.ndarray, n: int, gap: float, diagonal: bool,
                lipschitz: bool = True) -> dict:
    """Monotonicity and Lipschitz rows on the 2-D grid; optionally diagonal-cell monotonicity."""
    N = lp.num_vars
    step = 4.0 / n
    counts = {}
    # theta direction: gap <= h(i, j+1) - h(i, j) <= 4/n
    a = h[:, 1:].ravel()
    b = h[:, :-1].ravel()
    m = a.size
    r = np.repeat(np.arange(m), 2)
    c = np.column_stack([a, b]).ravel()
    v = np.tile([1.0, -1.0], m)
    lp.add_block(_block(r, c, v, m, N, GE, gap))
    counts["monotone"] = m
    if lipschitz:
        lp.add_block(_block(r, c, v, m, N, LE, step))
        counts["lipschitz_theta"] = m
        # tau direction: |h(i+1, j) - h(i, j)| <= 4/n (rows with both ends fixed are trivially true)
        a = h[1:, 1:-1].ravel()
        b = h[:-1, 1:-1].ravel()
        m = a.size
        r = np.repeat(np.arange(m), 2)
        c = np.column_stack([a, b]).ravel()
        v = np.tile([1.0, -1.0], m)
        lp.add_block(_block(r, c, v, m, N, LE, step))
        lp.add_block(_block(r, c, v, m, N, GE, -step))
        counts["lipschitz_tau"] = 2 * m
    if diagonal:
        # the interpolated diagonal is quadratic per cell; nonnegative end slopes
        # make it increasing, so f is well defined
        rows, cols, vals = [], [], []
        k = 0
        for i in range(n):
            d0, off1, off2, d1 = h[i, i], h[i, i + 1], h[i + 1, i], h[i + 1, i + 1]
            rows += [k, k, k]
            cols += [off1, off2, d0]
            vals += [1.0, 1.0, -2.0]
            k += 1
            rows += [k, k, k]
            cols += [d1, off1, off2]
            vals += [2.0, -1.0, -1.0]
            k += 1
        lp.add_block(_block(rows, cols, vals, k, N, GE, gap))
        counts["diagonal_cells"] = k
    return counts


def _add_H_variables(lp: LinearProgram, h: np.ndarray, n: int) -> tuple[np.ndarray, int]:
    """Auxiliary ``H(i, j) = (j/n) h(i, j) - signed trapezoid sum from i to j``.

    Defined through the anchor ``H(i, i) = (i/n) h(i, i)`` and a 4-term
    recurrence along each row, so every defining row stays sparse.
    """
    Hx = np.empty((n + 1, n + 1), dtype=np.int64)
    for i in range(n + 1):
        for j in range(n + 1):
            Hx[i, j] = lp.add_variable(f"H_{i}_{j}", -math.inf, math.inf)
    N = lp.num_vars
    rows, cols, vals = [], [], []
    k = 0
    for i in range(n + 1):
        rows += [k, k]
        cols += [Hx[i, i], h[i, i]]
        vals += [1.0, -i / n]
        k += 1
        for j in range(n):
            # H(i,j+1) - H(i,j) - ((j+1)/n - 1/(2n)) h(i,j+1) + (j/n + 1/(2n)) h(i,j) = 0
            rows += [k, k, k, k]
            cols += [Hx[i, j + 1], Hx[i, j], h[i, j + 1], h[i, j]]
            vals += [1.0, -1.0, -((j + 1) / n - 1 / (2 * n)), j / n + 1 / (2 * n)]
            k += 1
    lp.add_block(_block(rows, cols, vals, k, N, EQ, 0.0))
    return Hx, k


def _H_expression(h: np.ndarray, n: int, i: int, j: int) -> dict:
    """Coefficients of H(i, j) written out over the h variables (i <= j)."""
    coeffs: dict[int, float] = {}

    def add(var, a):
        coeffs[int(var)] = coeffs.get(int(var), 0.0) + a

    add(h[i, j], j / n)
    for y in range(i, j):
        add(h[i, y], -1 / (2 * n))
        add(h[i, y + 1], -1 / (2 * n))
    return coeffs


def _merge(*parts) -> dict:
    out: dict[int, float] = {}
    for coeffs, scale in parts:
        for k, a in coeffs.items():
            out[k] = out.get(k, 0.0) + scale * a
    return out


def _phi1_rows(g: GridLP) -> int:
    """Gamma - H(i, j) <= 1 - j/n - margin for every grid pair i <= j."""
    lp, n = g.lp, g.n
    margin = phi1_margin(n)
    iu, ju = np.triu_indices(n + 1)
    if g.H_index is not None:
        m = iu.size
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([np.full(m, g.gamma_index), g.H_index[iu, ju]]).ravel()
        vals = np.tile([1.0, -1.0], m)
        lp.add_block(_block(rows, cols, vals, m, lp.num_vars, LE, 1 - ju / n - margin))
    else:
        rows = []
        for i, j in zip(iu.tolist(), ju.tolist()):
            coeffs = _merge(({g.gamma_index: 1.0}, 1.0), (_H_expression(g.h_index, n, i, j), -1.0))
            rows.append((coeffs, LE, 1 - j / n - margin))
        lp.add_rows(rows)
    return int(iu.size)


def phi2_tuples(n: int):
    """Yield the grid four-tuples ``(iu, ju, iv, jv)`` with iu <= ju, n - ju <= iv <= jv."""
    for iu in range(n + 1):
        for ju in range(iu, n + 1):
            for iv in range(n - ju, n + 1):
                for jv in range(iv, n + 1):
                    yield iu, ju, iv, jv


def count_phi2_tuples(n: int) -> int:
    # for fixed ju, iv ranges over n-ju..n and jv over iv..n: sum_{s=1}^{ju+1} s
    return sum((ju + 1) * (ju + 1) * (ju + 2) // 2 for ju in range(n + 1))


def _phi2_row_arrays(g: GridLP, tuples: np.ndarray) -> RowBlock:
    """Rows ``Gamma - H_u - H_v + (1 - jv/n) h(iu, ju) <= 1 - jv/n - margin`` (aux-H form)."""
    n = g.n
    iu, ju, iv, jv = tuples.T
    m = tuples.shape[0]
    w = 1 - jv / n
    rows = np.repeat(np.arange(m), 4)
    cols = np.column_stack([np.full(m, g.gamma_index), g.H_index[iu, ju], g.H_index[iv, jv],
                            g.h_index[iu, ju]]).ravel()
    vals = np.column_stack([np.ones(m), -np.ones(m), -np.ones(m), w]).ravel()
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, g.lp.num_vars))  # duplicates are summed
    return RowBlock(mat, np.zeros(m, np.int8), w - phi2_margin(n))


def _phi2_rows_full(g: GridLP) -> int:
    n = g.n
    if g.H_index is not None:
        tuples = np.array(list(phi2_tuples(n)), dtype=np.int64)
        g.lp.add_block(_phi2_row_arrays(g, tuples))
        return len(tuples)
    rows = []
    Hexpr = {}
    for iu, ju, iv, jv in phi2_tuples(n):
        for key in ((iu, ju), (iv, jv)):
            if key not in Hexpr:
                Hexpr[key] = _H_expression(g.h_index, n, *key)
        w = 1 - jv / n
        coeffs = _merge(({g.gamma_index: 1.0}, 1.0), (Hexpr[iu, ju], -1.0), (Hexpr[iv, jv], -1.0),
                        ({int(g.h_index[iu, ju]): 1.0}, w))
        rows.append((coeffs, LE, w - phi2_margin(n)))
    g.lp.add_rows(rows)
    return len(rows)


# -- builders ---------------------------------------------------------------

def _new_grid_lp(family: Family, n: int, use_auxiliary_H: bool, gap: float, name: str,
                 lipschitz: bool = True) -> GridLP:
    lp = LinearProgram("max", name)
    h = _add_grid_variables(lp, n)
    gamma = lp.add_variable("Gamma", -math.inf, math.inf)
    lp.set_objective({gamma: 1.0})
    g = GridLP(lp, family, n, h, gamma)
    g.counts.update(_shape_rows(lp, h, n, gap, diagonal=True, lipschitz=lipschitz))
    if use_auxiliary_H:
        g.H_index, g.counts["H_definitions"] = _add_H_variables(lp, h, n)
    return g


def build_fully_online_lp(n: int, use_auxiliary_H: bool = True, include_phi2: bool = True,
                          monotone_gap: float = MONOTONE_GAP) -> GridLP:
    """The full LP; with ``include_phi2=False`` it is the master for row generation."""
    if n < 4:
        raise ValueError("n must be at least 4")
    g = _new_grid_lp(Family.FULLY, n, use_auxiliary_H, monotone_gap, f"fully_online_n{n}")
    g.counts["phi1"] = _phi1_rows(g)
    g.counts["phi2"] = _phi2_rows_full(g) if include_phi2 else 0
    return g


def build_general_arrival_lp(n: int, use_auxiliary_H: bool = True, monotone_gap: float = MONOTONE_GAP,
                             lipschitz: bool = True) -> GridLP:
    """Rows ``Gamma <= H(i, j) + (1 - j/n) h(n-j, n-j) - margin``, plus (i/n) h(i, i) increasing."""
    if n < 4:
        raise ValueError("n must be at least 4")
    g = _new_grid_lp(Family.GENERAL, n, use_auxiliary_H, monotone_gap, f"general_arrival_n{n}", lipschitz)
    lp, h = g.lp, g.h_index
    margin = phi1_margin(n)
    rows = []
    for i in range(n + 1):
        for j in range(i, n + 1):
            w = 1 - j / n
            Hc = {int(g.H_index[i, j]): 1.0} if g.H_index is not None else _H_expression(h, n, i, j)
            coeffs = _merge(({g.gamma_index: 1.0}, 1.0), (Hc, -1.0), ({int(h[n - j, n - j]): 1.0}, -w))
            rows.append((coeffs, LE, -margin))
    lp.add_rows(rows)
    g.counts["phi_general"] = len(rows)
    rows = [({int(h[i + 1, i + 1]): (i + 1) / n, int(h[i, i]): -i / n}, GE, monotone_gap) for i in range(n)]
    lp.add_rows(rows)
    g.counts["weighted_diagonal"] = len(rows)
    # The objective reads h on the diagonal between grid points, where the bilinear
    # interpolant is quadratic. Keeping it above its chord stops the LP from
    # hiding a dip between grid points.
    rows = [({int(h[i, i + 1]): 1.0, int(h[i + 1, i]): 1.0, int(h[i, i]): -1.0, int(h[i + 1, i + 1]): -1.0},
             GE, 0.0) for i in range(n)]
    lp.add_rows(rows)
    g.counts["diagonal_chord"] = len(rows)
    return g


def build_naive_lp(n: int, monotone_gap: float = MONOTONE_GAP) -> GridLP:
    """One-dimensional h with rows over all i_v <= j_v and i_u >= n - j_v.

    Prefix variables ``P(k) = sum_{y<k} (h(y) + h(y+1)) / (2n)`` keep each row at five terms.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    lp = LinearProgram("max", f"naive_one_dim_n{n}")
    h = np.array([lp.add_variable(f"h_{k}", *((0.0, 0.0) if k == 0 else (1.0, 1.0) if k == n else (0.0, 1.0)))
                  for k in range(n + 1)])
    gamma = lp.add_variable("Gamma", -math.inf, math.inf)
    P = np.array([lp.add_variable(f"P_{k}", -math.inf, math.inf) for k in range(n + 1)])
    lp.set_objective({gamma: 1.0})
    g = GridLP(lp, Family.NAIVE, n, h, gamma, P_index=P)
    lp.add_constraint({int(P[0]): 1.0}, EQ, 0.0)
    for k in range(n):
        lp.add_constraint({int(P[k + 1]): 1.0, int(P[k]): -1.0, int(h[k]): -1 / (2 * n),
                           int(h[k + 1]): -1 / (2 * n)}, EQ, 0.0)
    for k in range(n):
        lp.add_constraint({int(h[k + 1]): 1.0, int(h[k]): -1.0}, GE, monotone_gap)
        lp.add_constraint({int(h[k + 1]): (k + 1) / n, int(h[k]): -k / n}, GE, monotone_gap)
    g.counts["monotone"] = 2 * n
    margin = phi1_margin(n)
    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for iv in range(n + 1):
        for jv in range(iv, n + 1):
            for iu in range(n - jv, n + 1):
                # Gamma - (jv/n) h(jv) + P(jv) - P(iv) - (iu/n) h(iu) <= -margin
                terms = [(gamma, 1.0), (h[jv], -jv / n), (P[jv], 1.0), (P[iv], -1.0), (h[iu], -iu / n)]
                for c, a in terms:
                    rows.append(r)
                    cols.append(int(c))
                    vals.append(a)
                rhs.append(-margin)
                r += 1
    lp.add_block(_block(rows, cols, vals, r, lp.num_vars, LE, np.asarray(rhs)))
    g.counts["naive_rows"] = r
    return g


def build_lp(spec: FactorLPSpec) -> GridLP:
    if spec.family is Family.FULLY:
        return build_fully_online_lp(spec.n, spec.use_auxiliary_H, include_phi2=not spec.use_row_generation,
                                     monotone_gap=spec.monotone_gap)
    if spec.family is Family.GENERAL:
        return build_general_arrival_lp(spec.n, spec.use_auxiliary_H, spec.monotone_gap, lipschitz=spec.lipschitz)
    return build_naive_lp(spec.n, spec.monotone_gap)


# -- separation -------------------------------------------------------------

def phi2_violations(h: np.ndarray, gamma: float, n: int, limit: int = CUTS_PER_ROUND,
                    tol: float = SEPARATION_TOL) -> np.ndarray:
    """The ``limit`` most violated four-tuples for grid values ``h`` at ratio ``gamma``.

    The scan is blocked by ``(iu, ju)``; each block is a vectorised pass over
    all ``(iv, jv)`` pairs. Returns an ``(m, 4)`` array ordered by decreasing
    violation (ties by tuple order).
    """
    H = H_grid(HGrid(n, h, validate=False))
    jgrid = np.arange(n + 1)
    iv_all, jv_all = np.triu_indices(n + 1)
    Hv = H[iv_all, jv_all]
    wv = 1 - jv_all / n
    threshold = gamma + phi2_margin(n) - tol
    best_viol = np.empty(0)
    best_tup = np.empty((0, 4), dtype=np.int64)
    for iu in range(n + 1):
        for ju in range(iu, n + 1):
            sel = iv_all >= n - ju
            value = H[iu, ju] + Hv[sel] + (1 - h[iu, ju]) * wv[sel]
            bad = np.flatnonzero(value < threshold)
            if bad.size == 0:
                continue
            viol = threshold + tol - value[bad]
            if bad.size > limit:
                keep = np.argpartition(-viol, limit - 1)[:limit]
                bad, viol = bad[keep], viol[keep]
            tup = np.column_stack([np.full(bad.size, iu), np.full(bad.size, ju),
                                   iv_all[sel][bad], jv_all[sel][bad]])
            best_viol = np.concatenate([best_viol, viol])
            best_tup = np.vstack([best_tup, tup])
            if best_viol.size > 4 * limit:
                keep = np.argpartition(-best_viol, limit - 1)[:limit]
                best_viol, best_tup = best_viol[keep], best_tup[keep]
    del jgrid
    if best_viol.size == 0:
        return best_tup
    # deterministic order: by violation, then by tuple
    order = np.lexsort((best_tup[:, 3], best_tup[:, 2], best_tup[:, 1], best_tup[:, 0], -best_viol))
    return best_tup[order[:limit]]


# -- solve ------------------------------------------------------------------

@dataclass
class FactorLPResult:
    spec: FactorLPSpec
    gamma: float
    grid: Optional[HGrid]
    h_values: np.ndarray
    constraint_counts: dict
    solve_seconds: float
    rounds: int = 1
    status: str = "optimal"

    def certificate(self, num_samples: int = 100_000, seed: int = 0) -> dict:
        fam = self.spec.family
        cert = {
            "family": fam.value,
            "n": self.spec.n,
            "gamma": self.gamma,
            "constraint_counts": self.constraint_counts,
            "rounds": self.rounds,
            "margins": {"pair": phi1_margin(self.spec.n)},
        }
        if fam is Family.FULLY:
            cert["margins"]["four_tuple"] = phi2_margin(self.spec.n)
        if fam is Family.GENERAL:
            cert["notes"] = ["pair margin transferred from the fully-online analysis; "
                             "the sampled minimum below is the authoritative check"]
        if fam is Family.NAIVE:
            cert["min_phi_samples"] = None
            cert["pass"] = not naive_violations(self.h_values)
            return cert
        rep = certify_continuous_feasibility(self.grid, self.gamma, num_samples=num_samples, seed=seed,
                                             family="fully" if fam is Family.FULLY else "general")
        cert["min_phi_samples"] = {k: v for k, v in rep.to_dict().items()
                                   if k.startswith("min_") and v is not None}
        cert["num_samples"] = num_samples
        cert["pass"] = rep.passed
        return cert


def naive_violations(h: np.ndarray, tol: float = 1e-6) -> list[str]:
    n = h.size - 1
    out = []
    if abs(h[0]) > tol or abs(h[n] - 1) > tol:
        out.append("boundary values")
    if np.any(np.diff(h) <= 0):
        out.append("h not strictly increasing")
    t = np.arange(n + 1) / n
    if np.any(np.diff(t * h) < -tol):
        out.append("tau * h(tau) not increasing")
    return out


def _snap_boundary(values: np.ndarray) -> np.ndarray:
    v = np.clip(values, 0.0, 1.0)
    v[..., 0] = 0.0
    v[..., -1] = 1.0
    return v


def solve_factor_lp(spec: FactorLPSpec, on_round=None) -> FactorLPResult:
    g = build_lp(spec)
    t0 = time.perf_counter()
    if spec.use_row_generation:
        added = {"phi2": 0}

        def separator(sol: LPSolution):
            tuples = phi2_violations(np.clip(g.h_of(sol), 0.0, 1.0), g.gamma_of(sol), spec.n)
            added["phi2"] += len(tuples)
            return _phi2_row_arrays(g, tuples) if len(tuples) else None

        sol = solve_with_row_generation(g.lp, separator, max_rounds=spec.max_rounds, backend=spec.backend,
                                        on_round=on_round)
        g.counts["phi2"] = added["phi2"]
        g.counts["phi2_total_tuples"] = count_phi2_tuples(spec.n)
        rounds = sol.rounds
    else:
        sol = solve(g.lp, backend=spec.backend)
        rounds = 1
    seconds = time.perf_counter() - t0
    if not sol.optimal:
        return FactorLPResult(spec, math.nan, None, np.empty(0), dict(g.counts), seconds, rounds, sol.status)
    gamma = g.gamma_of(sol)
    status = "optimal"
    values = _snap_boundary(g.h_of(sol))
    if spec.family is Family.NAIVE:
        problems = naive_violations(values)
        if problems:
            raise GridError("solved one-dimensional h fails re-validation: " + "; ".join(problems))
        grid = HGrid(spec.n, np.tile(values, (spec.n + 1, 1)), validate=False)
    elif not spec.lipschitz:
        grid = HGrid(spec.n, values, validate=False)
        g.counts["grid_violations"] = len(grid_violations(grid))
        status = "optimal-unvalidated"
    else:
        grid = HGrid(spec.n, values, validate=False)
        problems = grid_violations(grid)
        if problems:
            raise GridError("solved grid fails re-validation: " + "; ".join(problems))
        grid = HGrid(spec.n, values)
        if not diagonal_cells_monotone(grid):
            raise GridError("solved grid has a non-increasing diagonal")
    counts = dict(g.counts)
    counts["variables"] = g.lp.num_vars
    counts["rows"] = g.lp.num_rows + (counts.get("phi2", 0) if spec.use_row_generation else 0)
    return FactorLPResult(spec, gamma, grid, values, counts, seconds, rounds, status)


def save_result(result: FactorLPResult, grid_path, certificate_path=None, certificate: Optional[dict] = None):
    if result.spec.family is Family.NAIVE:
        Path(grid_path).write_text(json.dumps({"n": result.spec.n, "values_1d": result.h_values.tolist(),
                                               **result.grid.to_dict()}) + "\n")
    else:
        result.grid.save(grid_path)
    if certificate_path is not None:
        Path(certificate_path).write_text(json.dumps(certificate or result.certificate(), indent=2,
                                                     sort_keys=True) + "\n")
