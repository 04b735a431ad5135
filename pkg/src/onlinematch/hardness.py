"""Hard instances for fractional online matching and the numerics that bound them.

Two constructions live here.

Fully online: ``ell`` stages, each made of four groups A, B, C, D. A/B form an
upper triangle, A-C is complete, C is complete to D and to the next stage's
B and C. Water-filling on this instance converges to a closed-form ratio
that is minimised near alpha = 0.43.

General arrival: an adaptive three-stage adversary (complete bipartite
first stage, least-matched blocks in the second, upper triangles in the
third) plus the one-dimensional recursion that bounds any algorithm against it.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .algorithms import Algorithm, ModelMismatchError, RunConfig, RunReport, Simulator, run_fully_online
from .model import Event, InstanceScript, Model, apply_match, primal_dual_report

ROOT_XTOL = 1e-12
P1_TOL = 1e-9


# ---------------------------------------------------------------------------
# fully online: closed form and recurrence
# ---------------------------------------------------------------------------

def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    return alpha


def fully_fixed_point(alpha: float) -> float:
    """Limit water level of B/C at the start of a stage as n and ell grow."""
    alpha = _check_alpha(alpha)
    return (1.0 - alpha) / (3.0 - 2.0 * alpha) * (1.0 + math.log1p(-alpha))


def fully_ratio_closed_form(alpha: float) -> float:
    alpha = _check_alpha(alpha)
    return alpha + (2.0 - alpha) * (1.0 - alpha) / (3.0 - 2.0 * alpha) * (1.0 + math.log1p(-alpha))


@dataclass(frozen=True)
class MinimizeResult:
    alpha_star: float
    value: float
    iterations: int


def fully_minimize_ratio(tolerance: float = 1e-6, bracket: tuple[float, float] = (0.0, 0.9)) -> MinimizeResult:
    """Minimise the closed-form ratio over alpha inside ``bracket``."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    res = minimize_scalar(fully_ratio_closed_form, bounds=bracket, method="bounded",
                          options={"xatol": tolerance})
    return MinimizeResult(float(res.x), float(res.fun), int(res.nfev))


def split_sizes(n: int, alpha: float) -> tuple[int, int]:
    """Sizes of the A/B groups and the C/D groups for group size ``n``."""
    a = int(round(alpha * n))
    return a, n - a


def harmonic_tail(n: int, alpha: float) -> float:
    """``sum_{i=c+1}^{n} 1/i`` with ``c`` the size of the C group."""
    _, c = split_sizes(n, alpha)
    return math.fsum(1.0 / i for i in range(c + 1, n + 1))


@dataclass(frozen=True)
class RecurrenceResult:
    x_sequence: list[float]
    per_stage_ratios: list[float]
    limit_ratio: float


def fully_recurrence(n: int, ell: int, alpha: float, harmonic: Optional[float] = None) -> RecurrenceResult:
    """Iterate the stage-to-stage water level of water-filling on the fully online instance.

    ``x_sequence`` holds x_1..x_{ell+1}; stage k contributes alpha + (2-alpha) x_{k+1}.
    ``harmonic`` overrides the finite partial sum (pass ``-log(1-alpha)`` for the limit).
    """
    alpha = _check_alpha(alpha)
    if n < 1 or ell < 1:
        raise ValueError("n and ell must be positive")
    tail = harmonic_tail(n, alpha) if harmonic is None else float(harmonic)
    shrink = (1.0 - alpha) / (2.0 - alpha)
    xs = [0.0]
    ratios = []
    for _ in range(ell):
        y = xs[-1] + tail
        xs.append((1.0 - y) * shrink)
        ratios.append(alpha + (2.0 - alpha) * xs[-1])
    return RecurrenceResult(xs, ratios, ratios[-1])


# ---------------------------------------------------------------------------
# fully online: instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FullyHardParams:
    n: int
    ell: int
    alpha: float

    def __post_init__(self):
        if self.n < 1 or self.ell < 1:
            raise ValueError("n and ell must be positive")
        _check_alpha(self.alpha)

    @property
    def sizes(self) -> tuple[int, int]:
        return split_sizes(self.n, self.alpha)


@dataclass
class FullyHardInstance:
    params: FullyHardParams
    script: InstanceScript
    groups: dict[str, list[list[int]]]

    def perfect_matching(self) -> list[tuple[int, int]]:
        """A_k-B_k and C_k-D_k paired index by index; size n * ell."""
        pairs = []
        for k in range(self.params.ell):
            pairs += zip(self.groups["A"][k], self.groups["B"][k])
            pairs += zip(self.groups["C"][k], self.groups["D"][k])
        return pairs


def fully_instance_layout(params: FullyHardParams) -> FullyHardInstance:
    """Build the staged fully online instance, keeping the vertex ids of every group."""
    na, nc = params.sizes
    events: list[Event] = []
    groups: dict[str, list[list[int]]] = {g: [] for g in "ABCD"}
    next_id = 0

    def arrive_block(size: int, neighbors: tuple[int, ...]) -> list[int]:
        nonlocal next_id
        ids = list(range(next_id, next_id + size))
        for v in ids:
            events.append(Event.arrival(v, neighbors))
        next_id += size
        return ids

    B = arrive_block(na, ())
    C = arrive_block(nc, ())
    for k in range(params.ell):
        groups["B"].append(B)
        groups["C"].append(C)
        A = []
        for i in range(na):
            a = next_id
            next_id += 1
            events.append(Event.arrival(a, tuple(B[i:]) + tuple(C)))
            events.append(Event.deadline(a))
            A.append(a)
        groups["A"].append(A)
        events.extend(Event.deadline(b) for b in B)
        last = k == params.ell - 1
        c_tuple = tuple(C)
        D = arrive_block(nc, c_tuple)
        groups["D"].append(D)
        if not last:
            B = arrive_block(na, c_tuple)
            C_next = arrive_block(nc, c_tuple)
        events.extend(Event.deadline(c) for c in C)
        events.extend(Event.deadline(d) for d in D)
        if not last:
            C = C_next
    return FullyHardInstance(params, InstanceScript(Model.FULLY, events, bipartite_hint=True), groups)


def build_fully_instance(params: FullyHardParams) -> InstanceScript:
    return fully_instance_layout(params).script


def simulate_fully_hardness(params: FullyHardParams, algo: Optional[Algorithm] = None,
                            config: RunConfig = RunConfig(step=1e-3)) -> RunReport:
    """Run ``algo`` (water-filling by default) on the instance; the optimum n * ell is known."""
    algo = algo or Algorithm.water_filling()
    script = build_fully_instance(params)
    return run_fully_online(script, algo, config, offline_opt=float(params.n * params.ell), validate=False)


# ---------------------------------------------------------------------------
# upper triangles
# ---------------------------------------------------------------------------

def triangle_bound(a: float) -> float:
    """Most any algorithm gains per base vertex from an upper triangle over base vertices at level ``a``."""
    a = float(a)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"prefill must lie in [0, 1], got {a}")
    return 1.0 - math.exp(a - 1.0)


def _least_matched(x: np.ndarray, alive: list[int]) -> int:
    """Position in ``alive`` of the least-matched vertex; ties go to the smaller id."""
    levels = x[alive]
    return int(np.flatnonzero(levels == levels.min())[0])


def _triangle(sim: Simulator, base: list[int]) -> list[int]:
    """Release an adaptive upper triangle over ``base``; returns the triangle vertex ids."""
    alive = list(base)
    out = []
    for _ in range(len(base)):
        out.append(sim.arrive(alive))
        del alive[_least_matched(sim.state._x, alive)]
    return out


def simulate_upper_triangle(k: int, prefill: float, algo: Optional[Algorithm] = None,
                            config: RunConfig = RunConfig()) -> float:
    """Total matching made by the k arrivals of an adaptive upper triangle in the general arrival model.

    Each base vertex starts at level ``prefill``, matched to a private dummy
    partner that never meets the triangle.
    """
    triangle_bound(prefill)
    if k < 1:
        raise ValueError("k must be positive")
    algo = algo or Algorithm.water_filling()
    sim = Simulator(algo, Model.GENERAL, config, capacity=3 * k)
    base = [sim.arrive(()) for _ in range(k)]
    if prefill > 0:
        for b in base:
            dummy = sim.arrive(())
            apply_match(sim.state, dummy, b, prefill, 0.5)
    tri = _triangle(sim, base)
    return float(sim.state._x[tri].sum())


# ---------------------------------------------------------------------------
# general arrival: alpha/beta recursion and sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneralHardParams:
    n: int
    k: int
    gamma: float
    capital_gamma: float

    def __post_init__(self):
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be positive")
        if (self.n * self.k) % 2:
            raise ValueError("n * k must be even so the first stage is a balanced complete bipartite graph")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")


@dataclass(frozen=True)
class AlphaBetaSolution:
    gamma: float
    alphas: list[float]
    betas: list[float]
    ratio: float
    capital_gamma: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.alphas)


def solve_alpha_beta(n: int, capital_gamma: float, gamma: float) -> AlphaBetaSolution:
    """Block levels after the second stage when the algorithm stops each B_i at the triangle threshold.

    Step i solves ``exp(alpha_{i-1} + x/(n-i+1) - 1) + exp(x - 1) = 2 - capital_gamma``
    for x > 0 (zero when the left side already exceeds the target at x = 0).
    Pouring beta_i evenly into the n-i+1 remaining blocks raises their level by
    beta_i/(n-i+1); this is what keeps every prefix constraint tight.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 < capital_gamma <= 1.0:
        raise ValueError("capital_gamma must lie in (0, 1]")
    if not capital_gamma <= gamma <= 1.0:
        raise ValueError("gamma must lie in [capital_gamma, 1]")
    target = 2.0 - capital_gamma
    prev = float(gamma)
    alphas, betas = [], []
    for i in range(1, n + 1):
        rest = n - i + 1

        def gap(x: float) -> float:
            return math.exp(prev + x / rest - 1.0) + math.exp(x - 1.0) - target

        if gap(0.0) >= 0.0:
            x = 0.0
        else:
            # exp(x - 1) alone reaches the target at 1 + log(target)
            x = brentq(gap, 0.0, 1.0 + math.log(target), xtol=ROOT_XTOL)
        beta = min(x, rest * (1.0 - prev), 1.0)
        beta = max(beta, 0.0)
        prev = prev + beta / rest
        alphas.append(prev)
        betas.append(beta)
    ratio = (n * gamma + 2.0 * math.fsum(betas)) / (2.0 * n)
    return AlphaBetaSolution(float(gamma), alphas, betas, ratio, float(capital_gamma))


@dataclass
class SweepResult:
    n: int
    capital_gamma: float
    grid_step: float
    r_curve: list[tuple[float, float]]
    max_r: float
    argmax_gamma: float
    passed: bool
    slope_at_start: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r_curve"] = [list(p) for p in self.r_curve]
        return d


def _sweep_point(args) -> float:
    n, cg, g = args
    return solve_alpha_beta(n, cg, g).ratio


def sweep_grid(capital_gamma: float, grid_step: float) -> np.ndarray:
    """``capital_gamma, capital_gamma + step, ...`` up to and including 1."""
    count = int(math.floor((1.0 - capital_gamma) / grid_step + 1e-9)) + 1
    grid = capital_gamma + grid_step * np.arange(count)
    if grid[-1] < 1.0 - 1e-12:
        grid = np.append(grid, 1.0)
    return np.minimum(grid, 1.0)


def general_hardness_sweep(n: int, capital_gamma: float, grid_step: float = 1e-3,
                           workers: int = 1) -> SweepResult:
    """Evaluate r(gamma) on a grid over [capital_gamma, 1]; passes iff r stays below capital_gamma."""
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    grid = sweep_grid(capital_gamma, grid_step).tolist()
    tasks = [(n, capital_gamma, g) for g in grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rs = list(pool.map(_sweep_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rs = [_sweep_point(t) for t in tasks]
    best = int(np.argmax(rs))
    slope = (rs[1] - rs[0]) / (grid[1] - grid[0]) if len(grid) > 1 else 0.0
    return SweepResult(n, float(capital_gamma), float(grid_step), list(zip(grid, rs)), float(rs[best]),
                       float(grid[best]), bool(rs[best] < capital_gamma), float(slope))


def write_sweep_csv(result: SweepResult, path) -> None:
    """Columns: ``gamma`` (first-stage level) and ``r`` (ratio after the second stage)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["gamma", "r"])
        for g, r in result.r_curve:
            w.writerow([repr(g), repr(r)])


@dataclass
class P1Report:
    gamma_slack: float
    prefix_slacks: list[float]
    total_slack: float
    ratio_slack: float
    ratio_slack_with_triangles: float
    bounds_ok: bool
    alphas_nondecreasing: bool
    betas_nonincreasing: bool
    violations: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        """Every structural constraint holds; the ratio constraint is reported separately."""
        return not self.violations

    @property
    def max_prefix_gap(self) -> float:
        return max((abs(s) for s in self.prefix_slacks), default=0.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feasible"] = self.feasible
        return d


def check_p1_constraints(sol: AlphaBetaSolution, capital_gamma: float, tol: float = P1_TOL) -> P1Report:
    """Slack of every constraint of the block-level program for ``sol``.

    Structural constraints (start level, prefix bounds, total balance, [0, 1]
    bounds, monotone alphas and betas) populate ``violations``. The ratio
    constraint sum(alpha + beta) >= 2 * capital_gamma * n holds exactly when
    the algorithm survives the instance, so it is reported as a slack only.
    """
    a = np.asarray(sol.alphas, dtype=float)
    b = np.asarray(sol.betas, dtype=float)
    n = a.size
    g = float(sol.gamma)
    out: list[str] = []
    gamma_slack = g - capital_gamma
    if gamma_slack < -tol:
        out.append(f"gamma {g} below target {capital_gamma}")
    # sum_{j<i} alpha_j + (n-i+1) alpha_i <= sum_{j<=i} beta_j + n gamma
    prefix_a = np.concatenate([[0.0], np.cumsum(a)[:-1]])
    rest = n - np.arange(n)
    prefix = np.cumsum(b) + n * g - (prefix_a + rest * a)
    for i in np.flatnonzero(prefix < -tol):
        out.append(f"prefix constraint {i + 1} violated by {-prefix[i]:.3g}")
    total = math.fsum(a) - n * g - math.fsum(b)
    if total < -tol:
        out.append(f"total balance violated by {-total:.3g}")
    bounds_ok = bool(np.all((a >= -tol) & (a <= 1 + tol) & (b >= -tol) & (b <= 1 + tol)))
    if not bounds_ok:
        out.append("levels outside [0, 1]")
    a_mono = bool(np.all(np.diff(a) >= -tol))
    b_mono = bool(np.all(np.diff(b) <= tol))
    if not a_mono:
        out.append("alphas are not nondecreasing")
    if not b_mono:
        out.append("betas are not nonincreasing")
    lhs = math.fsum(a) + math.fsum(b)
    penalty = math.fsum(max(0.0, capital_gamma - (1 - math.exp(x - 1)) - (1 - math.exp(y - 1)))
                        for x, y in zip(a, b))
    return P1Report(gamma_slack, prefix.tolist(), total, lhs - 2 * capital_gamma * n,
                    lhs - 2 * capital_gamma * n - 2 * penalty, bounds_ok, a_mono, b_mono, out)


# ---------------------------------------------------------------------------
# general arrival: adaptive adversary
# ---------------------------------------------------------------------------

@dataclass
class AdversaryResult:
    observed_ratio: float
    stage_stopped: int
    gamma_observed: float
    alphas: list[float]
    betas: list[float]
    triangle_blocks: list[int]
    primal: float
    dual: float
    offline_opt: float
    error_budget: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def run_adaptive_general_adversary(params: GeneralHardParams, algo: Algorithm,
                                   config: RunConfig = RunConfig(),
                                   simulator_factory: Optional[Callable[..., Simulator]] = None) -> AdversaryResult:
    """Play the three-stage adaptive instance against ``algo`` in the general arrival model.

    Stage 1: n*k vertices form a balanced complete bipartite graph; stop if
    the average level falls below ``params.capital_gamma``.
    Stage 2: blocks B_1..B_n of k vertices each see every A vertex not yet
    assigned to a block; after B_i, the k least-matched of them become A_i.
    Stage 3: for every i with triangle_bound(alpha_i) + triangle_bound(beta_i)
    below the target, upper triangles are released over A_i and over B_i.
    The optimum is a perfect matching on everything that arrived.
    """
    if algo.model is Model.FULLY:
        raise ModelMismatchError(f"{algo.name} is a fully online algorithm")
    n, k = params.n, params.k
    make = simulator_factory or Simulator
    sim = make(algo, Model.GENERAL, config, capacity=4 * n * k)
    x = sim.state._x
    half = n * k // 2
    left = [sim.arrive(()) for _ in range(half)]
    right = [sim.arrive(left) for _ in range(half)]
    A_all = left + right
    x = sim.state._x
    gamma_obs = float(x[A_all].mean())
    budget = 1.0 / k + config.step

    def result(stage: int, opt: float, alphas, betas, blocks) -> AdversaryResult:
        rep = primal_dual_report(sim.state, 0.0)
        return AdversaryResult(rep.P / opt if opt > 0 else 0.0, stage, gamma_obs, alphas, betas, blocks,
                               rep.P, rep.D, opt, budget)

    if gamma_obs < params.capital_gamma:
        return result(1, float(half), [], [], [])

    remaining = list(A_all)
    A_blocks, B_blocks = [], []
    for _ in range(n):
        B = [sim.arrive(remaining) for _ in range(k)]
        x = sim.state._x
        order = np.lexsort((np.asarray(remaining), x[remaining]))
        chosen = {remaining[j] for j in order[:k]}
        A_blocks.append(sorted(chosen))
        B_blocks.append(B)
        remaining = [v for v in remaining if v not in chosen]
    x = sim.state._x
    alphas = [float(x[blk].mean()) for blk in A_blocks]
    betas = [float(x[blk].mean()) for blk in B_blocks]
    chosen_blocks = [i for i in range(n)
                     if triangle_bound(min(alphas[i], 1.0)) + triangle_bound(min(betas[i], 1.0))
                     < params.capital_gamma]
    for i in chosen_blocks:
        _triangle(sim, A_blocks[i])
        _triangle(sim, B_blocks[i])
    opt = float((n + len(chosen_blocks)) * k)
    return result(3, opt, alphas, betas, chosen_blocks)
