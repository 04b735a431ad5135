"""Online fractional matching algorithms as a discretised continuous-matching simulator.

Continuous water-filling is approximated by steps of size ``RunConfig.step``.
The cheapest neighbor is re-selected after every step, with ties broken by
the smaller vertex id. Each step's price is read at the start of the step,
and the dual split uses that same price, so primal equals dual exactly.
"""

from __future__ import annotations

import csv
import json
import math
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernel as K
from .lp import offline_fractional_optimum
from .model import (EventKind, InstanceScript, MatchingState, Model, ScriptValidationError,
                    primal_dual_report, validate_script)
from .pricing import H_value, PriceSystem


class AlgorithmKind(str, Enum):
    GREEDY = "Greedy"
    WATER_FILLING = "WaterFilling"
    EAGER = "EagerWaterFilling"
    HISTORY_FULLY = "HistoryPricingFully"
    HISTORY_GENERAL = "HistoryPricingGeneral"


_MODE = {
    AlgorithmKind.GREEDY: K.GREEDY,
    AlgorithmKind.WATER_FILLING: K.WATER,
    AlgorithmKind.EAGER: K.EAGER,
    AlgorithmKind.HISTORY_FULLY: K.HISTORY,
    AlgorithmKind.HISTORY_GENERAL: K.HISTORY,
}


@dataclass(frozen=True)
class Algorithm:
    kind: AlgorithmKind
    prices: Optional[PriceSystem] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AlgorithmKind(self.kind))
        needs = self.kind in (AlgorithmKind.EAGER, AlgorithmKind.HISTORY_FULLY, AlgorithmKind.HISTORY_GENERAL)
        if needs and not isinstance(self.prices, PriceSystem):
            raise TypeError(f"{self.kind.value} needs a PriceSystem")

    @classmethod
    def greedy(cls) -> "Algorithm":
        return cls(AlgorithmKind.GREEDY)

    @classmethod
    def water_filling(cls) -> "Algorithm":
        return cls(AlgorithmKind.WATER_FILLING)

    @classmethod
    def eager(cls, f_inverse_values) -> "Algorithm":
        """Eager water-filling with price f(x), f given by its inverse on a uniform grid."""
        ps = f_inverse_values if isinstance(f_inverse_values, PriceSystem) else \
            PriceSystem.from_f_inverse(f_inverse_values)
        return cls(AlgorithmKind.EAGER, ps)

    @classmethod
    def history_fully(cls, prices: PriceSystem) -> "Algorithm":
        return cls(AlgorithmKind.HISTORY_FULLY, prices)

    @classmethod
    def history_general(cls, prices: PriceSystem) -> "Algorithm":
        return cls(AlgorithmKind.HISTORY_GENERAL, prices)

    @property
    def model(self) -> Optional[Model]:
        """The model the algorithm is tied to; None if it runs in both."""
        if self.kind is AlgorithmKind.HISTORY_FULLY:
            return Model.FULLY
        if self.kind is AlgorithmKind.HISTORY_GENERAL:
            return Model.GENERAL
        return None

    @property
    def name(self) -> str:
        return self.kind.value


class ModelMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    step: float = 1e-4
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if not 0 < self.step <= 1e-2:
            raise ValueError("step must lie in (0, 1e-2]")


@dataclass
class Snapshot:
    event_index: int
    kind: str
    vertex: int
    x_level: np.ndarray
    a_level: np.ndarray
    alpha: np.ndarray


class Simulator:
    """Incremental event processor; the adaptive adversaries drive it directly."""

    def __init__(self, algo: Algorithm, model: Model, config: RunConfig = RunConfig(), capacity: int = 64):
        model = Model(model)
        if algo.model is not None and algo.model is not model:
            raise ModelMismatchError(f"{algo.name} runs in the {algo.model.value} model, not {model.value}")
        self.algo = algo
        self.model = model
        self.config = config
        self.mode = _MODE[algo.kind]
        self.state = MatchingState(capacity)
        # per-vertex neighbor ids and edge ids; sorted because later arrivals have larger ids
        self._nbrs: list[array] = []
        self._eids: list[array] = []
        self._departed = np.zeros(self.state._x.size, dtype=np.bool_)
        self._slot = np.zeros(self.state._x.size, dtype=np.int64)
        ps = algo.prices
        if ps is not None:
            v = ps.grid.values
            self._n = ps.grid.n
            self._values = np.ascontiguousarray(v)
            self._diag = np.ascontiguousarray(ps.diagonal)
            self._offsum = np.array([v[i, i + 1] + v[i + 1, i] for i in range(self._n)])
            self._a_independent = ps.a_independent
        else:
            self._n = 1
            self._values = np.array([[0.0, 1.0], [0.0, 1.0]])
            self._diag = np.array([0.0, 1.0])
            self._offsum = np.array([1.0])
            self._a_independent = True
        width = self._n + 1 if self.mode == K.HISTORY else 2
        self._rows = np.zeros((self.state._x.size, width))

    # -- storage -----------------------------------------------------------
    def _grow(self, v: int) -> None:
        self.state.ensure_vertex(v)
        cap = self.state._x.size
        if self._departed.size < cap:
            extra = cap - self._departed.size
            self._departed = np.concatenate([self._departed, np.zeros(extra, dtype=np.bool_)])
            self._slot = np.concatenate([self._slot, np.zeros(extra, dtype=np.int64)])
            self._rows = np.vstack([self._rows, np.zeros((extra, self._rows.shape[1]))])

    @property
    def departed(self) -> np.ndarray:
        return self._departed[: self.state.num_vertices]

    def neighbors(self, u: int) -> np.ndarray:
        """Current neighbor ids of ``u`` (a copy)."""
        return np.array(self._nbrs[u], dtype=np.int64)

    def _fill(self, u: int, nbrs: np.ndarray, eids: np.ndarray, priced_stop: bool) -> None:
        if nbrs.size == 0:
            return
        amounts = np.zeros(nbrs.size)
        s = self.state
        if self.mode == K.GREEDY:
            K.greedy_fill(u, nbrs, s._x, s._alpha, self._departed, amounts)
        else:
            self._slot[nbrs] = np.arange(nbrs.size)
            K.fill(u, nbrs, self._slot, s._x, s._alpha, self._departed, self._rows, self._diag,
                   self._offsum, self._n, self.mode, self.config.step, priced_stop, amounts)
        s._xe[eids] += amounts

    # -- events ------------------------------------------------------------
    def arrive(self, neighbors: Sequence[int] = ()) -> int:
        """Process an arrival; returns the new vertex id."""
        u = self.state.num_vertices
        self._grow(u)
        nbrs = np.array(sorted(int(v) for v in neighbors), dtype=np.int64)
        if nbrs.size and (nbrs[-1] >= u or nbrs[0] < 0):
            raise ValueError("neighbors must be previously arrived vertices")
        if nbrs.size and np.any(self._departed[nbrs]):
            raise ValueError("neighbor already passed its deadline")
        if nbrs.size > 1 and np.any(np.diff(nbrs) == 0):
            raise ValueError("duplicate neighbors")
        eids = self.state.add_edges(u, nbrs)
        self._nbrs.append(array("q", nbrs.tobytes()))
        self._eids.append(array("q", eids.tobytes()))
        for v, e in zip(nbrs.tolist(), eids.tolist()):
            self._nbrs[v].append(u)
            self._eids[v].append(e)
        kind = self.algo.kind
        if kind in (AlgorithmKind.EAGER, AlgorithmKind.HISTORY_FULLY, AlgorithmKind.HISTORY_GENERAL):
            self._fill(u, nbrs, eids, priced_stop=True)
        elif self.model is Model.GENERAL:
            # baselines in the general model can only act on arrival
            self._fill(u, nbrs, eids, priced_stop=False)
        x = self.state._x
        self.state._a[u] = x[u]
        if self.mode == K.HISTORY:
            if self._a_independent:
                self._rows[u] = self._values[0]
            else:
                tau = K.f_from_diagonal(x[u], self._diag, self._offsum, self._n)
                K.interpolated_row(self._values, tau, self._n, self._rows[u])
        return u

    def deadline(self, u: int) -> None:
        if self.model is not Model.FULLY:
            raise ModelMismatchError("deadlines only exist in the fully online model")
        if not 0 <= u < self.state.num_vertices or self._departed[u]:
            raise ValueError(f"vertex {u} cannot depart")
        # u takes no further neighbors, so zero-copy views are safe here
        nbrs = np.frombuffer(self._nbrs[u], dtype=np.int64) if len(self._nbrs[u]) else np.empty(0, np.int64)
        eids = np.frombuffer(self._eids[u], dtype=np.int64) if len(self._eids[u]) else np.empty(0, np.int64)
        self._fill(u, nbrs, eids, priced_stop=False)
        self._departed[u] = True

    def snapshot(self, event_index: int, kind: str, vertex: int) -> Snapshot:
        s = self.state
        return Snapshot(event_index, kind, vertex, s.x_level.copy(), s.a_level.copy(), s.alpha.copy())


@dataclass
class RunReport:
    final_state: MatchingState
    primal: float
    dual: float
    offline_opt: float
    ratio: float
    min_edge_dual_slack: float
    algorithm: str = ""
    model: str = ""
    step: float = 0.0
    trace: Optional[list[Snapshot]] = field(default=None, repr=False)

    def to_dict(self, include_state: bool = True) -> dict:
        d = {
            "algorithm": self.algorithm,
            "model": self.model,
            "step": self.step,
            "primal": self.primal,
            "dual": self.dual,
            "offline_opt": self.offline_opt,
            "ratio": self.ratio,
            "min_edge_dual_slack": None if math.isinf(self.min_edge_dual_slack) else self.min_edge_dual_slack,
        }
        if include_state:
            d["final_state"] = self.final_state.to_dict()
        return d

    def to_json(self, include_state: bool = True) -> str:
        return json.dumps(self.to_dict(include_state), sort_keys=True, indent=2)

    def write_trace_csv(self, path) -> None:
        if self.trace is None:
            raise ValueError("run was not traced (set record_trace)")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["event_index", "vertex", "x_level", "a_level", "alpha"])
            for snap in self.trace:
                for v in range(snap.x_level.size):
                    a = snap.a_level[v]
                    w.writerow([snap.event_index, v, repr(float(snap.x_level[v])),
                                "" if math.isnan(a) else repr(float(a)), repr(float(snap.alpha[v]))])


def _ratio(primal: float, opt: float) -> float:
    return primal / opt if opt > 0 else 1.0


def _run(script: InstanceScript, algo: Algorithm, config: RunConfig, model: Model,
         offline_opt: Optional[float], validate: bool) -> RunReport:
    if script.model is not model:
        raise ModelMismatchError(f"script is {script.model.value}, expected {model.value}")
    if validate:
        problems = validate_script(script)
        if problems:
            raise ScriptValidationError(problems)
    sim = Simulator(algo, model, config, capacity=max(script.num_vertices, 1))
    trace = [sim.snapshot(-1, "Start", -1)] if config.record_trace else None
    for idx, ev in enumerate(script.events):
        if ev.kind is EventKind.ARRIVAL:
            u = sim.arrive(ev.neighbors)
            if u != ev.vertex:
                raise ScriptValidationError([f"event {idx}: vertex ids must be dense in arrival order"])
        else:
            sim.deadline(ev.vertex)
        if trace is not None:
            trace.append(sim.snapshot(idx, ev.kind.value, ev.vertex))
    state = sim.state
    if offline_opt is None:
        eu, ev, _ = state.edge_arrays()
        offline_opt = offline_fractional_optimum(zip(eu.tolist(), ev.tolist())) if eu.size else 0.0
    rep = primal_dual_report(state, 0.0)
    return RunReport(state, rep.P, rep.D, offline_opt, _ratio(rep.P, offline_opt), rep.min_edge_dual_slack,
                     algorithm=algo.name, model=model.value, step=config.step, trace=trace)


def run_fully_online(script: InstanceScript, algo: Algorithm, config: RunConfig = RunConfig(),
                     offline_opt: Optional[float] = None, validate: bool = True) -> RunReport:
    """Run ``algo`` on a fully online script. ``offline_opt`` skips the LP when already known."""
    return _run(script, algo, config, Model.FULLY, offline_opt, validate)


def run_general_arrival(script: InstanceScript, algo: Algorithm, config: RunConfig = RunConfig(),
                        offline_opt: Optional[float] = None, validate: bool = True) -> RunReport:
    return _run(script, algo, config, Model.GENERAL, offline_opt, validate)


def run_script(script: InstanceScript, algo: Algorithm, config: RunConfig = RunConfig(),
               offline_opt: Optional[float] = None) -> RunReport:
    if script.model is Model.FULLY:
        return run_fully_online(script, algo, config, offline_opt)
    return run_general_arrival(script, algo, config, offline_opt)


# -- batches ----------------------------------------------------------------

@dataclass
class BatchError:
    index: int
    error: str


@dataclass
class BatchResult:
    reports: list
    aggregate: dict

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "reports": [r.to_dict(include_state=False) if isinstance(r, RunReport)
                        else {"index": r.index, "error": r.error} for r in self.reports],
        }


def _batch_one(args):
    idx, script, algo, config = args
    try:
        return run_script(script, algo, config)
    except Exception as exc:  # reported in place; the batch keeps going
        return BatchError(idx, f"{type(exc).__name__}: {exc}")


def batch_run(scripts: Sequence[InstanceScript], algo: Algorithm, config: RunConfig = RunConfig(),
              parallelism: int = 1) -> BatchResult:
    jobs = [(i, s, algo, config) for i, s in enumerate(scripts)]
    if parallelism > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            reports = list(pool.map(_batch_one, jobs))
    else:
        reports = [_batch_one(j) for j in jobs]
    ok = [r for r in reports if isinstance(r, RunReport)]
    aggregate: dict = {}
    if reports:
        slacks = [r.min_edge_dual_slack for r in ok if not math.isinf(r.min_edge_dual_slack)]
        aggregate = {
            "runs": len(reports),
            "errors": len(reports) - len(ok),
            "min_ratio": min((r.ratio for r in ok), default=None),
            "min_slack": min(slacks, default=None),
            "max_primal_dual_gap": max((abs(r.primal - r.dual) for r in ok), default=None),
        }
    return BatchResult(reports, aggregate)


# -- gain-bound verifier ----------------------------------------------------

@dataclass
class GainCheck:
    event_index: int
    u: int
    v: int
    gain: float
    bound: float

    @property
    def slack(self) -> float:
        return self.gain - self.bound


def _H_of(ps: PriceSystem, a: float, p: float) -> float:
    """``a f(a) + integral_a^p g(a, x) dx`` written as H(f(a), g(a, p))."""
    tau = ps.f(a)
    theta = max(ps.g(a, max(p, a)), tau)
    return H_value(ps.grid, tau, theta)


def verify_gain_bounds(script: InstanceScript, report: RunReport, prices: PriceSystem) -> list[GainCheck]:
    """Evaluate the per-edge gain lower bounds from a traced run.

    Fully online: right after u's deadline, for every neighbor v still present,
    ``alpha_u + alpha_v >= H(f(a_u), g(a_u, p_u)) + H(f(a_v), g(a_v, p_v))
    + (1 - p_u)(1 - g(a_v, p_v))`` with p_u the level of u right before its
    deadline and p_v the level of v right after it.
    General arrival: right after u's arrival, for every neighbor v,
    ``alpha_u + alpha_v >= H(f(a_v), g(a_v, p_v)) + a_u f(a_u)``.
    """
    if report.trace is None:
        raise ValueError("verify_gain_bounds needs a traced run")
    trace = report.trace
    adj: dict[int, set[int]] = {}
    for u, v in script.edges():
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    departed: set[int] = set()
    out = []
    for t, ev in enumerate(script.events):
        before, after = trace[t], trace[t + 1]
        u = ev.vertex
        if ev.kind is EventKind.DEADLINE:
            p_u = float(before.x_level[u])
            a_u = float(after.a_level[u])
            for v in sorted(adj.get(u, ())):
                if v in departed:
                    continue
                a_v, p_v = float(after.a_level[v]), float(after.x_level[v])
                theta_v = prices.g(a_v, max(p_v, a_v))
                bound = _H_of(prices, a_u, p_u) + _H_of(prices, a_v, p_v) + (1 - p_u) * (1 - theta_v)
                out.append(GainCheck(t, u, v, float(after.alpha[u] + after.alpha[v]), bound))
            departed.add(u)
        elif script.model is Model.GENERAL:
            a_u = float(after.a_level[u])
            for v in ev.neighbors:
                a_v, p_v = float(after.a_level[v]), float(after.x_level[v])
                bound = _H_of(prices, a_v, p_v) + a_u * prices.f(a_u)
                out.append(GainCheck(t, u, v, float(after.alpha[u] + after.alpha[v]), bound))
    return out
