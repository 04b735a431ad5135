"""Instances, event scripts and the fractional matching / dual ledger.

Vertices are dense integers assigned in arrival order. Edges are keyed by
the canonical pair ``(min(u, v), max(u, v))``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

# invariant tolerance (float accumulation over many micro-steps)
TOL = 1e-9
# user-facing feasibility tolerance
FEAS_TOL = 1e-6


class Model(str, Enum):
    FULLY = "FullyOnline"
    GENERAL = "GeneralArrival"


class EventKind(str, Enum):
    ARRIVAL = "Arrival"
    DEADLINE = "Deadline"


class CapacityError(ValueError):
    """A water level would exceed one."""


class ScriptValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:10])
        more = "" if len(self.violations) <= 10 else f" (+{len(self.violations) - 10} more)"
        super().__init__(f"invalid script: {lines}{more}")


def edge_key(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Event:
    kind: EventKind
    vertex: int
    neighbors: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", EventKind(self.kind))
        object.__setattr__(self, "neighbors", tuple(sorted(int(x) for x in self.neighbors)))
        if self.kind is EventKind.DEADLINE and self.neighbors:
            raise ValueError("deadline events carry no neighbors")

    @classmethod
    def arrival(cls, vertex: int, neighbors: Iterable[int] = ()) -> "Event":
        return cls(EventKind.ARRIVAL, int(vertex), tuple(neighbors))

    @classmethod
    def deadline(cls, vertex: int) -> "Event":
        return cls(EventKind.DEADLINE, int(vertex))

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "vertex": self.vertex}
        if self.kind is EventKind.ARRIVAL:
            d["neighbors"] = list(self.neighbors)
        return d


@dataclass(frozen=True)
class InstanceScript:
    """Ordered arrival/deadline events; edges are revealed at arrivals."""

    model: Model
    events: tuple[Event, ...]
    bipartite_hint: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def num_vertices(self) -> int:
        return sum(1 for e in self.events if e.kind is EventKind.ARRIVAL)

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for e in self.events:
            if e.kind is EventKind.ARRIVAL:
                out.extend(edge_key(e.vertex, w) for w in e.neighbors)
        return out

    # -- JSON --------------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"model": self.model.value, "events": [e.to_dict() for e in self.events]}
        if self.bipartite_hint is not None:
            d["bipartite_hint"] = self.bipartite_hint
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceScript":
        events = []
        for raw in d["events"]:
            kind = EventKind(raw["kind"])
            if kind is EventKind.ARRIVAL:
                events.append(Event.arrival(raw["vertex"], raw.get("neighbors", ())))
            else:
                if raw.get("neighbors"):
                    raise ValueError("deadline events carry no neighbors")
                events.append(Event.deadline(raw["vertex"]))
        return cls(Model(d["model"]), tuple(events), d.get("bipartite_hint"))

    @classmethod
    def from_json(cls, text: str) -> "InstanceScript":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "InstanceScript":
        return cls.from_json(Path(path).read_text())


@dataclass(frozen=True)
class Violation:
    index: int
    message: str

    def __str__(self):
        return f"event {self.index}: {self.message}"


def validate_script(script: InstanceScript) -> list[Violation]:
    """Return every invariant violation of ``script``; an empty list means ok."""
    out: list[Violation] = []
    arrived: dict[int, int] = {}
    departed: set[int] = set()
    next_id = 0
    for idx, ev in enumerate(script.events):
        v = ev.vertex
        if ev.kind is EventKind.ARRIVAL:
            if v in arrived:
                out.append(Violation(idx, f"vertex {v} arrives twice"))
                continue
            if v != next_id:
                out.append(Violation(idx, f"vertex ids must be dense in arrival order (expected {next_id}, got {v})"))
            arrived[v] = idx
            next_id = max(next_id, v) + 1
            if len(set(ev.neighbors)) != len(ev.neighbors):
                out.append(Violation(idx, f"duplicate neighbors for vertex {v}"))
            for w in ev.neighbors:
                if w == v:
                    out.append(Violation(idx, f"self-loop on vertex {v}"))
                elif w not in arrived:
                    out.append(Violation(idx, f"neighbor {w} of vertex {v} has not arrived"))
                elif w in departed:
                    out.append(Violation(idx, f"neighbor {w} of vertex {v} already passed its deadline"))
        else:
            if script.model is Model.GENERAL:
                out.append(Violation(idx, "deadline event in a general-arrival script"))
                continue
            if v not in arrived:
                out.append(Violation(idx, f"deadline of vertex {v} before its arrival"))
            elif v in departed:
                out.append(Violation(idx, f"second deadline for vertex {v}"))
            departed.add(v)
    if script.model is Model.FULLY:
        for v, idx in arrived.items():
            if v not in departed:
                out.append(Violation(idx, f"vertex {v} never reaches its deadline"))
    return sorted(out, key=lambda x: x.index)


def check_script(script: InstanceScript) -> None:
    violations = validate_script(script)
    if violations:
        raise ScriptValidationError(violations)


class MatchingState:
    """Fractional matching plus dual values.

    Per-vertex quantities live in numpy arrays indexed by vertex id; the
    unset active level is stored as NaN. Revealed edges are kept in growable
    arrays (``edge_u < edge_v``) with their matched amounts, so instances with
    millions of edges stay compact. ``x_edge`` and ``edges`` are dict/set views
    built on demand.
    """

    def __init__(self, capacity: int = 16, edge_capacity: int = 16):
        capacity = max(int(capacity), 1)
        edge_capacity = max(int(edge_capacity), 1)
        self.num_vertices = 0
        self._x = np.zeros(capacity)
        self._a = np.full(capacity, np.nan)
        self._alpha = np.zeros(capacity)
        self.num_edges = 0
        self._eu = np.zeros(edge_capacity, dtype=np.int64)
        self._ev = np.zeros(edge_capacity, dtype=np.int64)
        self._xe = np.zeros(edge_capacity)
        self._eid: Optional[dict[tuple[int, int], int]] = None

    # numpy views trimmed to the arrived vertices
    @property
    def x_level(self) -> np.ndarray:
        return self._x[: self.num_vertices]

    @property
    def a_level(self) -> np.ndarray:
        return self._a[: self.num_vertices]

    @property
    def alpha(self) -> np.ndarray:
        return self._alpha[: self.num_vertices]

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.num_edges
        return self._eu[:m], self._ev[:m], self._xe[:m]

    @property
    def x_edge(self) -> dict[tuple[int, int], float]:
        """Matched amount per edge, for edges with a positive amount."""
        eu, ev, xe = self.edge_arrays()
        nz = np.flatnonzero(xe > 0)
        return {(int(eu[k]), int(ev[k])): float(xe[k]) for k in nz}

    @property
    def edges(self) -> set[tuple[int, int]]:
        eu, ev, _ = self.edge_arrays()
        return set(zip(eu.tolist(), ev.tolist()))

    def ensure_vertex(self, v: int) -> None:
        if v < self.num_vertices:
            return
        need = v + 1
        if need > self._x.size:
            cap = max(need, 2 * self._x.size)
            self._x = np.concatenate([self._x, np.zeros(cap - self._x.size)])
            self._a = np.concatenate([self._a, np.full(cap - self._a.size, np.nan)])
            self._alpha = np.concatenate([self._alpha, np.zeros(cap - self._alpha.size)])
        self.num_vertices = need

    def _edge_index(self) -> dict[tuple[int, int], int]:
        if self._eid is None:
            eu, ev, _ = self.edge_arrays()
            self._eid = {(u, v): k for k, (u, v) in enumerate(zip(eu.tolist(), ev.tolist()))}
        return self._eid

    def add_edges(self, u: int, nbrs) -> np.ndarray:
        """Append edges from ``u`` to each of ``nbrs`` (assumed new); returns their ids."""
        nbrs = np.asarray(nbrs, dtype=np.int64)
        k = nbrs.size
        if k == 0:
            return np.empty(0, dtype=np.int64)
        self.ensure_vertex(max(u, int(nbrs.max())))
        m = self.num_edges
        if m + k > self._eu.size:
            cap = max(m + k, 2 * self._eu.size)
            self._eu = np.concatenate([self._eu, np.zeros(cap - self._eu.size, dtype=np.int64)])
            self._ev = np.concatenate([self._ev, np.zeros(cap - self._ev.size, dtype=np.int64)])
            self._xe = np.concatenate([self._xe, np.zeros(cap - self._xe.size)])
        self._eu[m:m + k] = np.minimum(nbrs, u)
        self._ev[m:m + k] = np.maximum(nbrs, u)
        self.num_edges = m + k
        ids = np.arange(m, m + k)
        if self._eid is not None:
            for e, a, b in zip(ids.tolist(), self._eu[m:m + k].tolist(), self._ev[m:m + k].tolist()):
                self._eid[(a, b)] = e
        return ids

    def reveal_edge(self, u: int, v: int) -> int:
        key = edge_key(u, v)
        idx = self._edge_index().get(key)
        if idx is None:
            idx = int(self.add_edges(u, [v])[0])
        return idx

    def copy(self) -> "MatchingState":
        other = MatchingState(self._x.size, self._eu.size)
        other.num_vertices = self.num_vertices
        other._x[:] = self._x
        other._a[:] = self._a
        other._alpha[:] = self._alpha
        other.num_edges = self.num_edges
        other._eu[:] = self._eu
        other._ev[:] = self._ev
        other._xe[:] = self._xe
        return other

    def check_invariants(self, tol: float = TOL) -> list[str]:
        problems = []
        eu, ev, xe = self.edge_arrays()
        sums = np.zeros(self.num_vertices)
        np.add.at(sums, eu, xe)
        np.add.at(sums, ev, xe)
        bad = np.flatnonzero(np.abs(sums - self.x_level) > tol)
        problems += [f"x_level[{u}] != row sum" for u in bad]
        a = self.a_level
        set_a = ~np.isnan(a)
        if np.any(a[set_a] < -tol) or np.any(a[set_a] > self.x_level[set_a] + tol):
            problems.append("active level outside [0, x_level]")
        if np.any(self.x_level > 1 + tol):
            problems.append("water level above 1")
        if abs(self.alpha.sum() - xe.sum()) > tol * max(1.0, self.num_edges):
            problems.append("sum of duals differs from primal")
        return problems

    def to_dict(self) -> dict:
        return {
            "x_edge": [[u, v, x] for (u, v), x in sorted(self.x_edge.items())],
            "x_level": self.x_level.tolist(),
            "a_level": [None if math.isnan(a) else a for a in self.a_level.tolist()],
            "alpha": self.alpha.tolist(),
        }


def apply_match(state: MatchingState, u: int, v: int, delta: float, price: float) -> MatchingState:
    """Match ``delta`` more of edge (u, v); ``u`` is the active side paying ``price`` to ``v``."""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not 0.0 <= price <= 1.0:
        raise ValueError(f"price must lie in [0, 1], got {price}")
    if u == v:
        raise ValueError("self-loops are not allowed")
    state.ensure_vertex(max(u, v))
    if state._x[u] + delta > 1 + TOL or state._x[v] + delta > 1 + TOL:
        raise CapacityError(f"matching {delta} on ({u}, {v}) exceeds capacity")
    k = state.reveal_edge(u, v)
    state._xe[k] += delta
    state._x[u] += delta
    state._x[v] += delta
    state._alpha[u] += (1.0 - price) * delta
    state._alpha[v] += price * delta
    return state


@dataclass
class PrimalDualReport:
    P: float
    D: float
    min_edge_dual_slack: float
    violating_edges: list[tuple[int, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "P": self.P,
            "D": self.D,
            "min_edge_dual_slack": None if math.isinf(self.min_edge_dual_slack) else self.min_edge_dual_slack,
            "violating_edges": [list(e) for e in self.violating_edges],
        }


def primal_dual_report(state: MatchingState, gamma: float) -> PrimalDualReport:
    eu, ev, xe = state.edge_arrays()
    P = math.fsum(xe.tolist())
    D = math.fsum(state.alpha.tolist())
    if eu.size == 0:
        return PrimalDualReport(P, D, math.inf, [])
    sums = state._alpha[eu] + state._alpha[ev]
    bad = np.flatnonzero(sums < gamma)
    violating = sorted((int(eu[k]), int(ev[k])) for k in bad)
    return PrimalDualReport(P, D, float(sums.min()), violating)
