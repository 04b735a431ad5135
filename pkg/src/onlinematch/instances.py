"""Seeded random instance scripts for both arrival models."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .model import Event, InstanceScript, Model


def random_general_script(num_vertices: int, edge_prob: float = 0.3, seed: int = 0,
                          bipartite: bool = False) -> InstanceScript:
    """Vertices arrive one by one; each earlier vertex is a neighbor with probability ``edge_prob``."""
    rng = np.random.default_rng(seed)
    side = rng.integers(0, 2, num_vertices) if bipartite else None
    events = []
    for v in range(num_vertices):
        cand = np.arange(v)
        if side is not None:
            cand = cand[side[:v] != side[v]]
        nbrs = cand[rng.random(cand.size) < edge_prob]
        events.append(Event.arrival(v, nbrs.tolist()))
    return InstanceScript(Model.GENERAL, events, bipartite_hint=True if bipartite else None)


def random_fully_script(num_vertices: int, edge_prob: float = 0.5, seed: int = 0,
                        bipartite: bool = False, depart_prob: Optional[float] = None) -> InstanceScript:
    """Interleaved arrivals and deadlines.

    At each step a deadline fires with probability ``depart_prob`` (default
    0.4) if some vertex is alive; otherwise the next vertex arrives, adjacent
    to each alive vertex with probability ``edge_prob``. Remaining deadlines
    fire in random order at the end.
    """
    rng = np.random.default_rng(seed)
    depart_prob = 0.4 if depart_prob is None else depart_prob
    side = rng.integers(0, 2, num_vertices) if bipartite else None
    alive: list[int] = []
    events = []
    nxt = 0
    while nxt < num_vertices or alive:
        if alive and (nxt >= num_vertices or rng.random() < depart_prob):
            u = alive.pop(int(rng.integers(len(alive))))
            events.append(Event.deadline(u))
            continue
        cand = np.array(alive, dtype=np.int64)
        if side is not None and cand.size:
            cand = cand[side[cand] != side[nxt]]
        nbrs = cand[rng.random(cand.size) < edge_prob]
        events.append(Event.arrival(nxt, nbrs.tolist()))
        alive.append(nxt)
        nxt += 1
    return InstanceScript(Model.FULLY, events, bipartite_hint=True if bipartite else None)


def random_script(model: Model, num_vertices: int, edge_prob: float, seed: int,
                  bipartite: bool = False) -> InstanceScript:
    if Model(model) is Model.FULLY:
        return random_fully_script(num_vertices, edge_prob, seed, bipartite)
    return random_general_script(num_vertices, edge_prob, seed, bipartite)
