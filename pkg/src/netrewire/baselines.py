"""Random and one-step greedy rewiring strategies."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .env import RewireEnv, TraceRecord, apply_rewiring, budget_for, enumerate_rewirings, run_episode
from .graph import Graph, GraphError, bridge_sides, is_connected
from .objectives import ObjectiveConfig, evaluate, evaluate_many

TIE_TOL = 1e-12


@dataclass
class BaselineResult:
    graph: Graph
    delta: float                 # NaN when the final graph is disconnected
    connected: bool
    rewirings: list[tuple[int, int, int]]
    skipped: int = 0
    trace: list[TraceRecord] = field(default_factory=list, repr=False)


def random_episode(g0: Graph, budget_fraction: float, rng: np.random.Generator,
                   objective: ObjectiveConfig) -> BaselineResult:
    """Uniformly random legal action at every sub-step of the rewiring MDP."""
    env = RewireEnv(objective)
    res = run_episode(env, g0, lambda s, acts: acts[rng.integers(len(acts))], budget_fraction)
    ok = res.connected
    delta = evaluate(objective, res.graph) - res.final.f0 if ok else math.nan
    return BaselineResult(res.graph, delta, ok, res.rewirings(), trace=res.trace)


def _candidate_adjacencies(a: np.ndarray, triples: np.ndarray) -> np.ndarray:
    k = len(triples)
    stack = np.repeat(a[None], k, axis=0)
    r = np.arange(k)
    v1, v2, v3 = triples[:, 0], triples[:, 1], triples[:, 2]
    stack[r, v1, v2] = stack[r, v2, v1] = 1.0
    stack[r, v1, v3] = stack[r, v3, v1] = 0.0
    return stack


def best_rewiring(g: Graph, objective: ObjectiveConfig) -> tuple[tuple[int, int, int], float] | None:
    """Connectivity-preserving triple with the largest objective value.

    Ties (within a relative ``TIE_TOL``) go to the lexicographically smallest triple. Returns ``None`` when no
    legal triple keeps the graph connected.
    """
    sides = bridge_sides(g) if is_connected(g) else None
    if sides is None:
        triples = [t for t in enumerate_rewirings(g) if is_connected(apply_rewiring(g, *t))]
    else:
        # cutting bridge (v1, v3) is safe only if the new edge lands on v3's side
        triples = [t for t in enumerate_rewirings(g)
                   if (t[0], t[2]) not in sides or t[1] in sides[(t[0], t[2])]]
    if not triples:
        return None
    arr = np.array(triples, dtype=np.int64)
    values = evaluate_many(objective, _candidate_adjacencies(g.adjacency(), arr))
    # isomorphic candidates can differ in the last bits; treat those as ties
    top = values.max()
    i = int(np.flatnonzero(values >= top - TIE_TOL * max(1.0, abs(top)))[0])
    return triples[i], float(values[i])


def greedy_episode(g0: Graph, budget_fraction: float, objective: ObjectiveConfig) -> BaselineResult:
    if not is_connected(g0):
        raise GraphError("initial graph must be connected")
    f0 = evaluate(objective, g0)
    g = g0
    done, skipped = [], 0
    for _ in range(budget_for(g0.m, budget_fraction)):
        pick = best_rewiring(g, objective)
        if pick is None:
            skipped += 1
            continue
        t, _ = pick
        g = apply_rewiring(g, *t)
        done.append(t)
    return BaselineResult(g, evaluate(objective, g) - f0, True, done, skipped)


def time_episode(strategy: Callable[[Graph], object], g0: Graph) -> float:
    """Wall-clock seconds for ``strategy(g0)`` to finish one full rewiring sequence."""
    start = time.perf_counter()
    strategy(g0)
    return time.perf_counter() - start
