"""Sequential rewiring MDP.

One rewiring takes three sub-steps: pick a base node, pick a node to connect
it to, pick one of its existing edges to drop. Rewards arrive only at the
final step: the scaled objective gain, or a fixed penalty if the graph ended
up disconnected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

from .graph import Graph, GraphError, connected_components, is_connected
from .objectives import ObjectiveConfig, evaluate

DISCONNECTION_PENALTY = -10.0


class IllegalActionError(ValueError):
    def __init__(self, phase: int, node: int):
        super().__init__(f"node {node} is not a legal action in phase {phase}")
        self.phase = phase
        self.node = node


def budget_for(m: int, fraction: float) -> int:
    """Rewiring operations allowed: ``fraction * m`` rounded half-up, at least 1."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"budget fraction must be in (0, 1], got {fraction}")
    return max(1, math.floor(fraction * m + 0.5 + 1e-9))


@dataclass(frozen=True)
class RewireState:
    graph: Graph
    base: int | None
    addition: int | None
    t: int
    budget: int
    f0: float
    g0: Graph = field(repr=False)
    done: bool = False

    @property
    def phase(self) -> int:
        return self.t % 3

    @property
    def horizon(self) -> int:
        return 3 * self.budget

    @property
    def remaining(self) -> int:
        """Rewiring operations not yet completed."""
        return self.budget - self.t // 3


@dataclass(frozen=True)
class StepOutcome:
    next_state: RewireState
    reward: float
    terminal: bool


def valid_actions(s: RewireState) -> list[int]:
    g = s.graph
    n = g.n
    if s.done:
        return []
    if s.phase == 0:
        return [v for v in range(n) if 0 < g.degree(v) < n - 1]
    a1 = s.base
    nbrs = g.neighbors(a1)
    if s.phase == 1:
        return [v for v in range(n) if v != a1 and v not in nbrs]
    return sorted(v for v in nbrs if v != s.addition)


def enumerate_rewirings(g: Graph) -> list[tuple[int, int, int]]:
    """Every ``(base, added, removed)`` triple reachable through the three action spaces."""
    out = []
    n = g.n
    for v1 in range(n):
        k = g.degree(v1)
        if not 0 < k < n - 1:
            continue
        nbrs = g.neighbors(v1)
        removable = sorted(nbrs)
        for v2 in range(n):
            if v2 == v1 or v2 in nbrs:
                continue
            out.extend((v1, v2, v3) for v3 in removable)
    return out


def apply_rewiring(g: Graph, v1: int, v2: int, v3: int) -> Graph:
    return g.add_edge(v1, v2).remove_edge(v1, v3)


class RewireEnv:
    """Stateless transition logic for a fixed objective; states carry everything else."""

    def __init__(self, objective: ObjectiveConfig, penalty: float = DISCONNECTION_PENALTY):
        self.objective = objective
        self.penalty = penalty

    def reset(self, g0: Graph, budget_fraction: float = 0.15) -> RewireState:
        if not is_connected(g0):
            raise GraphError("initial graph must be connected")
        b = budget_for(g0.m, budget_fraction)
        s = RewireState(g0, None, None, 0, b, evaluate(self.objective, g0), g0)
        if not valid_actions(s):
            s = replace(s, done=True)
        return s

    def terminal_reward(self, s: RewireState, g: Graph) -> float:
        if connected_components(g).count != 1:
            return self.penalty
        return self.objective.reward_scale * (evaluate(self.objective, g) - s.f0)

    def step(self, s: RewireState, a: int) -> StepOutcome:
        if s.done:
            raise IllegalActionError(s.phase, a)
        phase = s.phase
        if a not in valid_actions(s):
            raise IllegalActionError(phase, a)
        if phase == 0:
            nxt = replace(s, base=a, t=s.t + 1)
        elif phase == 1:
            nxt = replace(s, graph=s.graph.add_edge(s.base, a), addition=a, t=s.t + 1)
        else:
            nxt = replace(s, graph=s.graph.remove_edge(s.base, a), base=None, addition=None, t=s.t + 1)
        terminal = nxt.t == nxt.horizon
        if not terminal and nxt.phase == 0 and not valid_actions(nxt):
            terminal = True
        if terminal:
            nxt = replace(nxt, done=True)
            return StepOutcome(nxt, self.terminal_reward(s, nxt.graph), True)
        return StepOutcome(nxt, 0.0, False)


@dataclass
class TraceRecord:
    t: int
    phase: int
    action: int
    reward: float


@dataclass
class EpisodeResult:
    final: RewireState
    trace: list[TraceRecord]
    total_reward: float

    @property
    def graph(self) -> Graph:
        return self.final.graph

    @property
    def connected(self) -> bool:
        return is_connected(self.final.graph)

    def rewirings(self) -> list[tuple[int, int, int]]:
        acts = [r.action for r in self.trace]
        return [tuple(acts[i : i + 3]) for i in range(0, len(acts) - len(acts) % 3, 3)]


def run_episode(env: RewireEnv, g0: Graph, policy: Callable[[RewireState, list[int]], int],
                budget_fraction: float = 0.15) -> EpisodeResult:
    """Roll out ``policy(state, legal_actions) -> node`` until the episode ends."""
    s = env.reset(g0, budget_fraction)
    trace: list[TraceRecord] = []
    total = 0.0
    while not s.done:
        acts = valid_actions(s)
        a = policy(s, acts)
        out = env.step(s, a)
        trace.append(TraceRecord(s.t, s.phase, a, out.reward))
        total += out.reward
        s = out.next_state
    return EpisodeResult(s, trace, total)


def delta_objective(objective: ObjectiveConfig, g0: Graph, g: Graph) -> float:
    return evaluate(objective, g) - evaluate(objective, g0)

