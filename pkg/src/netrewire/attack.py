"""Attacker with a stale local map: which targets went missing, and what it costs to find them again."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .graph import Graph, GraphError, bfs_distances, is_connected
from .stats import mean_ci

DEFAULT_HOPS = 2


class WalkLimitError(RuntimeError):
    def __init__(self, steps: int, cost: int):
        super().__init__(f"random walk did not reach its target within {steps} steps (cost so far {cost})")
        self.steps = steps
        self.cost = cost


def _canon(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class LocalMap:
    entry: int
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]


def build_local_map(g0: Graph, entry: int, hops: int = DEFAULT_HOPS) -> LocalMap:
    """Nodes within ``hops`` of ``entry`` and every original edge among them."""
    if not 0 <= entry < g0.n:
        raise GraphError(f"entry node {entry} not in graph")
    nodes = frozenset(bfs_distances(g0, entry, max_depth=hops))
    edges = frozenset(e for e in g0.edges if e[0] in nodes and e[1] in nodes)
    return LocalMap(entry, nodes, edges)


def newly_unreachable(g_star: Graph, lmap: LocalMap) -> set[int]:
    """Map nodes the entry can no longer reach using only original map edges that survived."""
    surviving = lmap.edges & g_star.edges
    adj: dict[int, list[int]] = {}
    for i, j in surviving:
        adj.setdefault(i, []).append(j)
        adj.setdefault(j, []).append(i)
    seen = {lmap.entry}
    stack = [lmap.entry]
    while stack:
        u = stack.pop()
        for w in adj.get(u, ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return set(lmap.nodes) - seen


def forward_random_walk_cost(g_star: Graph, entry: int, target: int, known_edges: Iterable[tuple[int, int]],
                             rng: np.random.Generator, max_steps: int | None = None,
                             path: list[int] | None = None) -> int:
    """Number of previously unknown edges a forward random walker unlocks before reaching ``target``.

    The walker never immediately returns to the node it came from unless it has
    no other option. Stepping towards a degree-1 node counts that edge, but the
    walker stays put and treats the dead end as its previous node. If ``path`` is
    given, the sequence of positions is appended to it.
    """
    if entry == target:
        raise ValueError("entry and target must differ")
    limit = max_steps if max_steps is not None else 10**6 * g_star.n
    nbrs = [sorted(g_star.neighbors(v)) for v in range(g_star.n)]
    visited = {_canon(*e) for e in known_edges}
    cost = 0
    prev = cur = entry
    if not nbrs[entry]:
        raise GraphError(f"entry node {entry} is isolated")
    nxt = nbrs[entry][rng.integers(len(nbrs[entry]))]
    if path is not None:
        path.append(entry)
    steps = 0
    while nxt != target:
        e = _canon(cur, nxt)
        if e not in visited:
            cost += 1
            visited.add(e)
        if len(nbrs[nxt]) == 1:
            prev = nxt
        else:
            prev, cur = cur, nxt
            if path is not None:
                path.append(cur)
        choices = [w for w in nbrs[cur] if w != prev] or [prev]
        nxt = choices[rng.integers(len(choices))]
        steps += 1
        if steps >= limit:
            raise WalkLimitError(steps, cost)
    if _canon(cur, nxt) not in visited:
        cost += 1
    if path is not None:
        path.append(nxt)
    return cost


@dataclass
class WalkCostReport:
    entry: int
    per_target: dict[int, int]
    n: int

    @property
    def unreachable_targets(self) -> set[int]:
        return set(self.per_target)

    @property
    def total(self) -> int:
        return sum(self.per_target.values())

    @property
    def normalized(self) -> float:
        return self.total / self.n


@dataclass
class AttackSummary:
    reports: list[WalkCostReport] = field(default_factory=list)

    @property
    def normalized_costs(self) -> list[float]:
        return [r.normalized for r in self.reports]

    @property
    def mean_ci(self) -> tuple[float, float]:
        return mean_ci(self.normalized_costs)

    def rows(self) -> list[tuple[int, int, int]]:
        return [(r.entry, t, c) for r in self.reports for t, c in sorted(r.per_target.items())]


def entry_count(rule, n: int) -> int:
    """``"synthetic"`` samples min(n, 30) entries, ``"all"`` every node, an int that many."""
    if rule == "synthetic":
        return min(n, 30)
    if rule == "all":
        return n
    return min(int(rule), n)


def evaluate_entry(g0: Graph, g_star: Graph, entry: int, seed: int, hops: int = DEFAULT_HOPS) -> WalkCostReport:
    lmap = build_local_map(g0, entry, hops)
    costs = {}
    for t in sorted(newly_unreachable(g_star, lmap)):
        rng = np.random.default_rng([seed, entry, t])
        costs[t] = forward_random_walk_cost(g_star, entry, t, lmap.edges, rng)
    return WalkCostReport(entry, costs, g0.n)


def evaluate_rewiring(g0: Graph, g_star: Graph, rule="synthetic", rng: np.random.Generator | None = None,
                      hops: int = DEFAULT_HOPS) -> AttackSummary:
    """Random-walk cost of a rewiring, over entry nodes sampled without replacement."""
    if g0.n != g_star.n:
        raise GraphError("original and rewired graphs differ in size")
    if not is_connected(g_star):
        raise GraphError("rewired graph is disconnected; it is excluded from attack evaluation")
    rng = rng if rng is not None else np.random.default_rng(0)
    k = entry_count(rule, g0.n)
    entries = sorted(int(v) for v in rng.choice(g0.n, size=k, replace=False))
    seed = int(rng.integers(2**63))
    return AttackSummary([evaluate_entry(g0, g_star, u, seed, hops) for u in entries])
