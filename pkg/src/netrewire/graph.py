"""Undirected simple graphs over integer node ids, plus spectral and degree utilities."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class GraphError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


def _canon(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


class Graph:
    """Immutable undirected simple graph on nodes ``0..n-1``.

    Mutators (``add_edge``, ``remove_edge``) return a new graph and leave
    the receiver untouched, so instances can be shared freely.
    """

    __slots__ = ("n", "_edges", "_adj", "_earr")

    def __init__(self, n: int, edges: Iterable[tuple[int, int]] = ()):
        if n < 1:
            raise GraphError(f"node count must be >= 1, got {n}")
        adj: list[set[int]] = [set() for _ in range(n)]
        canon: set[tuple[int, int]] = set()
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            e = _canon(i, j)
            if e in canon:
                raise GraphError(f"duplicate edge {e}")
            canon.add(e)
            adj[i].add(j)
            adj[j].add(i)
        self.n = n
        self._edges = frozenset(canon)
        self._adj = tuple(frozenset(a) for a in adj)
        self._earr = None

    @classmethod
    def _raw(cls, n, edges, adj) -> "Graph":
        g = object.__new__(cls)
        g.n = n
        g._edges = edges
        g._adj = adj
        g._earr = None
        return g

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return self._edges

    def neighbors(self, v: int) -> frozenset[int]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def degrees(self) -> np.ndarray:
        return np.fromiter((len(a) for a in self._adj), dtype=np.int64, count=self.n)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self._adj[i]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    def add_edge(self, i: int, j: int) -> "Graph":
        if i == j:
            raise GraphError(f"self-loop at node {i}")
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise GraphError(f"edge ({i}, {j}) out of range for n={self.n}")
        if j in self._adj[i]:
            raise GraphError(f"edge {_canon(i, j)} already present")
        adj = list(self._adj)
        adj[i] = adj[i] | {j}
        adj[j] = adj[j] | {i}
        return Graph._raw(self.n, self._edges | {_canon(i, j)}, tuple(adj))

    def remove_edge(self, i: int, j: int) -> "Graph":
        if not (0 <= i < self.n and 0 <= j < self.n) or j not in self._adj[i]:
            raise GraphError(f"edge {_canon(i, j)} not present")
        adj = list(self._adj)
        adj[i] = adj[i] - {j}
        adj[j] = adj[j] - {i}
        return Graph._raw(self.n, self._edges - {_canon(i, j)}, tuple(adj))

    def relabel(self, perm) -> "Graph":
        """Graph with node ``v`` renamed to ``perm[v]``."""
        return Graph(self.n, ((perm[i], perm[j]) for i, j in self._edges))

    def adjacency(self, dtype=float) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=dtype)
        if self._edges:
            idx = np.array(list(self._edges))
            a[idx[:, 0], idx[:, 1]] = 1
            a[idx[:, 1], idx[:, 0]] = 1
        return a

    def edge_array(self) -> np.ndarray:
        """Sorted ``(m, 2)`` int array of canonical edges (cached; do not mutate)."""
        if self._earr is None:
            if self._edges:
                self._earr = np.array(sorted(self._edges), dtype=np.int64)
            else:
                self._earr = np.zeros((0, 2), dtype=np.int64)
        return self._earr

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self.n == other.n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self.n, self._edges))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"


@dataclass(frozen=True)
class ComponentLabeling:
    count: int
    label: tuple[int, ...]


def connected_components(g: Graph) -> ComponentLabeling:
    label = [-1] * g.n
    count = 0
    for s in range(g.n):
        if label[s] >= 0:
            continue
        label[s] = count
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.neighbors(u):
                if label[w] < 0:
                    label[w] = count
                    queue.append(w)
        count += 1
    return ComponentLabeling(count, tuple(label))


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for w in g.neighbors(u):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == g.n


def bridge_sides(g: Graph) -> dict[tuple[int, int], frozenset[int]]:
    """For each bridge ``(u, v)`` (both orientations), the nodes left on ``v``'s side once it is cut."""
    out = {}
    for u, v in g.sorted_edges():
        seen = {v}
        stack = [v]
        while stack:
            w = stack.pop()
            for z in g.neighbors(w):
                if z not in seen and not (w == v and z == u):
                    seen.add(z)
                    stack.append(z)
        if u not in seen:
            side = frozenset(seen)
            out[(u, v)] = side
            out[(v, u)] = frozenset(range(g.n)) - side
    return out


def bfs_distances(g: Graph, source: int, max_depth: int | None = None) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        d = dist[u]
        if max_depth is not None and d >= max_depth:
            continue
        for w in g.neighbors(u):
            if w not in dist:
                dist[w] = d + 1
                queue.append(w)
    return dist


def diameter(g: Graph) -> int:
    if not is_connected(g):
        raise GraphError("diameter is undefined for a disconnected graph")
    return max(max(bfs_distances(g, v).values()) for v in range(g.n))


def degree_distribution(g: Graph) -> np.ndarray:
    """Histogram ``q[k]`` = fraction of nodes with degree ``k``, for k = 0..n-1."""
    counts = np.bincount(g.degrees(), minlength=g.n)
    return counts[: g.n] / g.n


POWER_TOL = 1e-10
POWER_MAX_ITER = 100_000


def largest_eigenvalue(g: Graph, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> float:
    """Spectral radius of the adjacency matrix by power iteration.

    Iterates on ``A + I`` from the normalized all-ones vector. The unit shift
    separates ``lambda`` from ``-lambda`` on bipartite graphs, where plain power
    iteration oscillates instead of converging.
    """
    if g.m == 0:
        return 0.0
    return float(largest_eigenvalues([g.adjacency()], tol=tol, max_iter=max_iter)[0])


def largest_eigenvalues(adjs, tol: float = POWER_TOL, max_iter: int = POWER_MAX_ITER) -> np.ndarray:
    """Batched shifted power iteration over a stack of symmetric ``(n, n)`` adjacencies.

    Each matrix stops independently once successive Rayleigh quotients agree to ``tol``.
    """
    a = np.array(adjs, dtype=float)
    if a.ndim == 2:
        a = a[None]
    b, n, _ = a.shape
    out = np.empty(b)
    idx = np.arange(b)
    x = np.full((b, n, 1), 1.0 / np.sqrt(n))
    y = a @ x
    rq = np.einsum("bik,bik->b", x, y)
    finished = np.zeros(b, dtype=bool)
    for _ in range(max_iter):
        y += x
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        y = a @ x
        new = np.einsum("bik,bik->b", x, y)
        done = np.abs(new - rq) <= tol * np.maximum(1.0, np.abs(new))
        rq = new
        fresh = done & ~finished
        if fresh.any():
            out[idx[fresh]] = rq[fresh]
            finished |= fresh
            if finished.all():
                return out
            # compact only when enough rows finished to pay for the copy
            if finished.mean() > 0.25:
                keep = ~finished
                a, x, y, rq, idx = a[keep], x[keep], y[keep], rq[keep], idx[keep]
                finished = finished[keep]
    y = y[~finished]
    x = x[~finished]
    rq = rq[~finished]
    resid = np.linalg.norm(y - rq[:, None, None] * x, axis=1).max()
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations", float(resid))
