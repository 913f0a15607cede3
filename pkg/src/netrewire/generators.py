"""Seeded BA / WS / ER generators that only ever return connected graphs."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, GraphError, is_connected

MAX_RETRIES = 100

MODELS = ("BA", "WS", "ER")


@dataclass(frozen=True)
class GeneratorSpec:
    model: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise GraphError(f"unknown graph model {self.model!r}")
        if self.n < 2:
            raise GraphError("generated graphs need n >= 2")
        if self.model == "BA":
            M = self.params.get("M", 2)
            if not 1 <= M < self.n:
                raise GraphError(f"BA needs 1 <= M < n, got M={M}")
        elif self.model == "WS":
            k = self.params.get("k", 4)
            p = self.params.get("p", 0.1)
            if k % 2 or not (0 < k < self.n):
                raise GraphError(f"WS needs even k with 0 < k < n, got k={k}")
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"WS rewiring probability out of range: {p}")
        elif self.model == "ER":
            p = self.params.get("p", 0.15)
            if not 0.0 <= p <= 1.0:
                raise GraphError(f"ER edge probability out of range: {p}")

    @property
    def label(self) -> str:
        if self.model == "BA":
            return f"BA-{self.params.get('M', 2)}"
        return self.model


def parse_model(name: str, n: int, seed: int = 0) -> GeneratorSpec:
    """Spec for the shorthand names used in experiments: BA-1, BA-2, WS, ER."""
    key = name.upper()
    if key.startswith("BA"):
        M = int(key.split("-")[1]) if "-" in key else 2
        return GeneratorSpec("BA", n, {"M": M}, seed)
    if key == "WS":
        return GeneratorSpec("WS", n, {"k": 4, "p": 0.1}, seed)
    if key == "ER":
        return GeneratorSpec("ER", n, {"p": 0.15}, seed)
    raise GraphError(f"unknown graph model {name!r}")


def _barabasi_albert(n: int, M: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    # complete graph on M+1 nodes, then preferential attachment of M edges per node
    edges = [(i, j) for i in range(M + 1) for j in range(i + 1, M + 1)]
    repeated = [v for e in edges for v in e]
    for v in range(M + 1, n):
        targets: set[int] = set()
        while len(targets) < M:
            targets.add(repeated[rng.integers(len(repeated))])
        for t in sorted(targets):
            edges.append((t, v))
            repeated.extend((t, v))
    return edges


def _watts_strogatz(n: int, k: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    adj = [set() for _ in range(n)]
    for u in range(n):
        for j in range(1, k // 2 + 1):
            v = (u + j) % n
            adj[u].add(v)
            adj[v].add(u)
    for j in range(1, k // 2 + 1):
        for u in range(n):
            v = (u + j) % n
            if v not in adj[u] or rng.random() >= p:
                continue
            choices = [w for w in range(n) if w != u and w not in adj[u]]
            if not choices:
                continue
            w = choices[rng.integers(len(choices))]
            adj[u].discard(v)
            adj[v].discard(u)
            adj[u].add(w)
            adj[w].add(u)
    return [(u, v) for u in range(n) for v in adj[u] if u < v]


def _erdos_renyi(n: int, p: float, rng: np.random.Generator) -> list[tuple[int, int]]:
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return list(zip(iu[keep].tolist(), ju[keep].tolist()))


def generate(spec: GeneratorSpec) -> Graph:
    """Draw a connected graph from ``spec``; deterministic in ``spec.seed``.

    Disconnected samples are redrawn from fresh child streams of the seed, up to
    ``MAX_RETRIES`` times.
    """
    streams = np.random.SeedSequence(spec.seed).spawn(MAX_RETRIES)
    for ss in streams:
        rng = np.random.default_rng(ss)
        if spec.model == "BA":
            edges = _barabasi_albert(spec.n, spec.params.get("M", 2), rng)
        elif spec.model == "WS":
            edges = _watts_strogatz(spec.n, spec.params.get("k", 4), spec.params.get("p", 0.1), rng)
        else:
            edges = _erdos_renyi(spec.n, spec.params.get("p", 0.15), rng)
        g = Graph(spec.n, edges)
        if is_connected(g):
            return g
    raise GraphError(f"no connected {spec.label} sample after {MAX_RETRIES} draws (seed={spec.seed})")


def generate_many(model: str, n: int, count: int, seed: int) -> list[Graph]:
    """``count`` graphs whose per-graph seeds are derived from ``seed``."""
    return [generate(parse_model(model, n, s)) for s in graph_seeds(seed, count)]


def graph_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)]
