"""Graph entropy objectives: Shannon degree entropy (bits) and MERW entropy rate (nats)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, degree_distribution, is_connected, largest_eigenvalue, largest_eigenvalues


class ObjectiveKind(str, enum.Enum):
    SHANNON = "shannon"
    MERW = "merw"


DEFAULT_REWARD_SCALE = {ObjectiveKind.SHANNON: 100.0, ObjectiveKind.MERW: 10.0}


@dataclass(frozen=True)
class ObjectiveConfig:
    kind: ObjectiveKind
    reward_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        if self.reward_scale is None:
            object.__setattr__(self, "reward_scale", DEFAULT_REWARD_SCALE[self.kind])
        if not self.reward_scale > 0:
            raise ValueError(f"reward scale must be positive, got {self.reward_scale}")


def shannon_entropy(g: Graph) -> float:
    q = degree_distribution(g)[1:]
    q = q[q > 0]
    return float(-(q * np.log2(q)).sum()) if q.size else 0.0


def merw_entropy(g: Graph) -> float:
    if not is_connected(g):
        raise GraphError("MERW entropy requires a connected graph")
    return math.log(largest_eigenvalue(g))


def evaluate(config: ObjectiveConfig, g: Graph) -> float:
    if config.kind is ObjectiveKind.SHANNON:
        return shannon_entropy(g)
    return merw_entropy(g)


def evaluate_many(config: ObjectiveConfig, graphs_or_adjs) -> np.ndarray:
    """Objective over many same-size candidates; MERW runs one batched power iteration.

    Accepts either a list of graphs or an ``(b, n, n)`` adjacency stack. No
    connectivity check is done here; callers filter disconnected candidates.
    """
    if config.kind is ObjectiveKind.SHANNON:
        if isinstance(graphs_or_adjs, np.ndarray):
            degs = graphs_or_adjs.sum(axis=2).astype(np.int64)
            return np.array([_shannon_from_degrees(d) for d in degs])
        return np.array([shannon_entropy(g) for g in graphs_or_adjs])
    adjs = graphs_or_adjs if isinstance(graphs_or_adjs, np.ndarray) else np.stack([g.adjacency() for g in graphs_or_adjs])
    return np.log(largest_eigenvalues(adjs))


def _shannon_from_degrees(deg: np.ndarray) -> float:
    n = deg.size
    q = np.bincount(deg, minlength=n)[1:n] / n
    q = q[q > 0]
    return float(-(q * np.log2(q)).sum()) if q.size else 0.0
