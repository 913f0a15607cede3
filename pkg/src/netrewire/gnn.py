"""Mean-field message-passing embeddings and the three phase-specific Q-heads.

Everything is plain numpy with hand-written backpropagation. Node embeddings
follow ``mu <- relu(x @ W_lift.T + (A @ mu) @ W_agg.T)`` for ``L`` rounds from
zero; a graph embedding is the sum of its node embeddings. The Q-head for
phase ``h`` concatenates the embeddings of the marked nodes, the candidate node
and the graph, then applies a hidden ReLU layer, batch normalization and a
linear read-out.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .env import RewireState

FEATURE_DIM = 3
HIDDEN_DIM = 128
BN_MOMENTUM = 0.1
BN_EPS = 1e-5
CHECKPOINT_VERSION = 1

HEADS = (0, 1, 2)
LEARNABLE = ("lift", "agg") + tuple(
    f"q{h}_{part}" for h in HEADS for part in ("hidden", "out", "bn_scale", "bn_shift")
)
STATISTICS = tuple(f"q{h}_{part}" for h in HEADS for part in ("bn_mean", "bn_var"))


def head_width(head: int, embedding_dim: int) -> int:
    """Input width of a head: marked nodes so far, the candidate and the graph."""
    return (head + 2) * embedding_dim


@dataclass
class ModelParams:
    arrays: dict[str, np.ndarray]
    rounds: int
    embedding_dim: int
    hidden_dim: int = HIDDEN_DIM
    feature_dim: int = FEATURE_DIM

    def __getitem__(self, key: str) -> np.ndarray:
        return self.arrays[key]

    @property
    def dtype(self) -> np.dtype:
        return self.arrays["lift"].dtype

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.arrays.items()},
                           self.rounds, self.embedding_dim, self.hidden_dim, self.feature_dim)

    def learnable(self) -> dict[str, np.ndarray]:
        return {k: self.arrays[k] for k in LEARNABLE}

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(self.arrays[k]) for k in LEARNABLE}


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


def init_params(embedding_dim: int = 64, rounds: int = 3, feature_dim: int = FEATURE_DIM,
                seed: int = 0, hidden_dim: int = HIDDEN_DIM, dtype="float64") -> ModelParams:
    if min(embedding_dim, feature_dim, hidden_dim) < 1 or rounds < 0:
        raise ValueError("dimensions must be positive and rounds non-negative")
    rng = np.random.default_rng(seed)
    arrays = {
        "lift": _glorot(rng, embedding_dim, feature_dim),
        "agg": _glorot(rng, embedding_dim, embedding_dim),
    }
    for h in HEADS:
        arrays[f"q{h}_hidden"] = _glorot(rng, hidden_dim, head_width(h, embedding_dim))
        arrays[f"q{h}_out"] = _glorot(rng, 1, hidden_dim)
        arrays[f"q{h}_bn_scale"] = np.ones(hidden_dim)
        arrays[f"q{h}_bn_shift"] = np.zeros(hidden_dim)
        arrays[f"q{h}_bn_mean"] = np.zeros(hidden_dim)
        arrays[f"q{h}_bn_var"] = np.ones(hidden_dim)
    arrays = {k: v.astype(dtype) for k, v in arrays.items()}
    return ModelParams(arrays, rounds, embedding_dim, hidden_dim, feature_dim)


def node_features(s: RewireState) -> np.ndarray:
    """Per-node ``[1, is_base, is_addition]``."""
    x = np.zeros((s.graph.n, FEATURE_DIM))
    x[:, 0] = 1.0
    if s.base is not None:
        x[s.base, 1] = 1.0
    if s.addition is not None:
        x[s.addition, 2] = 1.0
    return x


class GraphBatch:
    """Disjoint union of several graphs, laid out for sparse message passing."""

    def __init__(self, states: Sequence[RewireState], dtype="float64"):
        sizes = [s.graph.n for s in states]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.num_nodes = int(self.offsets[-1])
        self.num_graphs = len(states)
        rows, cols = [], []
        for s, off in zip(states, self.offsets):
            e = s.graph.edge_array()
            if len(e):
                rows.append(e[:, 0] + off)
                cols.append(e[:, 1] + off)
        if rows:
            r = np.concatenate(rows)
            c = np.concatenate(cols)
            data = np.ones(2 * r.size, dtype=dtype)
            self.adj = sp.csr_matrix((data, (np.concatenate([r, c]), np.concatenate([c, r]))),
                                     shape=(self.num_nodes, self.num_nodes))
        else:
            self.adj = sp.csr_matrix((self.num_nodes, self.num_nodes), dtype=dtype)
        self.graph_of = np.repeat(np.arange(self.num_graphs), sizes)
        self.pool = sp.csr_matrix((np.ones(self.num_nodes, dtype=dtype), (self.graph_of, np.arange(self.num_nodes))),
                                  shape=(self.num_graphs, self.num_nodes))
        feats = [node_features(s) for s in states]
        self.features = (np.concatenate(feats) if feats else np.zeros((0, FEATURE_DIM))).astype(dtype)


@dataclass
class EmbeddingResult:
    node_embeddings: np.ndarray
    graph_embeddings: np.ndarray
    cache: dict = field(default_factory=dict, repr=False)


def embed(batch: GraphBatch, p: ModelParams) -> EmbeddingResult:
    lift = batch.features @ p["lift"].T
    mu = np.zeros((batch.num_nodes, p.embedding_dim), dtype=p.dtype)
    aggs, pres = [], []
    for r in range(p.rounds):
        if r == 0:
            # embeddings start at zero, so the first round sees no messages
            agg, pre = None, lift
        else:
            agg = batch.adj @ mu
            pre = lift + agg @ p["agg"].T
        mu = np.maximum(pre, 0.0)
        aggs.append(agg)
        pres.append(pre)
    return EmbeddingResult(mu, batch.pool @ mu, {"aggs": aggs, "pres": pres})


def embed_graph(s: RewireState, p: ModelParams) -> EmbeddingResult:
    return embed(GraphBatch([s], p.dtype), p)


@dataclass
class QRows:
    """Flattened (state, candidate) rows; each row names its graph, head and node slots."""

    graph: np.ndarray
    head: np.ndarray
    slots: np.ndarray  # (rows, 3) global node indices: base, addition, candidate; -1 if unused


def build_rows(batch: GraphBatch, states: Sequence[RewireState], candidates: Sequence[Sequence[int]]) -> QRows:
    graph, head, slots = [], [], []
    for b, (s, cands) in enumerate(zip(states, candidates)):
        off = batch.offsets[b]
        base = off + s.base if s.base is not None else -1
        add = off + s.addition if s.addition is not None else -1
        k = len(cands)
        graph.append(np.full(k, b))
        head.append(np.full(k, s.phase))
        sl = np.empty((k, 3), dtype=np.int64)
        sl[:, 0] = base
        sl[:, 1] = add
        sl[:, 2] = off + np.asarray(cands, dtype=np.int64)
        slots.append(sl)
    if not graph:
        return QRows(np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 3), np.int64))
    return QRows(np.concatenate(graph).astype(np.int64), np.concatenate(head).astype(np.int64),
                 np.concatenate(slots))


def _head_input(h: int, rows: np.ndarray, qr: QRows, emb: EmbeddingResult) -> np.ndarray:
    mu = emb.node_embeddings
    parts = []
    if h >= 1:
        parts.append(mu[qr.slots[rows, 0]])
    if h >= 2:
        parts.append(mu[qr.slots[rows, 1]])
    parts.append(mu[qr.slots[rows, 2]])
    parts.append(emb.graph_embeddings[qr.graph[rows]])
    return np.concatenate(parts, axis=1)


@dataclass
class ForwardPass:
    q: np.ndarray
    batch: GraphBatch
    rows: QRows
    emb: EmbeddingResult
    heads: dict
    train: bool


def forward(p: ModelParams, states: Sequence[RewireState], candidates: Sequence[Sequence[int]],
            train: bool = False) -> ForwardPass:
    """Q-values for every (state, candidate) pair, concatenated in input order.

    ``train=True`` normalizes each head's hidden layer with the statistics of
    the rows it receives in this call. A head that receives a single row falls
    back to the running statistics.
    """
    batch = GraphBatch(states, p.dtype)
    qr = build_rows(batch, states, candidates)
    emb = embed(batch, p)
    q = np.zeros(len(qr.head), dtype=p.dtype)
    heads = {}
    for h in HEADS:
        rows = np.flatnonzero(qr.head == h)
        if rows.size == 0:
            continue
        z = _head_input(h, rows, qr, emb)
        pre = z @ p[f"q{h}_hidden"].T
        hid = np.maximum(pre, 0.0)
        batch_stats = train and rows.size > 1
        if batch_stats:
            mean = hid.mean(axis=0)
            var = hid.var(axis=0)
        else:
            mean = p[f"q{h}_bn_mean"]
            var = p[f"q{h}_bn_var"]
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (hid - mean) * inv_std
        y = xhat * p[f"q{h}_bn_scale"] + p[f"q{h}_bn_shift"]
        q[rows] = y @ p[f"q{h}_out"][0]
        heads[h] = {"rows": rows, "z": z, "pre": pre, "xhat": xhat, "y": y, "inv_std": inv_std,
                    "batch_stats": batch_stats, "batch_mean": mean, "hid": hid}
    return ForwardPass(q, batch, qr, emb, heads, train)


def q_values(s: RewireState, candidates: Sequence[int], p: ModelParams, train: bool = False) -> np.ndarray:
    if len(candidates) == 0:
        raise ValueError("empty candidate set")
    return forward(p, [s], [candidates], train=train).q


def q_values_many(p: ModelParams, states: Sequence[RewireState],
                  candidates: Sequence[Sequence[int]]) -> list[np.ndarray]:
    """Eval-mode Q-values for several states at once, split back per state."""
    if not states:
        return []
    fp = forward(p, states, candidates, train=False)
    bounds = np.cumsum([len(c) for c in candidates])[:-1]
    return np.split(fp.q, bounds)


def update_batch_stats(p: ModelParams, fp: ForwardPass, momentum: float = BN_MOMENTUM) -> None:
    """Fold the batch statistics of a train-mode pass into the running averages."""
    for h, c in fp.heads.items():
        if not c["batch_stats"]:
            continue
        r = c["rows"].size
        unbiased = c["hid"].var(axis=0) * r / (r - 1)
        p.arrays[f"q{h}_bn_mean"] = (1 - momentum) * p[f"q{h}_bn_mean"] + momentum * c["batch_mean"]
        p.arrays[f"q{h}_bn_var"] = (1 - momentum) * p[f"q{h}_bn_var"] + momentum * unbiased


def backward(p: ModelParams, fp: ForwardPass, dq: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every learnable array, given ``dloss/dq``."""
    grads = p.zeros_like()
    d = p.embedding_dim
    dmu = np.zeros_like(fp.emb.node_embeddings)
    dgraph = np.zeros_like(fp.emb.graph_embeddings)
    qr = fp.rows
    for h, c in fp.heads.items():
        rows = c["rows"]
        g = dq[rows]
        w_out = p[f"q{h}_out"][0]
        grads[f"q{h}_out"] = (g @ c["y"])[None, :]
        dy = g[:, None] * w_out[None, :]
        grads[f"q{h}_bn_shift"] = dy.sum(axis=0)
        grads[f"q{h}_bn_scale"] = (dy * c["xhat"]).sum(axis=0)
        dxhat = dy * p[f"q{h}_bn_scale"]
        if c["batch_stats"]:
            r = rows.size
            xhat = c["xhat"]
            dhid = (c["inv_std"] / r) * (r * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
        else:
            dhid = dxhat * c["inv_std"]
        dpre = dhid * (c["pre"] > 0)
        grads[f"q{h}_hidden"] = dpre.T @ c["z"]
        dz = dpre @ p[f"q{h}_hidden"]
        col = 0
        for slot in range(h):
            np.add.at(dmu, qr.slots[rows, slot], dz[:, col:col + d])
            col += d
        np.add.at(dmu, qr.slots[rows, 2], dz[:, col:col + d])
        col += d
        np.add.at(dgraph, qr.graph[rows], dz[:, col:col + d])
    dmu += fp.batch.pool.T @ dgraph
    x = fp.batch.features
    for agg, pre in zip(reversed(fp.emb.cache["aggs"]), reversed(fp.emb.cache["pres"])):
        dpre = dmu * (pre > 0)
        grads["lift"] += dpre.T @ x
        if agg is None:
            break
        grads["agg"] += dpre.T @ agg
        dmu = fp.batch.adj @ (dpre @ p["agg"])
    return grads


def save_checkpoint(p: ModelParams, path, extra: dict | None = None) -> None:
    meta = {"version": CHECKPOINT_VERSION, "rounds": p.rounds, "embedding_dim": p.embedding_dim,
            "hidden_dim": p.hidden_dim, "feature_dim": p.feature_dim, "extra": extra or {}}
    path = Path(path)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta, sort_keys=True)), **p.arrays)


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        arrays = {k: z[k].copy() for k in z.files if k != "__meta__"}
    missing = set(LEARNABLE + STATISTICS) - set(arrays)
    if missing:
        raise ValueError(f"checkpoint lacks arrays {sorted(missing)}")
    p = ModelParams(arrays, meta["rounds"], meta["embedding_dim"], meta["hidden_dim"], meta["feature_dim"])
    return p, meta["extra"]
