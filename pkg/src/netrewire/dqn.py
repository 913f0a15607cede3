"""DQN training for the rewiring MDP: replay memory, target network, epsilon-greedy rollouts."""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gnn
from .env import RewireEnv, RewireState, valid_actions
from .graph import Graph, is_connected
from .gnn import ModelParams
from .objectives import ObjectiveConfig, evaluate
from .stats import mean_ci

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    total_steps: int = 120_000
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_decay_steps: int = 40_000
    batch_size: int = 50
    buffer_capacity: int = 12_000
    target_sync_every: int = 50
    learning_rate: float = 5e-4
    discount: float = 1.0
    validation_every: int = 500
    budget_fraction: float = 0.15
    embedding_dim: int = 64
    rounds: int = 3
    hidden_dim: int = gnn.HIDDEN_DIM
    dtype: str = "float32"
    seed: int = 0


# Tuned learning rate, message-passing rounds and embedding width per (objective, graph model).
TUNED = {
    ("merw", "BA-2"): (5e-4, 3, 128),
    ("merw", "BA-1"): (5e-4, 6, 128),
    ("merw", "ER"): (5e-4, 4, 128),
    ("merw", "WS"): (10e-4, 6, 128),
    ("shannon", "BA-2"): (10e-4, 3, 64),
    ("shannon", "BA-1"): (5e-4, 6, 64),
    ("shannon", "ER"): (1e-4, 4, 64),
    ("shannon", "WS"): (10e-4, 6, 64),
}


def tuned_config(objective: str, model: str, **overrides) -> TrainConfig:
    lr, rounds, dim = TUNED[(objective.lower(), model.upper())]
    kw = dict(learning_rate=lr, rounds=rounds, embedding_dim=dim)
    kw.update(overrides)
    return TrainConfig(**kw)


def epsilon(step: int, cfg: TrainConfig) -> float:
    frac = min(step, cfg.eps_decay_steps) / cfg.eps_decay_steps if cfg.eps_decay_steps else 1.0
    return cfg.eps_start - (cfg.eps_start - cfg.eps_end) * frac


@dataclass(frozen=True)
class Transition:
    state: RewireState
    action: int
    reward: float
    next_state: RewireState
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions; the oldest entry is evicted on overflow."""

    def __init__(self, capacity: int = 12_000):
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def push(self, tr: Transition) -> None:
        self._items.append(tr)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]

    def sample(self, k: int, rng: np.random.Generator) -> list[Transition]:
        if len(self._items) < k:
            raise ValueError(f"buffer holds {len(self._items)} transitions, need {k}")
        idx = rng.integers(len(self._items), size=k)
        return [self._items[i] for i in idx]


def greedy_action(s: RewireState, p: ModelParams, actions: Sequence[int] | None = None) -> int:
    acts = valid_actions(s) if actions is None else list(actions)
    q = gnn.q_values(s, acts, p)
    return acts[int(np.argmax(q))]


def behave(s: RewireState, p: ModelParams, eps: float, rng: np.random.Generator) -> int:
    acts = valid_actions(s)
    if not acts:
        raise ValueError("no legal action in this state")
    if rng.random() < eps:
        return acts[rng.integers(len(acts))]
    return greedy_action(s, p, acts)


def td_targets(transitions: Sequence[Transition], target: ModelParams, discount: float = 1.0) -> np.ndarray:
    y = np.array([tr.reward for tr in transitions], dtype=target.dtype)
    live = [i for i, tr in enumerate(transitions) if not tr.terminal]
    if live:
        states = [transitions[i].next_state for i in live]
        cands = [valid_actions(s) for s in states]
        qs = gnn.q_values_many(target, states, cands)
        y[live] += discount * np.array([q.max() for q in qs])
    return y


def td_target(tr: Transition, target: ModelParams, discount: float = 1.0) -> float:
    return float(td_targets([tr], target, discount)[0])


class Adam:
    def __init__(self, params: ModelParams, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = params.zeros_like()
        self.v = params.zeros_like()
        self.t = 0

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params.arrays[k] = params.arrays[k] - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def loss_and_grads(online: ModelParams, batch: Sequence[Transition], targets: np.ndarray):
    states = [tr.state for tr in batch]
    fp = gnn.forward(online, states, [[tr.action] for tr in batch], train=True)
    resid = fp.q - targets
    loss = float(np.mean(resid ** 2))
    grads = gnn.backward(online, fp, 2.0 * resid / len(batch))
    return loss, grads, fp


def train_step(buffer: ReplayBuffer, online: ModelParams, target: ModelParams, cfg: TrainConfig,
               opt: Adam, rng: np.random.Generator) -> float:
    """One Adam update on a uniform minibatch; returns the loss before the update."""
    batch = buffer.sample(cfg.batch_size, rng)
    y = td_targets(batch, target, cfg.discount)
    loss, grads, fp = loss_and_grads(online, batch, y)
    gnn.update_batch_stats(online, fp)
    opt.step(online, grads)
    return loss


@dataclass
class PolicyEvaluation:
    delta: list[float]           # objective gain per graph, NaN where the result is disconnected
    connected: list[bool]
    rewards: list[float]
    finals: list[Graph] = field(repr=False, default_factory=list)

    @property
    def connected_deltas(self) -> list[float]:
        return [d for d, c in zip(self.delta, self.connected) if c]

    @property
    def disconnected(self) -> int:
        return sum(not c for c in self.connected)

    @property
    def mean_ci(self) -> tuple[float, float]:
        return mean_ci(self.connected_deltas)


def rollout_greedy(p: ModelParams, graphs: Sequence[Graph], env: RewireEnv,
                   budget_fraction: float) -> list[tuple[RewireState, float]]:
    """Greedy episodes on all graphs in lockstep, one batched forward per sub-step."""
    states = [env.reset(g, budget_fraction) for g in graphs]
    rewards = [0.0] * len(graphs)
    while True:
        live = [i for i, s in enumerate(states) if not s.done]
        if not live:
            break
        cands = [valid_actions(states[i]) for i in live]
        qs = gnn.q_values_many(p, [states[i] for i in live], cands)
        for i, c, q in zip(live, cands, qs):
            out = env.step(states[i], c[int(np.argmax(q))])
            states[i] = out.next_state
            rewards[i] += out.reward
    return list(zip(states, rewards))


def evaluate_policy(p: ModelParams, graphs: Sequence[Graph], objective: ObjectiveConfig,
                    budget_fraction: float = 0.15) -> PolicyEvaluation:
    env = RewireEnv(objective)
    res = rollout_greedy(p, graphs, env, budget_fraction)
    deltas, conn, rewards, finals = [], [], [], []
    for (s, r), g0 in zip(res, graphs):
        ok = is_connected(s.graph)
        deltas.append(evaluate(objective, s.graph) - s.f0 if ok else math.nan)
        conn.append(ok)
        rewards.append(r)
        finals.append(s.graph)
    return PolicyEvaluation(deltas, conn, rewards, finals)


def validation_score(ev: PolicyEvaluation, objective: ObjectiveConfig) -> float:
    """Mean terminal reward in objective units: the gain when connected, penalty / scale otherwise."""
    return float(np.mean(ev.rewards)) / objective.reward_scale


@dataclass
class CurvePoint:
    step: int
    validation_mean: float
    validation_ci: float
    best_so_far: float


@dataclass
class TrainResult:
    best: ModelParams
    curve: list[CurvePoint]
    best_step: int
    final: ModelParams
    losses: list[float]


def train(train_graphs: Sequence[Graph], validation_graphs: Sequence[Graph], objective: ObjectiveConfig,
          cfg: TrainConfig, checkpoint_path=None) -> TrainResult:
    if not train_graphs or not validation_graphs:
        raise ValueError("training and validation sets must be non-empty")
    env = RewireEnv(objective)
    seeds = np.random.SeedSequence(cfg.seed)
    init_ss, sample_ss, episode_ss = seeds.spawn(3)
    online = gnn.init_params(cfg.embedding_dim, cfg.rounds, seed=int(init_ss.generate_state(1)[0]),
                             hidden_dim=cfg.hidden_dim, dtype=cfg.dtype)
    target = online.copy()
    best = online.copy()
    best_score, best_step = -math.inf, 0
    opt = Adam(online, cfg.learning_rate)
    sample_rng = np.random.default_rng(sample_ss)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    curve: list[CurvePoint] = []
    losses: list[float] = []

    state: RewireState | None = None
    episode = 0
    ep_rng = None
    for step in range(cfg.total_steps):
        if state is None or state.done:
            g = train_graphs[episode % len(train_graphs)]
            ep_rng = np.random.default_rng(np.random.SeedSequence(episode_ss.entropy, spawn_key=(episode,)))
            episode += 1
            state = env.reset(g, cfg.budget_fraction)
            if state.done:
                continue
        a = behave(state, online, epsilon(step, cfg), ep_rng)
        out = env.step(state, a)
        buffer.push(Transition(state, a, out.reward, out.next_state, out.terminal))
        state = out.next_state
        if len(buffer) >= cfg.batch_size:
            losses.append(train_step(buffer, online, target, cfg, opt, sample_rng))
        if (step + 1) % cfg.target_sync_every == 0:
            target = online.copy()
        if cfg.validation_every and (step + 1) % cfg.validation_every == 0:
            ev = evaluate_policy(online, validation_graphs, objective, cfg.budget_fraction)
            score = validation_score(ev, objective)
            ci = mean_ci(np.array(ev.rewards) / objective.reward_scale)[1]
            if score > best_score:
                best_score, best_step = score, step + 1
                best = online.copy()
                if checkpoint_path is not None:
                    gnn.save_checkpoint(best, checkpoint_path, {"step": best_step, "score": best_score})
            curve.append(CurvePoint(step + 1, score, ci, best_score))
            log.info("step %d validation %.4f (best %.4f)", step + 1, score, best_score)
    return TrainResult(best, curve, best_step, online, losses)
