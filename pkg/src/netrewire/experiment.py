"""Experiment plumbing: configs, dataset seeding, commands and result files."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import gnn
from .attack import evaluate_rewiring
from .baselines import greedy_episode, random_episode
from .dqn import TrainConfig, evaluate_policy, rollout_greedy, train, tuned_config
from .edgelist import read_graph, write_graph
from .env import RewireEnv
from .generators import generate, generate_many, graph_seeds, parse_model
from .graph import Graph, GraphError
from .ingest import LeafFilter, ingest_host_events, read_event_csv
from .objectives import ObjectiveConfig
from .stats import mean_ci

log = logging.getLogger(__name__)

SPLITS = ("train", "validation", "test")
BASELINES = ("random", "greedy")
# above this size one greedy episode takes far too long to be worth attempting
GREEDY_MAX_N = 100


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


@dataclass
class ExperimentConfig:
    objective: str = "merw"
    model: str = "BA-2"
    n: int = 30
    n_train: int = 600
    n_validation: int = 200
    n_test: int = 100
    budget_fraction: float = 0.15
    seeds: int = 10
    train: dict = field(default_factory=dict)
    sizes: list = field(default_factory=lambda: [10, 30, 100, 300])
    budgets: list = field(default_factory=lambda: [0.05, 0.10, 0.15, 0.20, 0.25])
    sweep_count: int = 100
    attack_entries: object = "synthetic"

    def __post_init__(self):
        if self.objective.lower() not in ("merw", "shannon"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        self.objective = self.objective.lower()
        try:
            parse_model(self.model, max(self.n, 5))
        except GraphError as err:
            raise ConfigError(str(err)) from None
        for name in ("n", "n_train", "n_validation", "n_test", "seeds", "sweep_count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.budget_fraction <= 1:
            raise ConfigError("budget_fraction must lie in (0, 1]")
        known = {f.name for f in fields(TrainConfig)}
        bad = set(self.train) - known
        if bad:
            raise ConfigError(f"unknown train settings {sorted(bad)}")

    @property
    def objective_config(self) -> ObjectiveConfig:
        return ObjectiveConfig(self.objective)

    def train_config(self, seed: int) -> TrainConfig:
        try:
            base = tuned_config(self.objective, self.model)
        except KeyError:
            base = TrainConfig()
        kw = asdict(base)
        kw.update(budget_fraction=self.budget_fraction, seed=seed)
        kw.update(self.train)
        return TrainConfig(**kw)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        """Accepts flat keys or the sections ``dataset``, ``train``, ``sweep`` and ``attack``."""
        flat = {}
        for key, value in d.items():
            if key in ("dataset", "sweep", "attack"):
                if not isinstance(value, dict):
                    raise ConfigError(f"section {key!r} must be a mapping")
                for k, v in value.items():
                    flat["sweep_count" if (key, k) == ("sweep", "count") else
                         "attack_entries" if (key, k) == ("attack", "entries") else k] = v
            else:
                flat[key] = value
        names = {f.name for f in fields(cls)}
        bad = set(flat) - names
        if bad:
            raise ConfigError(f"unknown config keys {sorted(bad)}")
        return cls(**flat)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from None


@dataclass(frozen=True)
class ResultRow:
    method: str
    objective: str
    model: str
    n: int
    budget_fraction: float
    seed: int
    metric: str
    value: float


ROW_FIELDS = [f.name for f in fields(ResultRow)]


def write_rows(rows: Iterable[ResultRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in ROW_FIELDS])
    return path


def read_rows(path) -> list[ResultRow]:
    with Path(path).open(newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append(ResultRow(rec["method"], rec["objective"], rec["model"], int(rec["n"]),
                                 float(rec["budget_fraction"]), int(rec["seed"]), rec["metric"],
                                 float(rec["value"])))
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, Path):
        return str(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def write_manifest(out_dir: Path, command: str, config: dict, files: Sequence[Path], extra: dict | None = None):
    """Provenance record; the only place a wall-clock timestamp is written."""
    payload = {
        "command": command,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "files": sorted(str(Path(f).relative_to(out_dir)) for f in files),
    }
    if extra:
        payload.update(extra)
    return write_json(payload, out_dir / "manifest.json")


def _map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---- datasets ---------------------------------------------------------------

def split_seed(master: int, split: str, extra: int = 0) -> int:
    """Seed for one dataset split, derived from the master seed."""
    ss = np.random.SeedSequence([master, SPLITS.index(split), extra])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def dataset_seeds(cfg: ExperimentConfig, master: int) -> dict[str, list[int]]:
    counts = {"train": cfg.n_train, "validation": cfg.n_validation, "test": cfg.n_test}
    seeds = {s: graph_seeds(split_seed(master, s), counts[s]) for s in SPLITS}
    a, b, c = (set(seeds[s]) for s in SPLITS)
    if a & b or a & c or b & c:
        raise GraphError("dataset splits share a graph seed; pick another master seed")
    return seeds


def dataset(cfg: ExperimentConfig, master: int, split: str, n: int | None = None) -> list[Graph]:
    counts = {"train": cfg.n_train, "validation": cfg.n_validation, "test": cfg.n_test}
    n = cfg.n if n is None else n
    return generate_many(cfg.model, n, counts[split], split_seed(master, split))


# ---- strategies -------------------------------------------------------------

@dataclass
class Outcome:
    graph: Graph
    delta: float
    connected: bool


def load_model(path) -> tuple[gnn.ModelParams, dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint {path} not found")
    return gnn.load_checkpoint(path)


def rewire_all(method: str, graphs: Sequence[Graph], objective: ObjectiveConfig, budget_fraction: float,
               master: int, workers: int = 1, params: gnn.ModelParams | None = None) -> list[Outcome]:
    """Apply one strategy to every graph; results are independent of ``workers``."""
    if method == "dqn":
        ev = evaluate_policy(params, graphs, objective, budget_fraction)
        return [Outcome(g, d, c) for g, d, c in zip(ev.finals, ev.delta, ev.connected)]
    if method == "noop":
        return [Outcome(g, 0.0, True) for g in graphs]
    jobs = [(method, g, objective.kind.value, budget_fraction, master, i) for i, g in enumerate(graphs)]
    return _map(_baseline_job, jobs, workers)


def _baseline_job(job) -> Outcome:
    method, g, kind, frac, master, i = job
    objective = ObjectiveConfig(kind)
    if method == "random":
        r = random_episode(g, frac, np.random.default_rng([master, i]), objective)
    elif method == "greedy":
        r = greedy_episode(g, frac, objective)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return Outcome(r.graph, r.delta, r.connected)


def _summary_rows(method, cfg, n, frac, seed, outcomes: Sequence[Outcome]) -> list[ResultRow]:
    deltas = [o.delta for o in outcomes if o.connected]
    mean, ci = mean_ci(deltas)
    base = dict(method=method, objective=cfg.objective, model=cfg.model, n=n, budget_fraction=frac, seed=seed)
    return [ResultRow(metric="delta_mean", value=mean, **base),
            ResultRow(metric="delta_ci95", value=ci, **base),
            ResultRow(metric="connected", value=float(len(deltas)), **base),
            ResultRow(metric="disconnected", value=float(len(outcomes) - len(deltas)), **base)]


# ---- commands ---------------------------------------------------------------

def cmd_generate(model: str, n: int, count: int, master: int, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files, entries = [], []
    for i, s in enumerate(graph_seeds(master, count)):
        spec = parse_model(model, n, s)
        g = generate(spec)
        path = out_dir / f"graph_{i:04d}.txt"
        write_graph(g, path)
        files.append(path)
        entries.append({"file": path.name, "model": spec.model, "params": spec.params, "seed": s,
                        "n": g.n, "m": g.m})
    write_json(entries, out_dir / "graphs.json")
    write_manifest(out_dir, "generate", {"model": model, "n": n, "count": count, "seed": master},
                   files + [out_dir / "graphs.json"])
    return files


def read_graph_set(path) -> list[Graph]:
    """A single edge-list file, or every ``*.txt`` edge list in a directory (sorted by name)."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise FileNotFoundError(f"no edge-list files in {path}")
        return [read_graph(f) for f in files]
    return [read_graph(path)]


def _train_job(job):
    cfg, master, s, out_dir = job
    train_graphs = dataset(cfg, master, "train")
    val_graphs = dataset(cfg, master, "validation")
    tcfg = cfg.train_config(split_seed(master, "train", extra=s + 1))
    res = train(train_graphs, val_graphs, cfg.objective_config, tcfg)
    ckpt = Path(out_dir) / f"model_seed{s}.npz"
    gnn.save_checkpoint(res.best, ckpt, {"objective": cfg.objective, "model": cfg.model, "seed": s,
                                         "best_step": res.best_step, "train_config": asdict(tcfg)})
    rows = []
    base = dict(method="dqn", objective=cfg.objective, model=cfg.model, n=cfg.n,
                budget_fraction=cfg.budget_fraction, seed=s)
    for c in res.curve:
        rows.append(ResultRow(metric=f"validation_mean@{c.step}", value=c.validation_mean, **base))
        rows.append(ResultRow(metric=f"validation_ci95@{c.step}", value=c.validation_ci, **base))
    rows.append(ResultRow(metric="best_step", value=float(res.best_step), **base))
    return ckpt, rows


def cmd_train(cfg: ExperimentConfig, master: int, out_dir, workers: int = 1) -> list[Path]:
    """Train one model per seed; writes the best checkpoint of each and the learning curves."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset_seeds(cfg, master)  # fail early on overlapping splits
    results = _map(_train_job, [(cfg, master, s, out_dir) for s in range(cfg.seeds)], workers)
    rows = [r for _, rs in results for r in rs]
    curve = write_rows(rows, out_dir / "curve.csv")
    files = [p for p, _ in results] + [curve]
    write_manifest(out_dir, "train", asdict(cfg), files, {"seed": master})
    return files


def cmd_eval(method: str, cfg: ExperimentConfig, master: int, out_dir, checkpoints: Sequence = (),
             workers: int = 1) -> list[ResultRow]:
    """Mean gain on the test split; disconnected finals are counted and left out of the mean."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graphs = dataset(cfg, master, "test")
    objective = cfg.objective_config
    rows, per_graph = [], []
    if method == "dqn":
        if not checkpoints:
            raise ConfigError("dqn evaluation needs at least one checkpoint")
        runs = []
        for path in checkpoints:
            p, extra = load_model(path)
            runs.append((int(extra.get("seed", len(runs))), rewire_all("dqn", graphs, objective,
                                                                       cfg.budget_fraction, master, params=p)))
    else:
        runs = [(master, rewire_all(method, graphs, objective, cfg.budget_fraction, master, workers))]
    for seed, outcomes in runs:
        rows += _summary_rows(method, cfg, cfg.n, cfg.budget_fraction, seed, outcomes)
        base = dict(method=method, objective=cfg.objective, model=cfg.model, n=cfg.n,
                    budget_fraction=cfg.budget_fraction, seed=seed)
        per_graph += [ResultRow(metric=f"delta[{i}]", value=o.delta, **base) for i, o in enumerate(outcomes)]
    if len(runs) > 1:
        means = [r.value for r in rows if r.metric == "delta_mean"]
        m, ci = mean_ci(means)
        base = dict(method=method, objective=cfg.objective, model=cfg.model, n=cfg.n,
                    budget_fraction=cfg.budget_fraction, seed=-1)
        rows += [ResultRow(metric="delta_mean_over_seeds", value=m, **base),
                 ResultRow(metric="delta_ci95_over_seeds", value=ci, **base)]
    files = [write_rows(rows, out_dir / "eval.csv"), write_rows(per_graph, out_dir / "eval_per_graph.csv")]
    write_json({"method": method, "rows": [asdict(r) for r in rows]}, out_dir / "eval.json")
    write_manifest(out_dir, "eval", asdict(cfg), files + [out_dir / "eval.json"],
                   {"seed": master, "method": method, "checkpoints": [str(c) for c in checkpoints]})
    return rows


def cmd_sweep(method: str, cfg: ExperimentConfig, master: int, out_dir, checkpoint=None,
              workers: int = 1) -> list[ResultRow]:
    """Evaluate one strategy across graph sizes and budgets on freshly generated graphs."""
    if method == "greedy":
        raise ConfigError("greedy does not scale to sweeps; use dqn or random")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objective = cfg.objective_config
    params, seed = None, master
    if method == "dqn":
        if checkpoint is None:
            raise ConfigError("dqn sweep needs a checkpoint")
        params, extra = load_model(checkpoint)
        seed = int(extra.get("seed", 0))
    rows = []
    for n in cfg.sizes:
        graphs = generate_many(cfg.model, int(n), cfg.sweep_count, split_seed(master, "test", extra=int(n)))
        for frac in cfg.budgets:
            out = rewire_all(method, graphs, objective, float(frac), master, workers, params)
            rows += _summary_rows(method, cfg, int(n), float(frac), seed, out)
    path = write_rows(rows, out_dir / "sweep.csv")
    write_manifest(out_dir, "sweep", asdict(cfg), [path], {"seed": master, "method": method,
                                                           "checkpoint": str(checkpoint)})
    return rows


def _attack_job(job):
    g0, g_star, rule, master, i = job
    return evaluate_rewiring(g0, g_star, rule, np.random.default_rng([master, i, 1]))


def cmd_attack(method: str, graphs: Sequence[Graph], cfg: ExperimentConfig, master: int, out_dir,
               checkpoint=None, workers: int = 1, label: str = "") -> list[ResultRow]:
    """Rewire each graph, then measure the random-walk cost an attacker pays to find lost targets."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objective = cfg.objective_config
    model = label or cfg.model
    n = graphs[0].n if graphs else 0
    base = dict(method=method, objective=cfg.objective, model=model, n=n, budget_fraction=cfg.budget_fraction)
    rows: list[ResultRow] = []
    walks: list[tuple] = []
    if method == "greedy" and max(g.n for g in graphs) > GREEDY_MAX_N:
        rows.append(ResultRow(seed=master, metric="cost_mean", value=math.inf, **base))
        log.warning("greedy is infeasible above n=%d; reported as inf", GREEDY_MAX_N)
    else:
        if method == "dqn" and checkpoint is None:
            raise ConfigError("dqn attack needs a checkpoint")
        params = load_model(checkpoint)[0] if method == "dqn" else None
        outcomes = rewire_all(method, graphs, objective, cfg.budget_fraction, master, workers, params)
        jobs = [(g, o.graph, cfg.attack_entries, master, i)
                for i, (g, o) in enumerate(zip(graphs, outcomes)) if o.connected]
        summaries = _map(_attack_job, jobs, workers)
        skipped = sum(not o.connected for o in outcomes)
        costs = []
        for (_, _, _, _, i), summ in zip(jobs, summaries):
            m, ci = summ.mean_ci
            costs.append(m)
            rows.append(ResultRow(seed=master, metric=f"cost_normalized[{i}]", value=m, **base))
            walks += [(i, e, t, c) for e, t, c in summ.rows()]
        m, ci = mean_ci(costs)
        rows += [ResultRow(seed=master, metric="cost_mean", value=m, **base),
                 ResultRow(seed=master, metric="cost_ci95", value=ci, **base),
                 ResultRow(seed=master, metric="disconnected_skipped", value=float(skipped), **base)]
    files = [write_rows(rows, out_dir / "attack.csv")]
    with (out_dir / "walks.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["graph", "entry", "target", "cost"])
        w.writerows(walks)
    files.append(out_dir / "walks.csv")
    summary = {r.metric: r.value for r in rows if "[" not in r.metric}
    files.append(write_json({"method": method, "summary": summary}, out_dir / "attack.json"))
    write_manifest(out_dir, "attack", asdict(cfg), files, {"seed": master, "method": method,
                                                           "checkpoint": str(checkpoint)})
    return rows


def time_dqn_episode(p: gnn.ModelParams, g: Graph, objective: ObjectiveConfig, budget_fraction: float) -> float:
    start = time.perf_counter()
    rollout_greedy(p, [g], RewireEnv(objective), budget_fraction)
    return time.perf_counter() - start


def cmd_timing(methods: Sequence[str], sizes: Sequence[int], cfg: ExperimentConfig, master: int, out_dir,
               checkpoint=None, repeats: int = 3, limit: float | None = None) -> list[ResultRow]:
    """Wall-clock seconds per full rewiring episode. Timing rows are not byte-reproducible."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    objective = cfg.objective_config
    rows = []
    for method in methods:
        if method == "dqn":
            if checkpoint is not None:
                p = load_model(checkpoint)[0]
            else:
                # episode time does not depend on the weights
                t = cfg.train_config(0)
                p = gnn.init_params(t.embedding_dim, t.rounds, seed=master, hidden_dim=t.hidden_dim, dtype=t.dtype)
        skip = False
        for n in sizes:
            base = dict(method=method, objective=cfg.objective, model=cfg.model, n=int(n),
                        budget_fraction=cfg.budget_fraction)
            if skip:
                rows.append(ResultRow(seed=master, metric="seconds", value=math.inf, **base))
                continue
            graphs = generate_many(cfg.model, int(n), repeats, split_seed(master, "test", extra=int(n)))
            times = []
            for i, g in enumerate(graphs):
                if method == "dqn":
                    times.append(time_dqn_episode(p, g, objective, cfg.budget_fraction))
                elif method == "greedy":
                    s = time.perf_counter()
                    greedy_episode(g, cfg.budget_fraction, objective)
                    times.append(time.perf_counter() - s)
                elif method == "random":
                    s = time.perf_counter()
                    random_episode(g, cfg.budget_fraction, np.random.default_rng([master, i]), objective)
                    times.append(time.perf_counter() - s)
                else:
                    raise ConfigError(f"unknown method {method!r}")
            sec = float(np.median(times))
            rows.append(ResultRow(seed=master, metric="seconds", value=sec, **base))
            # larger graphs only get slower; stop once one size blows the per-episode limit
            skip = limit is not None and sec > limit
    path = write_rows(rows, out_dir / "timing.csv")
    write_manifest(out_dir, "timing", asdict(cfg), [path], {"seed": master, "methods": list(methods)})
    return rows


def cmd_ingest(csv_path, out_dir, degree_cap: int = 80, leaf_fraction: float = 0.5, min_neighbors: int = 5,
               src_col: str = "SrcDevice", dst_col: str = "DstDevice") -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rep = ingest_host_events(read_event_csv(csv_path, src_col, dst_col), degree_cap,
                             LeafFilter(leaf_fraction, min_neighbors))
    write_graph(rep.graph, out_dir / "graph.txt")
    (out_dir / "hosts.txt").write_text("\n".join(rep.hosts) + "\n")
    stats = {"n": rep.n, "m": rep.m, "diameter": rep.diameter, "degree_cap": degree_cap,
             "leaf_fraction": leaf_fraction, "min_neighbors": min_neighbors}
    write_json(stats, out_dir / "stats.json")
    write_manifest(out_dir, "ingest", {"source": str(csv_path), **stats},
                   [out_dir / "graph.txt", out_dir / "hosts.txt", out_dir / "stats.json"])
    return stats
