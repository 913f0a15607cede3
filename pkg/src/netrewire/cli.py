"""Command-line entry point: ``netrewire <verb> [options]``."""
from __future__ import annotations

import argparse
import logging
import signal
import sys
from contextlib import contextmanager
from pathlib import Path

from . import experiment as ex
from .graph import GraphError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_TIMEOUT = 0, 1, 2, 3

log = logging.getLogger("netrewire")


class CommandTimeout(Exception):
    pass


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; usage errors are 1 here
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@contextmanager
def time_limit(seconds: float | None):
    if not seconds:
        yield
        return

    def _raise(signum, frame):
        raise CommandTimeout(f"gave up after {seconds:g}s")

    old = signal.signal(signal.SIGALRM, _raise)
    signal.setitimer(signal.ITIMER_REAL, seconds)
    try:
        yield
    finally:
        signal.setitimer(signal.ITIMER_REAL, 0)
        signal.signal(signal.SIGALRM, old)


def _sizes(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _fractions(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--timeout", type=float, default=None, help="abort after this many seconds")
    common.add_argument("--objective", choices=["merw", "shannon"], help="override config objective")
    common.add_argument("--model", help="override config graph model (BA-1, BA-2, WS, ER)")
    common.add_argument("-n", "--nodes", type=int, dest="n", help="override config graph size")
    common.add_argument("--budget", type=float, help="override config budget fraction")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="netrewire", description="Entropy-raising graph rewiring: training, baselines, attack cost.")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a seeded set of edge-list graphs")
    g.add_argument("--count", type=int, default=100)

    sub.add_parser("train", parents=[common], help="train one DQN model per seed")

    e = sub.add_parser("eval", parents=[common], help="mean entropy gain on the test split")
    e.add_argument("method", choices=["dqn", "random", "greedy"])
    e.add_argument("--checkpoint", type=Path, nargs="+", default=[])

    s = sub.add_parser("sweep", parents=[common], help="evaluate across graph sizes and budgets")
    s.add_argument("method", choices=["dqn", "random", "greedy"])
    s.add_argument("--checkpoint", type=Path)
    s.add_argument("--sizes", type=_sizes)
    s.add_argument("--budgets", type=_fractions)

    a = sub.add_parser("attack", parents=[common], help="random-walk cost of a rewiring strategy")
    a.add_argument("method", choices=["dqn", "random", "greedy", "noop"])
    a.add_argument("--checkpoint", type=Path)
    a.add_argument("--graphs", type=Path, help="edge-list file or directory; default: test split")
    a.add_argument("--entries", default=None, help="'synthetic', 'all' or a count")

    t = sub.add_parser("timing", parents=[common], help="wall-clock time per rewiring episode")
    t.add_argument("--methods", default="greedy,dqn")
    t.add_argument("--sizes", type=_sizes, default=[20, 40, 60, 80])
    t.add_argument("--checkpoint", type=Path)
    t.add_argument("--repeats", type=int, default=3)
    t.add_argument("--limit", type=float, default=None, help="skip larger sizes once an episode exceeds this")

    i = sub.add_parser("ingest", parents=[common], help="host event log to communication graph")
    i.add_argument("events", type=Path)
    i.add_argument("--degree-cap", type=int, default=80)
    i.add_argument("--leaf-fraction", type=float, default=0.5)
    i.add_argument("--min-neighbors", type=int, default=5)
    i.add_argument("--src-col", default="SrcDevice")
    i.add_argument("--dst-col", default="DstDevice")
    return p


def load_config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    overrides = {k: v for k, v in (("objective", args.objective), ("model", args.model), ("n", args.n),
                                   ("budget_fraction", args.budget)) if v is not None}
    if getattr(args, "entries", None) is not None:
        e = args.entries
        overrides["attack_entries"] = int(e) if e.isdigit() else e
    for key in ("sizes", "budgets"):
        if getattr(args, key, None) is not None and args.verb == "sweep":
            overrides[key] = getattr(args, key)
    if overrides:
        d = {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}
        d.update(overrides)
        cfg = ex.ExperimentConfig(**d)
    return cfg


def _print_rows(rows):
    for r in rows:
        print(f"{r.method:7s} {r.objective:8s} {r.model:5s} n={r.n:<4d} b={r.budget_fraction:<5g} "
              f"seed={r.seed:<3d} {r.metric:22s} {r.value:.4f}")


def run(args) -> None:
    cfg = load_config(args)
    out = args.out
    if args.verb == "generate":
        files = ex.cmd_generate(cfg.model, cfg.n, args.count, args.seed, out)
        print(f"wrote {len(files)} graphs to {out}")
    elif args.verb == "train":
        files = ex.cmd_train(cfg, args.seed, out, args.workers)
        print("\n".join(str(f) for f in files))
    elif args.verb == "eval":
        _print_rows(ex.cmd_eval(args.method, cfg, args.seed, out, args.checkpoint, args.workers))
    elif args.verb == "sweep":
        _print_rows(ex.cmd_sweep(args.method, cfg, args.seed, out, args.checkpoint, args.workers))
    elif args.verb == "attack":
        if args.graphs is not None:
            graphs, label = ex.read_graph_set(args.graphs), args.graphs.stem
        else:
            graphs, label = ex.dataset(cfg, args.seed, "test"), ""
        rows = ex.cmd_attack(args.method, graphs, cfg, args.seed, out, args.checkpoint, args.workers, label)
        _print_rows([r for r in rows if "[" not in r.metric])
    elif args.verb == "timing":
        methods = [m for m in args.methods.split(",") if m]
        _print_rows(ex.cmd_timing(methods, args.sizes, cfg, args.seed, out, args.checkpoint, args.repeats,
                                  args.limit))
    elif args.verb == "ingest":
        stats = ex.cmd_ingest(args.events, out, args.degree_cap, args.leaf_fraction, args.min_neighbors,
                              args.src_col, args.dst_col)
        print(f"n={stats['n']} m={stats['m']} diameter={stats['diameter']}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed < 0 or args.workers < 1:
            raise UsageError("--seed must be >= 0 and --workers >= 1")
    except UsageError as err:
        print(f"netrewire: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        with time_limit(args.timeout):
            run(args)
    except (ex.ConfigError, UsageError) as err:
        print(f"netrewire: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except CommandTimeout as err:
        print(f"netrewire: timeout: {err}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (GraphError, FileNotFoundError, OSError, RuntimeError, ValueError) as err:
        print(f"netrewire: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
