"""Command-line entry point.

Exit codes: 0 success, 1 usage error (bad flags, config or checkpoint
path), 2 runtime fault (diverged training, simulation fault, failed oracle
check).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .. import quadsim as qs
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import TASKS, ConfigError, ExperimentConfig
from .oracle_suite import run_suite
from .train import TrainingDiverged, evaluate, speder_train, steady_transfer

log = logging.getLogger("skilltransfer")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p, checkpoint=False):
    p.add_argument("--config", type=Path, help="INI experiment config (defaults if omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    if checkpoint:
        p.add_argument("--checkpoint", type=Path, required=True, help="checkpoint to read")


def build_parser():
    parser = _Parser(prog="skilltransfer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train-sim", help="simulator stage: writes sim.ckpt and metrics_sim.csv")
    _common(p)

    p = sub.add_parser("transfer", help="real stage from a simulator checkpoint")
    _common(p, checkpoint=True)
    p.add_argument("--skill-transfer-only", action="store_true",
                   help="ablation: skip residual skill discovery")

    p = sub.add_parser("eval", help="deterministic evaluation of a checkpoint")
    _common(p, checkpoint=True)
    p.add_argument("--task", choices=TASKS, help="task (defaults to the config's eval.task)")
    p.add_argument("--episodes", type=int, help="episodes (defaults to eval.episodes)")
    p.add_argument("--env", choices=("real", "sim"), default="real",
                   help="gapped vehicle from the config (real) or the nominal one (sim)")

    p = sub.add_parser("oracle-check", help="run the tabular oracle suite")
    _common(p)

    p = sub.add_parser("export-gains", help="write the actor's 24 gains as JSON")
    _common(p, checkpoint=True)
    return parser


def _config(args):
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _checkpoint(path, stage=None):
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    return load_checkpoint(path, expect_stage=stage)


def _run(args):
    out = args.out
    if args.command == "oracle-check":
        rows = run_suite()
        width = max(len(r[0]) for r in rows)
        for name, ok, detail in rows:
            print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
        return 0 if all(r[1] for r in rows) else 2

    if args.config is not None and not args.config.is_file():
        raise UsageError(f"config not found: {args.config}")
    os.makedirs(out, exist_ok=True)

    if args.command == "train-sim":
        cfg = _config(args)
        agent = speder_train(cfg, out / "metrics_sim.csv")
        save_checkpoint(agent, out / "sim.ckpt")
        print(f"wrote {out / 'sim.ckpt'} ({agent.counters['transitions']} transitions)")
        return 0

    if args.command == "transfer":
        sim = _checkpoint(args.checkpoint, "simulator")
        cfg = _config(args) if args.config else sim.config
        if args.seed is not None:
            cfg.seed = args.seed
        if args.skill_transfer_only:
            cfg.train.skill_transfer_only = True
        agent = steady_transfer(cfg, sim, out / "metrics_real.csv")
        save_checkpoint(agent, out / "real.ckpt")
        print(f"wrote {out / 'real.ckpt'}")
        return 0

    if args.command == "eval":
        agent = _checkpoint(args.checkpoint)
        cfg = agent.config
        task = args.task or cfg.eval.task
        episodes = args.episodes or cfg.eval.episodes
        if episodes <= 0:
            raise UsageError("--episodes must be positive")
        seed = cfg.seed if args.seed is None else args.seed
        ep = evaluate(agent, task, episodes, seed, args.env, out / "metrics_eval.csv",
                      out / "trajectory_eval.csv")
        print(f"{task}: tracking error {ep.tracking_error.mean():.6f} m, "
              f"return {ep.returns.mean():.3f} over {episodes} episodes")
        return 0

    if args.command == "export-gains":
        agent = _checkpoint(args.checkpoint)
        agent.actor.gains.to_json(out / "gains.json")
        print(f"wrote {out / 'gains.json'}")
        return 0
    raise UsageError(f"unknown command {args.command}")  # unreachable with required subparsers


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        # single-threaded BLAS keeps floating-point reductions reproducible
        with threadpool_limits(limits=1):
            return _run(args)
    except (UsageError, ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, qs.SimulationFault, FloatingPointError, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
