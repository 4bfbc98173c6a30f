"""Command-line entry point: ``rltask <command> [options]``.

Exit codes: 0 success, 1 verification failure, 2 input error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import StructureError, TaskError, TerminationError
from .experiments import (
    ExperimentConfig,
    cmd_analyze,
    cmd_equivalence,
    cmd_learn,
    cmd_reproduce,
    cmd_simulate,
)
from .taskfile import TaskFileError

DOMAINS = ("counterexample", "chain", "taxi", "random")


def _floats(text: str):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str):
    return tuple(x.strip() for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--task", help="JSON task file")
    common.add_argument("--domain", choices=DOMAINS)
    common.add_argument("--variant", help="chain kind or taxi discount variant")
    common.add_argument("--lambda", dest="lambdas", type=_floats, default=(), help="comma-separated trace values")
    common.add_argument("--weighting", type=_names, default=("d_pi", "behavior", "emphasis"),
                        help="comma-separated subset of d_pi,behavior,emphasis")
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("--steps", type=int, default=100)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the table here instead of stdout")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="rltask", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="weighted norms and definiteness per weighting and trace")
    sub.add_parser("simulate", parents=[common], help="greedy taxi rollouts")
    sub.add_parser("equivalence", parents=[common], help="compare a task with its induced state-based MDP")
    learn = sub.add_parser("learn", parents=[common], help="learning curve of an incremental learner")
    learn.add_argument("--algorithm", choices=("td", "true_online", "elstdq"), default="td")
    learn.add_argument("--alpha", type=float, default=0.1)
    learn.add_argument("--tau", type=float, default=1e3)
    analyze = sub.choices["analyze"]
    analyze.add_argument("--termination", help="random terminations for taxi, e.g. all_paths:0.1")
    rep = sub.add_parser("reproduce", parents=[common], help="taxi norm table and rollout statistics")
    rep.set_defaults(runs=5000)
    return p


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        command=args.command,
        domain=args.domain,
        variant=args.variant,
        task=args.task,
        lambdas=tuple(args.lambdas),
        weightings=tuple(args.weighting),
        algorithm=getattr(args, "algorithm", "td"),
        alpha=getattr(args, "alpha", 0.1),
        tau=getattr(args, "tau", 1e3),
        runs=args.runs,
        steps=args.steps,
        seed=args.seed,
        termination=getattr(args, "termination", None),
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    status = 0
    try:
        cfg = _config(args)
        if args.command in ("analyze", "equivalence", "learn") and not (cfg.task or cfg.domain):
            raise ValueError(f"{args.command} needs --task or --domain")
        if args.command == "analyze":
            table = cmd_analyze(cfg)
        elif args.command == "simulate":
            table = cmd_simulate(cfg)
        elif args.command == "equivalence":
            table, ok = cmd_equivalence(cfg)
            if not ok:
                status = 1
                for line in table.metadata["mismatches"]:
                    print(f"mismatch: {line}", file=sys.stderr)
        elif args.command == "learn":
            table = cmd_learn(cfg)
        else:
            table = cmd_reproduce(cfg)
    except TerminationError as exc:  # a LinAlgError, hence also a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TaskFileError, TaskError, StructureError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = table.render(args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
