"""Command-line front end: ``clewa run | accept | oracle | replay``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import List, Optional

from clewa.algorithms import LearnerKind, make_learner
from clewa.environments import learner_stream, read_trace
from clewa.harness.acceptance import ACCEPTANCE_SEED, all_passed, run_acceptance
from clewa.harness.config import ConfigError, load_config
from clewa.harness.runner import (
    InvariantViolation,
    check_invariants,
    fit_and_report,
    fmt,
    play,
    run_experiment,
)
from clewa.metrics import evaluate
from clewa.oracle import Infeasible, best_fixed

EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_INFEASIBLE = 4


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _vector(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clewa", description="Constrained exponentially weighted average learners."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment grid")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", type=Path, help="output directory (default: config output_dir)")
    run.add_argument("--seed", type=_u64, help="master seed; beats $CLEWA_SEED and the file")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--timing", action="store_true",
                     help="record wall_ms (runs.csv is then no longer reproducible)")

    acc = sub.add_parser("accept", help="run the built-in acceptance grid")
    acc.add_argument("--seed", type=_u64, default=ACCEPTANCE_SEED)
    acc.add_argument("--jobs", type=int, default=1)
    acc.add_argument("--out", type=Path, help="keep the acceptance CSVs here")

    orc = sub.add_parser("oracle", help="print the best fixed feasible distribution")
    orc.add_argument("--rewards", required=True, type=_vector)
    orc.add_argument("--constraint", required=True, type=_vector)
    orc.add_argument("--c0", required=True, type=float)

    rep = sub.add_parser("replay", help="re-run a learner on a serialized trace")
    rep.add_argument("--trace", required=True, type=Path)
    rep.add_argument("--learner", required=True)
    rep.add_argument("--label", help="learner label used to key its random stream")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config, seed=args.seed)
    if args.timing:
        config = dataclasses.replace(config, record_wall_time=True)
    out = args.out or Path(config.output_dir)
    summary = run_experiment(config, jobs=max(1, args.jobs), output_dir=out)
    print(f"master_seed={config.master_seed} wrote {out / 'runs.csv'} and {out / 'summary.csv'}")
    for s in summary:
        print(f"{s.learner:<16} T={s.T:<8d} regret={s.regret_mean:12.3f} +- {s.regret_std:9.3f}"
              f"  violation={s.violation_mean:12.3f}  within-bound={s.bound_fraction:.2f}")
    for spec in config.learners:
        if spec.kind is LearnerKind.HP_LEWA:
            # epsilon is a per-round confidence; over T rounds it union-bounds to epsilon*T
            eps = float(spec.override_map.get("epsilon", 0.1))
            bounded = ", ".join(f"T={T}: {eps * T:g}" for T in config.horizons)
            print(f"{spec.label}: epsilon={eps:g} per round; union-bounded epsilon*T {bounded}")
    if len(config.horizons) >= 3:
        for row in fit_and_report(summary, config.threshold_map):
            print(row.line())
    return 0


def _cmd_accept(args) -> int:
    results = run_acceptance(out_dir=args.out, seed=args.seed, jobs=max(1, args.jobs),
                             echo=lambda line: print(line, flush=True))
    ok = all_passed(results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return 0 if ok else 1


def _cmd_oracle(args) -> int:
    sol = best_fixed(args.rewards, args.constraint, args.c0)
    print("distribution=" + ",".join(fmt(p) for p in sol.distribution.probs))
    print(f"value={fmt(sol.value)}")
    print(f"active={str(sol.active).lower()}")
    return 0


def _cmd_replay(args) -> int:
    trace = read_trace(args.trace)
    kind = LearnerKind.parse(args.learner)
    learner = make_learner(kind, trace.num_actions, trace.horizon, trace.model.threshold)
    records = play(learner, trace, learner_stream(trace.seed, args.label or kind.value))
    check_invariants(learner, records, learner.lam)
    res = evaluate(records, trace, learner.lam)
    for key in ("regret", "realized_regret", "violation", "variation", "max_lambda"):
        print(f"{key}={fmt(getattr(res, key))}")
    print(f"comparator={fmt(res.comparator.value)}")
    return 0


COMMANDS = {"run": _cmd_run, "accept": _cmd_accept, "oracle": _cmd_oracle, "replay": _cmd_replay}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"clewa: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"clewa: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except Infeasible as exc:
        print(f"clewa: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError) as exc:
        print(f"clewa: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
