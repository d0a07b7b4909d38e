"""Seeded, replicated experiment driver."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from clewa import _kernels
from clewa.algorithms import (
    _KERNEL_CODE,
    Learner,
    LearnerKind,
    make_learner,
)
from clewa.core import Bandit, FullInfo, RoundRecords
from clewa.environments import EnvironmentTrace, generate, learner_stream
from clewa.harness.config import ExperimentConfig, LearnerSpec
from clewa.metrics import RunResult, evaluate, fit_exponent
from clewa.oracle import Infeasible

RUN_COLUMNS = (
    "learner", "T", "replicate", "seed", "regret", "realized_regret", "violation",
    "variation", "max_lambda", "wall_ms",
)
SUMMARY_COLUMNS = (
    "learner", "T", "replicates", "regret_mean", "regret_std", "realized_regret_mean",
    "realized_regret_std", "violation_mean", "violation_std", "regret_bound",
    "bound_fraction",
)
FLOOR_TOL = 1e-12


class InvariantViolation(AssertionError):
    """A learner broke one of its structural guarantees during a run."""


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def trace_seed(master_seed: int, T: int, replicate: int) -> int:
    """Environment seed for one (T, replicate) cell; learners share it."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(T), int(replicate)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def play(learner: Learner, trace: EnvironmentTrace, rng: np.random.Generator,
         fast: bool = True) -> RoundRecords:
    """Run decide/sample/update over the whole trace, mutating ``learner``.

    One uniform per round is drawn from ``rng``. ``fast=False`` drives the
    public ``Learner`` API round by round; both paths share the same kernels
    and produce identical records.
    """
    T = trace.horizon
    R, C = trace.rewards, trace.constraints
    uniforms = rng.random(T)
    kind = learner.kind
    if fast and kind in _KERNEL_CODE:
        prm = learner.params
        if kind.is_bandit:
            dists, actions, lambdas, lam = _kernels.run_bandit(
                _KERNEL_CODE[kind], learner.log_w, learner.lam,
                learner.estimated_constraint_sums, learner.inverse_prob_sums, learner.t,
                R, C, uniforms, prm.eta, prm.gamma, prm.dual_decay, prm.c0, prm.alpha,
                prm.alpha1, math.sqrt(prm.num_actions * prm.horizon),
            )
        else:
            dists, actions, lambdas, lam = _kernels.run_full(
                _KERNEL_CODE[kind], learner.log_w, learner.lam, learner.constraint_sums,
                learner.t, R, C, uniforms, prm.eta, prm.delta, prm.c0,
                learner.confidence_width,
            )
        learner.lam = lam
        learner.t += T
    else:
        dists = np.empty((T, trace.num_actions))
        actions = np.empty(T, dtype=np.int64)
        lambdas = np.empty(T)
        for s in range(T):
            p = learner.decide().probs
            a = _kernels.sample_index(p, uniforms[s])
            dists[s], actions[s], lambdas[s] = p, a, learner.lam
            if kind.is_bandit:
                learner.update_bandit(Bandit(a, float(R[s, a]), float(C[s, a])))
            else:
                learner.update_full(FullInfo(R[s], C[s]))
    rows = np.arange(T)
    return RoundRecords(dists, actions, lambdas, R[rows, actions].copy(), C[rows, actions].copy())


def check_invariants(learner: Learner, records: RoundRecords, final_lambda: float) -> None:
    d = records.distributions
    if np.any(d < 0.0) or np.any(np.abs(d.sum(axis=1) - 1.0) > 1e-9):
        raise InvariantViolation(f"{learner.kind.value}: distribution left the simplex")
    lam_max = max(records.max_lambda, final_lambda)
    if np.any(records.lambdas < 0.0) or final_lambda < 0.0:
        raise InvariantViolation(f"{learner.kind.value}: negative dual variable")
    if learner.kind.is_constrained and not lam_max <= learner.dual_cap:
        raise InvariantViolation(
            f"{learner.kind.value}: dual variable {lam_max!r} exceeds cap {learner.dual_cap!r}"
        )
    if learner.kind.is_bandit:
        floor = learner.params.gamma / learner.num_actions
        if d.min() < floor - FLOOR_TOL:
            raise InvariantViolation(
                f"{learner.kind.value}: probability {d.min()!r} below floor {floor!r}"
            )


@dataclass
class RunRow:
    learner: str
    T: int
    replicate: int
    seed: int
    regret: float
    realized_regret: float
    violation: float
    variation: float
    max_lambda: float
    wall_ms: float
    # not written to runs.csv
    dual_cap: float = math.inf
    min_prob: float = 1.0
    floor: float = 0.0

    def csv_values(self):
        return [fmt(getattr(self, c)) for c in RUN_COLUMNS]


def run_single(spec: LearnerSpec, config: ExperimentConfig, T: int, replicate: int,
               keep: bool = False):
    """One (learner, T, replicate) cell. Returns the ``RunRow`` (and ``RunResult`` if ``keep``)."""
    model = config.constraint_model()
    seed = trace_seed(config.master_seed, T, replicate)
    trace = generate(config.reward_process(), model, T, seed)
    learner = make_learner(spec.kind, model.num_actions, T, model.threshold, spec.override_map)
    rng = learner_stream(seed, spec.label)
    start = time.perf_counter()
    records = play(learner, trace, rng)
    wall = (time.perf_counter() - start) * 1e3 if config.record_wall_time else 0.0
    check_invariants(learner, records, learner.lam)
    result = evaluate(records, trace, learner.lam)
    row = RunRow(
        learner=spec.label, T=T, replicate=replicate, seed=seed, regret=result.regret,
        realized_regret=result.realized_regret, violation=result.violation,
        variation=result.variation, max_lambda=result.max_lambda, wall_ms=wall,
        dual_cap=learner.dual_cap, min_prob=float(records.distributions.min()),
        floor=learner.params.gamma / learner.num_actions if learner.is_bandit else 0.0,
    )
    return (row, result) if keep else row


def _run_cell(args):
    spec, config, T, rep = args
    return run_single(spec, config, T, rep)


@dataclass
class SummaryRow:
    learner: str
    T: int
    replicates: int
    regret_mean: float
    regret_std: float
    realized_regret_mean: float
    realized_regret_std: float
    violation_mean: float
    violation_std: float
    regret_bound: float
    bound_fraction: float

    def csv_values(self):
        return [fmt(getattr(self, c)) for c in SUMMARY_COLUMNS]


def _std(x: np.ndarray) -> float:
    return float(x.std(ddof=1)) if x.size > 1 else 0.0


def summarize(rows: Sequence[RunRow], num_actions: int) -> List[SummaryRow]:
    groups: Dict[tuple, List[RunRow]] = {}
    for r in rows:
        groups.setdefault((r.learner, r.T), []).append(r)
    out = []
    for (label, T), rs in groups.items():
        reg = np.array([r.regret for r in rs])
        rreg = np.array([r.realized_regret for r in rs])
        vio = np.array([r.violation for r in rs])
        bound = 3.0 * math.sqrt(T * math.log(num_actions))
        out.append(SummaryRow(
            learner=label, T=T, replicates=len(rs),
            regret_mean=float(reg.mean()), regret_std=_std(reg),
            realized_regret_mean=float(rreg.mean()), realized_regret_std=_std(rreg),
            violation_mean=float(vio.mean()), violation_std=_std(vio),
            regret_bound=bound, bound_fraction=float((reg <= bound).mean()),
        ))
    return out


def run_cells(config: ExperimentConfig, jobs: int = 1) -> List[RunRow]:
    """Run every (learner, T, replicate) cell; rows come back in config order."""
    cells = [
        (spec, config, T, rep)
        for spec in config.learners
        for T in config.horizons
        for rep in range(config.replicates)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell, cells, chunksize=max(1, len(cells) // (4 * jobs))))
    else:
        rows = [_run_cell(c) for c in cells]
    order = {spec.label: i for i, spec in enumerate(config.learners)}
    rows.sort(key=lambda r: (order[r.learner], r.T, r.replicate))
    return rows


def write_csv(path: Path, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r.csv_values())
    return path


def run_experiment(config: ExperimentConfig, jobs: int = 1,
                   output_dir: Optional[Path] = None) -> List[SummaryRow]:
    """Run the grid, write runs.csv and summary.csv, return the summary rows.

    Raises ``InvariantViolation`` if any run breaks a learner invariant.
    """
    if not config.constraint_model().feasible:
        raise Infeasible("constraint model is infeasible: max mean below c0")
    rows = run_cells(config, jobs)
    summary = summarize(rows, config.constraint_model().num_actions)
    out = Path(output_dir or config.output_dir)
    write_csv(out / "runs.csv", RUN_COLUMNS, rows)
    write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    return summary


@dataclass
class ExponentRow:
    learner: str
    metric: str
    slope: float
    threshold: Optional[float]

    @property
    def passed(self) -> Optional[bool]:
        return None if self.threshold is None else self.slope <= self.threshold

    def line(self) -> str:
        status = "----" if self.passed is None else ("PASS" if self.passed else "FAIL")
        limit = "" if self.threshold is None else f" (<= {self.threshold:g})"
        return f"{status} {self.learner:<16} {self.metric:<16} slope={self.slope:.4f}{limit}"


FITTED_METRICS = ("regret", "realized_regret", "violation")


def fit_and_report(summary: Sequence[SummaryRow],
                   thresholds: Optional[Dict[str, float]] = None) -> List[ExponentRow]:
    """Fit log-log slopes of mean regret / realized regret / violation per learner."""
    thresholds = thresholds or {}
    by_learner: Dict[str, List[SummaryRow]] = {}
    for s in summary:
        by_learner.setdefault(s.learner, []).append(s)
    out = []
    for label, rows in by_learner.items():
        if len({r.T for r in rows}) < 3:
            raise ValueError(f"{label}: need at least three horizons to fit an exponent")
        rows = sorted(rows, key=lambda r: r.T)
        for metric in FITTED_METRICS:
            slope = fit_exponent([(r.T, getattr(r, metric + "_mean")) for r in rows])
            out.append(ExponentRow(label, metric, slope, thresholds.get(metric)))
    return out
