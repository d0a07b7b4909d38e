"""Post-hoc performance measures over complete run records."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np

from clewa.core import RoundRecords
from clewa.environments import ConstraintModel, EnvironmentTrace
from clewa.oracle import ComparatorSolution, best_fixed


def _records(records) -> RoundRecords:
    return records if isinstance(records, RoundRecords) else RoundRecords.from_list(records)


def comparator(trace: EnvironmentTrace) -> ComparatorSolution:
    """Best fixed feasible distribution for the trace's cumulative rewards and true mean c."""
    return best_fixed(trace.rewards.sum(axis=0), trace.model.vector(), trace.model.threshold)


def regret(records, trace: EnvironmentTrace) -> float:
    """Comparator value minus the learner's expected cumulative reward sum_t p_t.r_t."""
    rec = _records(records)
    R = trace.rewards[: len(rec)]
    earned = float(np.einsum("tk,tk->", rec.distributions, R)) if len(rec) else 0.0
    return comparator(trace).value - earned


def realized_regret(records, trace: EnvironmentTrace) -> float:
    """Comparator value minus the rewards of the actions actually sampled."""
    rec = _records(records)
    if len(rec) and np.any(rec.actions < 0):
        raise ValueError("records carry no sampled actions")
    return comparator(trace).value - float(rec.rewards.sum())


def violation(records, model: ConstraintModel) -> float:
    """[sum_t (c0 - p_t.c)]_+ against the true constraint mean."""
    rec = _records(records)
    if not len(rec):
        return 0.0
    shortfall = len(rec) * model.threshold - float((rec.distributions @ model.vector()).sum())
    return max(0.0, shortfall)


def variation(trace) -> float:
    """sum_t ||r_t - mean_t r_t||_inf."""
    R = trace.rewards if isinstance(trace, EnvironmentTrace) else np.asarray(trace, dtype=np.float64)
    if R.shape[0] < 1:
        raise ValueError("variation needs at least one round")
    # centring on the first round first makes constant columns exactly zero
    D = R - R[0]
    return float(np.abs(D - D.mean(axis=0)).max(axis=1).sum())


def fit_exponent(points: Iterable[Tuple[float, float]]) -> float:
    """Least-squares slope of log(metric) against log(T); metrics are clipped below at 1."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least three (T, metric) points")
    T = np.array([p[0] for p in pts], dtype=np.float64)
    if len(set(T.tolist())) != len(T) or np.any(T < 2):
        raise ValueError("horizons must be distinct and at least 2")
    y = np.log(np.maximum(np.array([p[1] for p in pts], dtype=np.float64), 1.0))
    x = np.log(T)
    xc = x - x.mean()
    return float((xc * (y - y.mean())).sum() / (xc * xc).sum())


@dataclass
class RunResult:
    records: RoundRecords
    trace: EnvironmentTrace
    comparator: ComparatorSolution
    regret: float
    realized_regret: float
    violation: float
    variation: float
    max_lambda: float


def evaluate(records, trace: EnvironmentTrace, final_lambda: float = 0.0) -> RunResult:
    rec = _records(records)
    if len(rec) != trace.horizon:
        raise ValueError("records and trace lengths differ")
    return RunResult(
        records=rec,
        trace=trace,
        comparator=comparator(trace),
        regret=regret(rec, trace),
        realized_regret=realized_regret(rec, trace),
        violation=violation(rec, trace.model),
        variation=variation(trace),
        max_lambda=max(rec.max_lambda, float(final_lambda)),
    )
