"""Built-in acceptance grid.

Each criterion is evaluated at its stated tolerance and reported as one
``CriterionResult``. The simulation grids are written to CSV under an output
directory, then run a second time (in a worker pool) and compared byte for
byte.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from clewa.algorithms import importance_estimate, make_learner
from clewa.core import Bandit
from clewa.environments import ConstraintModel, IIDBernoulli, generate, learner_stream
from clewa.harness.config import EnvironmentSpec, ExperimentConfig, LearnerSpec
from clewa.harness.runner import (
    RUN_COLUMNS,
    SUMMARY_COLUMNS,
    RunRow,
    SummaryRow,
    fit_and_report,
    play,
    run_cells,
    summarize,
    write_csv,
)
from clewa.oracle import best_fixed, best_fixed_grid, h_curve

ACCEPTANCE_SEED = 2013

# reward means decrease with the index; in the conflicting environments the
# constraint means increase, so the best arm for reward is the worst for c
FULL_K = 10
BANDIT_K = 5
C0 = 0.5


def _means(K: int) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.linspace(0.9, 0.1, K))


def _env(K: int, conflicting: bool, process: str = "iid_bernoulli") -> EnvironmentSpec:
    m = _means(K)
    c = tuple(reversed(m)) if conflicting else m
    if process == "low_variation":
        return EnvironmentSpec(process, (("base", m), ("amplitude", 0.0)), c, C0)
    return EnvironmentSpec(process, (("means", m),), c, C0)


def _horizons(lo: int, hi: int) -> Tuple[int, ...]:
    return tuple(2 ** k for k in range(lo, hi + 1))


def acceptance_grids(seed: int = ACCEPTANCE_SEED) -> Dict[str, ExperimentConfig]:
    lewa = (LearnerSpec.of("LEWA"),)
    bandit = (LearnerSpec.of("BanditLEWA"),)
    hp = (LearnerSpec.of("HP-LEWA", epsilon=0.1), LearnerSpec.of("HP-BanditLEWA", epsilon=0.1))
    full_h, bandit_h = _horizons(10, 17), _horizons(12, 18)
    return {
        "lewa-conflicting": ExperimentConfig(lewa, _env(FULL_K, True), full_h, 20, seed),
        "lewa-aligned": ExperimentConfig(lewa, _env(FULL_K, False), full_h, 20, seed),
        "bandit-conflicting": ExperimentConfig(bandit, _env(BANDIT_K, True), bandit_h, 20, seed),
        "bandit-aligned": ExperimentConfig(bandit, _env(BANDIT_K, False), bandit_h, 20, seed),
        "high-probability": ExperimentConfig(hp, _env(BANDIT_K, False), (2 ** 14,), 50, seed),
        "low-variation": ExperimentConfig(
            lewa, _env(FULL_K, True, "low_variation"), full_h, 20, seed
        ),
    }


@dataclass
class GridResult:
    config: ExperimentConfig
    rows: List[RunRow]
    summary: List[SummaryRow]

    def slope(self, learner: str, metric: str) -> float:
        for e in fit_and_report(self.summary):
            if e.learner == learner and e.metric == metric:
                return e.slope
        raise KeyError((learner, metric))

    def rows_for(self, learner: str) -> List[RunRow]:
        return [r for r in self.rows if r.learner == learner]


def run_grids(out_dir: Path, seed: int = ACCEPTANCE_SEED, jobs: int = 1) -> Dict[str, GridResult]:
    out = {}
    for name, cfg in acceptance_grids(seed).items():
        rows = run_cells(cfg, jobs)
        summary = summarize(rows, cfg.constraint_model().num_actions)
        write_csv(out_dir / name / "runs.csv", RUN_COLUMNS, rows)
        write_csv(out_dir / name / "summary.csv", SUMMARY_COLUMNS, summary)
        out[name] = GridResult(cfg, rows, summary)
    return out


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.name}: {self.detail}"


# ---------------------------------------------------------------------------
# individual criteria


def regret_bound(grids) -> CriterionResult:
    worst, where = -math.inf, ""
    for name in ("lewa-conflicting", "lewa-aligned"):
        for s in grids[name].summary:
            ratio = s.regret_mean / s.regret_bound
            if ratio > worst:
                worst, where = ratio, f"{name} T={s.T}"
    return CriterionResult(
        1, "LEWA mean regret <= 3 sqrt(T ln K)", worst <= 1.0,
        f"max mean/bound = {worst:.3f} at {where}",
    )


def violation_bound(grids) -> CriterionResult:
    g = grids["lewa-conflicting"]
    slope = g.slope("LEWA", "violation")
    last = max(g.summary, key=lambda s: s.T)
    cap = 5.0 * last.T ** 0.75
    ok = slope <= 0.85 and last.violation_mean <= cap
    return CriterionResult(
        2, "LEWA violation growth", ok,
        f"slope {slope:.4f} (<= 0.85); mean at T={last.T} is {last.violation_mean:.1f} "
        f"(<= {cap:.1f})",
    )


def _distributions(kind: str, trace, seed: int) -> np.ndarray:
    learner = make_learner(kind, trace.num_actions, trace.horizon, trace.model.threshold)
    return play(learner, trace, learner_stream(seed, "reduction")).distributions


def reductions(seed: int, T: int = 10_000) -> CriterionResult:
    model = ConstraintModel(tuple(reversed(_means(BANDIT_K))), 0.0)
    trace = generate(IIDBernoulli(_means(BANDIT_K)), model, T, seed)
    full = float(np.abs(_distributions("LEWA", trace, seed) - _distributions("EWA", trace, seed)).max())
    band = float(np.abs(
        _distributions("BanditLEWA", trace, seed) - _distributions("Exp3", trace, seed)
    ).max())
    return CriterionResult(
        3, "c0 = 0 reduces to EWA / Exp3", full <= 1e-12 and band <= 1e-12,
        f"max |LEWA - EWA| = {full:.3g}, max |BanditLEWA - Exp3| = {band:.3g} over T={T}",
    )


def dual_cap(grids) -> CriterionResult:
    worst, count, bad = 0.0, 0, 0
    kinds = set()
    for g in grids.values():
        by_label = {s.label: s.kind for s in g.config.learners}
        for r in g.rows:
            if not by_label[r.learner].is_constrained:
                continue
            kinds.add(by_label[r.learner])
            count += 1
            bad += not r.max_lambda <= r.dual_cap
            worst = max(worst, r.max_lambda / r.dual_cap)
    covered = len(kinds) == 4
    return CriterionResult(
        4, "dual variable never exceeds c0/delta", bad == 0 and covered,
        f"{count} runs over {len(kinds)} constrained kinds, max lambda/cap = {worst:.3g}",
    )


def oracle_equivalence(seed: int, instances: int = 1000, step: float = 0.001) -> CriterionResult:
    rng = np.random.default_rng(seed)
    gaps_ok = concave_ok = True
    worst_gap = 0.0
    worst_shape = 0.0
    for _ in range(instances):
        K = int(rng.integers(2, 4))
        R = rng.random(K) * rng.uniform(1.0, 100.0)
        c = rng.random(K)
        c0 = float(rng.uniform(0.0, c.max()))
        exact = best_fixed(R, c, c0).value
        grid = best_fixed_grid(R, c, c0, step).value
        gap = exact - grid
        worst_gap = max(worst_gap, gap / np.abs(R).max())
        # exact must dominate the grid; the slack absorbs rounding in p.R only
        if gap < -1e-9 or gap > step * np.abs(R).max():
            gaps_ok = False
        g = np.sort(rng.uniform(0.0, c0 + 0.1, 6))
        mids = (g[:-1] + g[1:]) / 2.0
        h = h_curve(R, c, c0, list(g) + list(mids))
        hg, hm = np.array(h[: len(g)]), np.array(h[len(g):])
        mono = float(np.min(np.diff(hg)))
        conc = float(np.min(hm - (hg[:-1] + hg[1:]) / 2.0))
        worst_shape = min(worst_shape, mono, conc)
        if mono < -1e-9 or conc < -1e-9:
            concave_ok = False
    return CriterionResult(
        5, "exact oracle vs grid search, h monotone and concave", gaps_ok and concave_ok,
        f"{instances} instances, max gap/||R|| = {worst_gap:.3g} (<= {step}), "
        f"min h slack = {worst_shape:.3g}",
    )


def _kernel_estimates(probs_q, gamma, action, r, c, K):
    """Read r-hat and c-hat back out of single kernel updates.

    r-hat comes from the BanditLEWA weight change at lambda = 0; c-hat from the
    running sum the high-probability variant keeps, which uses the same estimator.
    """
    def fresh(kind):
        learner = make_learner(kind, K, 10_000, 0.5, {"gamma": gamma, "delta": 0.5})
        learner.log_w = np.log(probs_q)
        learner.update_bandit(Bandit(action, r, c))
        return learner

    before = np.log(probs_q)
    plain = fresh("BanditLEWA")
    r_hat = (plain.log_w - before) / plain.params.eta
    c_hat = fresh("HP-BanditLEWA").estimated_constraint_sums.copy()
    return r_hat, c_hat


def unbiasedness(seed: int, triples: int = 100) -> CriterionResult:
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    for _ in range(triples):
        K = int(rng.integers(2, 9))
        gamma = float(rng.uniform(0.01, 0.2))
        q = rng.dirichlet(np.ones(K))
        p = (1.0 - gamma) * q + gamma / K
        r, c = rng.random(K), rng.random(K)
        helper_r = sum(p[i] * importance_estimate(p, i, r[i]) for i in range(K))
        helper_c = sum(p[i] * importance_estimate(p, i, c[i]) for i in range(K))
        kern_r = np.zeros(K)
        kern_c = np.zeros(K)
        for i in range(K):
            rh, ch = _kernel_estimates(q, gamma, i, r[i], c[i], K)
            kern_r += p[i] * rh
            kern_c += p[i] * ch
        worst = max(worst, *(float(np.abs(x - y).max()) for x, y in (
            (helper_r, r), (helper_c, c), (kern_c, c),
        )))
        # the r-hat read back through eta carries one extra rounding per entry
        worst = max(worst, float(np.abs(kern_r - r).max()))
    return CriterionResult(
        6, "importance estimates are unbiased", worst <= 1e-12,
        f"{triples} triples, max |E[estimate] - truth| = {worst:.3g}",
    )


def exploration_floor(grids) -> CriterionResult:
    worst = math.inf
    count = 0
    for g in grids.values():
        by_label = {s.label: s.kind for s in g.config.learners}
        for r in g.rows:
            if by_label[r.learner].is_bandit:
                count += 1
                worst = min(worst, r.min_prob - r.floor)
    return CriterionResult(
        7, "bandit distributions keep gamma/K mass", count > 0 and worst >= -1e-12,
        f"{count} bandit runs, min(p - gamma/K) = {worst:.3g}",
    )


def bandit_bounds(grids) -> CriterionResult:
    parts, ok = [], True
    for name in ("bandit-conflicting", "bandit-aligned"):
        g = grids[name]
        rr = g.slope("BanditLEWA", "realized_regret")
        vi = g.slope("BanditLEWA", "violation")
        ok &= rr <= 0.9 and vi <= 0.9
        parts.append(f"{name}: realized regret {rr:.4f}, violation {vi:.4f}")
    return CriterionResult(8, "BanditLEWA slopes <= 0.9", ok, "; ".join(parts))


def concentration(grids) -> CriterionResult:
    g = grids["high-probability"]
    parts, ok = [], True
    for spec in g.config.learners:
        reg = np.array([r.regret for r in g.rows_for(spec.label)])
        mean = float(reg.mean())
        frac = float((reg > 3.0 * mean).mean())
        # with a non-positive mean the 3x test is meaningless, so count it as failed
        ok &= mean > 0.0 and frac <= 0.1
        parts.append(f"{spec.label}: mean {mean:.1f}, fraction above 3x mean {frac:.2f}")
    return CriterionResult(9, "high-probability variants concentrate", ok, "; ".join(parts))


def variation_slope(grids) -> CriterionResult:
    low = grids["low-variation"].slope("LEWA", "violation")
    generic = grids["lewa-conflicting"].slope("LEWA", "violation")
    return CriterionResult(
        10, "zero-variation rewards shrink violation growth", low <= 0.6 and low < generic,
        f"slope {low:.4f} (<= 0.6, generic {generic:.4f})",
    )


def determinism(first: Path, second: Path) -> CriterionResult:
    a = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    b = sorted(p.relative_to(second) for p in second.rglob("*.csv"))
    same = a == b and bool(a)
    differing = [str(p) for p in a if p in b and not filecmp.cmp(first / p, second / p, shallow=False)]
    return CriterionResult(
        11, "rerun reproduces byte-identical CSV", same and not differing,
        f"{len(a)} files compared" + (f", differing: {differing}" if differing else ""),
    )


# ---------------------------------------------------------------------------


def run_acceptance(out_dir: Optional[Path] = None, seed: int = ACCEPTANCE_SEED,
                   jobs: int = 1, echo: Optional[Callable[[str], None]] = None
                   ) -> List[CriterionResult]:
    """Run every criterion; the rerun for determinism uses a worker pool."""
    echo = echo or (lambda s: None)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(out_dir) if out_dir is not None else Path(tmp)
        first, second = root / "first", root / "second"
        grids = run_grids(first, seed, jobs)
        results: List[CriterionResult] = []

        def emit(res: CriterionResult):
            results.append(res)
            echo(res.line())

        emit(regret_bound(grids))
        emit(violation_bound(grids))
        emit(reductions(seed))
        emit(dual_cap(grids))
        emit(oracle_equivalence(seed))
        emit(unbiasedness(seed))
        emit(exploration_floor(grids))
        emit(bandit_bounds(grids))
        emit(concentration(grids))
        emit(variation_slope(grids))
        run_grids(second, seed, max(2, jobs))
        emit(determinism(first, second))
    return results


def all_passed(results: Sequence[CriterionResult]) -> bool:
    return all(r.passed for r in results)
