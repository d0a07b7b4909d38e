import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clewa.algorithms import make_learner
from clewa.core import RoundRecords
from clewa.environments import (
    ConstraintModel,
    EnvironmentTrace,
    IIDBernoulli,
    generate,
    learner_stream,
)
from clewa.harness.runner import play
from clewa.metrics import (
    comparator,
    evaluate,
    fit_exponent,
    realized_regret,
    regret,
    variation,
    violation,
)


def _records(dists, actions=None, rewards=None):
    dists = np.asarray(dists, dtype=float)
    T = dists.shape[0]
    return RoundRecords(
        distributions=dists,
        actions=np.zeros(T, dtype=np.int64) if actions is None else np.asarray(actions),
        lambdas=np.zeros(T),
        rewards=np.zeros(T) if rewards is None else np.asarray(rewards, dtype=float),
        constraints=np.zeros(T),
    )


def _trace(R, C=None, mean=(1.0, 1.0), c0=0.0):
    R = np.asarray(R, dtype=float)
    C = np.zeros_like(R) if C is None else np.asarray(C, dtype=float)
    return EnvironmentTrace(R, C, ConstraintModel(mean, c0), 0)


def test_single_round_regret():
    assert regret(_records([[1.0, 0.0]]), _trace([[0.0, 1.0]])) == 1.0


def test_playing_the_comparator_has_zero_regret():
    tr = generate(IIDBernoulli((0.9, 0.4, 0.6)), ConstraintModel((0.1, 0.9, 0.5), 0.5), 300, 8)
    p = comparator(tr).distribution.probs
    assert regret(_records(np.tile(p, (300, 1))), tr) == pytest.approx(0.0, abs=1e-9)


def test_realized_equals_expected_for_a_deterministic_player():
    R = np.tile([0.3, 0.8], (50, 1))
    tr = _trace(R, mean=(0.2, 0.9), c0=0.5)
    rec = _records(np.tile([0.0, 1.0], (50, 1)), actions=np.ones(50, dtype=np.int64),
                   rewards=np.full(50, 0.8))
    assert realized_regret(rec, tr) == pytest.approx(regret(rec, tr), abs=1e-12)


def test_empty_horizon():
    tr = _trace(np.zeros((0, 2)))
    assert realized_regret(RoundRecords.empty(2), tr) == 0.0
    assert violation(RoundRecords.empty(2), tr.model) == 0.0


def test_violation_examples():
    model = ConstraintModel((0.0, 1.0), 0.5)
    assert violation(_records(np.tile([1.0, 0.0], (100, 1))), model) == 50.0
    assert violation(_records(np.tile([0.2, 0.8], (100, 1))), model) == 0.0


def test_variation_examples():
    assert variation(np.tile([0.4, 0.7], (10, 1))) == 0.0
    assert variation(np.array([[0.0, 0.0], [1.0, 1.0]])) == 1.0


@settings(max_examples=100)
@given(st.integers(1, 30).flatmap(lambda T: st.lists(
    st.lists(st.floats(0.0, 1.0), min_size=3, max_size=3), min_size=T, max_size=T)),
    st.randoms(use_true_random=False))
def test_variation_ignores_round_order(rows, rnd):
    R = np.array(rows)
    perm = list(range(len(rows)))
    rnd.shuffle(perm)
    assert variation(R[perm]) == pytest.approx(variation(R), abs=1e-12)


@pytest.mark.parametrize("f, slope", [
    (lambda T: T, 1.0), (lambda T: math.sqrt(T), 0.5), (lambda T: 7 * T ** 0.75, 0.75),
])
def test_fit_exponent_exact_lines(f, slope):
    pts = [(2 ** k, f(2 ** k)) for k in range(10, 18)]
    assert fit_exponent(pts) == pytest.approx(slope, abs=1e-9)


def test_fit_exponent_clips_and_validates():
    assert fit_exponent([(16, 0.0), (32, 0.0), (64, 0.0)]) == 0.0
    with pytest.raises(ValueError):
        fit_exponent([(16, 1.0), (32, 2.0)])
    with pytest.raises(ValueError):
        fit_exponent([(16, 1.0), (16, 2.0), (32, 3.0)])


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["LEWA", "BanditLEWA", "HP-LEWA"]), st.integers(0, 2**32 - 1))
def test_accounting_identity_and_signs(kind, seed):
    tr = generate(IIDBernoulli((0.8, 0.5, 0.2)), ConstraintModel((0.2, 0.5, 0.8), 0.5), 200, seed)
    lr = make_learner(kind, 3, 200, 0.5)
    rec = play(lr, tr, learner_stream(seed, kind))
    res = evaluate(rec, tr, lr.lam)
    earned = float(np.einsum("tk,tk->", rec.distributions, tr.rewards))
    assert res.regret + earned == pytest.approx(res.comparator.value, abs=1e-9)
    assert res.violation >= 0.0 and res.variation >= 0.0
    assert res.realized_regret == res.comparator.value - rec.rewards.sum()


def test_realized_regret_concentrates_around_expected():
    # realized minus expected regret is a bounded martingale, so it stays
    # within 3 sqrt(T ln(1/q)) except with probability about q
    T, q, misses = 4000, 0.05, 0
    for seed in range(40):
        tr = generate(IIDBernoulli((0.7, 0.5, 0.3)), ConstraintModel((0.3, 0.5, 0.7), 0.5), T, seed)
        lr = make_learner("BanditLEWA", 3, T, 0.5)
        res = evaluate(play(lr, tr, learner_stream(seed, "b")), tr)
        misses += abs(res.realized_regret - res.regret) > 3 * math.sqrt(T * math.log(1 / q))
    assert misses <= 2


def test_evaluate_rejects_length_mismatch():
    tr = _trace(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        evaluate(_records(np.tile([0.5, 0.5], (2, 1))), tr)
