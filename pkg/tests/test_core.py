import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clewa.core import (
    ActionDistribution,
    Bandit,
    DualVariable,
    FullInfo,
    LogWeightVector,
    RoundRecords,
    normalize,
    sample,
)

finite = st.floats(-50.0, 50.0, allow_nan=False)


@pytest.mark.parametrize("log_w, expected", [
    ((0.0, 0.0, 0.0), (1 / 3, 1 / 3, 1 / 3)),
    ((math.log(3.0), 0.0), (0.75, 0.25)),
    ((1000.0, 1000.0 + math.log(2.0)), (1 / 3, 2 / 3)),
])
def test_normalize_examples(log_w, expected):
    np.testing.assert_allclose(normalize(LogWeightVector(np.array(log_w))).probs, expected,
                               rtol=0, atol=1e-12)


@given(st.lists(finite, min_size=1, max_size=12), st.floats(-1e3, 1e3))
def test_normalize_shift_invariant(log_w, shift):
    a = normalize(np.array(log_w)).probs
    b = normalize(np.array(log_w) + shift).probs
    assert np.abs(a - b).max() <= 1e-12
    assert abs(a.sum() - 1.0) <= 1e-12


def test_normalize_huge_weights_do_not_overflow():
    p = normalize(np.array([1e6, 1e6 - 1.0])).probs
    assert np.all(np.isfinite(p)) and p[0] > p[1]


@pytest.mark.parametrize("probs, expected", [((1.0, 0.0, 0.0), 0), ((0.0, 1.0), 1)])
@pytest.mark.parametrize("seed", [0, 1, 12345])
def test_sample_degenerate(probs, expected, seed):
    rng = np.random.default_rng(seed)
    dist = ActionDistribution(np.array(probs))
    assert all(sample(dist, rng) == expected for _ in range(200))


def test_sample_fair_coin_frequency():
    rng = np.random.default_rng(20240601)
    dist = ActionDistribution(np.array([0.5, 0.5]))
    zeros = sum(sample(dist, rng) == 0 for _ in range(100_000))
    assert 0.49 <= zeros / 100_000 <= 0.51


@settings(max_examples=200)
@given(st.lists(st.sampled_from([0.0, 0.0, 1.0, 2.0, 1e-300]), min_size=2, max_size=8)
       .filter(lambda w: sum(w) > 0), st.integers(0, 2**32 - 1))
def test_sample_never_returns_zero_probability_index(weights, seed):
    w = np.array(weights)
    dist = ActionDistribution(w / w.sum())
    rng = np.random.default_rng(seed)
    for _ in range(20):
        assert dist.probs[sample(dist, rng)] > 0.0


def test_distribution_validation_and_immutability():
    with pytest.raises(ValueError):
        ActionDistribution(np.array([0.6, 0.6]))
    with pytest.raises(ValueError):
        ActionDistribution(np.array([1.5, -0.5]))
    d = ActionDistribution(np.array([0.25, 0.75]))
    with pytest.raises(ValueError):
        d.probs[0] = 1.0
    assert d.dot([4.0, 0.0]) == 1.0 and len(d) == 2


def test_value_types_reject_bad_input():
    with pytest.raises(ValueError):
        DualVariable(-1e-3)
    with pytest.raises(ValueError):
        LogWeightVector(np.array([0.0, np.inf]))
    with pytest.raises(ValueError):
        FullInfo(np.array([0.5, 1.2]), np.array([0.0, 0.0]))
    with pytest.raises(ValueError):
        Bandit(0, 0.5, 2.0)


def test_round_records_roundtrip():
    recs = RoundRecords(
        distributions=np.array([[0.5, 0.5], [1.0, 0.0]]),
        actions=np.array([1, 0]),
        lambdas=np.array([0.0, 0.3]),
        rewards=np.array([1.0, 0.0]),
        constraints=np.array([0.0, 1.0]),
    )
    rows = list(recs)
    assert [r.t for r in rows] == [1, 2]
    back = RoundRecords.from_list(rows)
    np.testing.assert_array_equal(back.distributions, recs.distributions)
    assert back.max_lambda == 0.3 and recs[-1].sampled_action == 0
