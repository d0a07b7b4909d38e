"""Value types shared by learners, environments and metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

import numpy as np

from clewa import _kernels

SIMPLEX_TOL = 1e-9


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    return arr


def _check_unit_interval(arr: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"{name} entries must lie in [0, 1]")


@dataclass(frozen=True)
class ActionDistribution:
    """Probability vector over K actions."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _as_vector(self.probs, "probs")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def num_actions(self) -> int:
        return self.probs.shape[0]

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __getitem__(self, i):
        return self.probs[i]

    def dot(self, v) -> float:
        return float(self.probs @ np.asarray(v, dtype=np.float64))


@dataclass(frozen=True)
class LogWeightVector:
    """Natural-log weights; the induced distribution is ``normalize(self)``."""

    log_w: np.ndarray

    def __post_init__(self):
        log_w = _as_vector(self.log_w, "log_w")
        if not np.all(np.isfinite(log_w)):
            raise ValueError("log-weights must be finite")
        log_w.setflags(write=False)
        object.__setattr__(self, "log_w", log_w)

    def shifted(self) -> "LogWeightVector":
        return LogWeightVector(self.log_w - self.log_w.max())


@dataclass(frozen=True)
class DualVariable:
    value: float = 0.0

    def __post_init__(self):
        if not (self.value >= 0.0):
            raise ValueError("dual variable must be non-negative")

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class LearnerParams:
    """Step sizes and problem dimensions for one learner.

    ``eta`` is the learning rate, ``delta`` the dual regularizer, ``gamma`` the
    uniform-exploration mixing rate (bandit kinds) and ``epsilon`` the
    confidence level of the high-probability kinds. ``alpha``/``alpha1``/``beta``
    are the derived confidence constants of HP-BanditLEWA. ``dual_regularizer``
    selects which constant multiplies the dual decay for BanditLEWA
    ("delta" or "gamma"). ``explore`` is the exploration fraction of the
    explore-then-exploit baseline.
    """

    eta: float
    horizon: int
    num_actions: int
    c0: float
    delta: float = 0.0
    gamma: float = 0.0
    epsilon: float = 0.1
    alpha: float = 0.0
    alpha1: float = 0.0
    beta: float = 1.0
    dual_regularizer: str = "delta"
    explore: float = 0.0

    def __post_init__(self):
        if self.num_actions < 1:
            raise ValueError("num_actions must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.c0 <= 1.0:
            raise ValueError("c0 must lie in [0, 1]")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")
        if self.delta < 0.0:
            raise ValueError("delta must be non-negative")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.dual_regularizer not in ("delta", "gamma"):
            raise ValueError("dual_regularizer must be 'delta' or 'gamma'")

    @property
    def dual_decay(self) -> float:
        return self.gamma if self.dual_regularizer == "gamma" else self.delta


@dataclass(frozen=True)
class FullInfo:
    reward: np.ndarray
    constraint: np.ndarray

    def __post_init__(self):
        reward = _as_vector(self.reward, "reward")
        constraint = _as_vector(self.constraint, "constraint")
        if reward.shape != constraint.shape:
            raise ValueError("reward and constraint vectors differ in length")
        _check_unit_interval(reward, "reward")
        _check_unit_interval(constraint, "constraint")
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "constraint", constraint)


@dataclass(frozen=True)
class Bandit:
    action: int
    reward: float
    constraint: float

    def __post_init__(self):
        if self.action < 0:
            raise ValueError("action index must be non-negative")
        for name in ("reward", "constraint"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


RoundFeedback = Union[FullInfo, Bandit]


@dataclass(frozen=True)
class RoundRecord:
    t: int
    distribution: ActionDistribution
    sampled_action: Optional[int]
    lambda_before: float
    realized_reward: float
    realized_constraint: float


@dataclass
class RoundRecords:
    """Column store of per-round decisions; indexing yields ``RoundRecord``.

    ``distributions`` has shape (T, K); the remaining arrays have length T.
    Rounds are numbered from 1.
    """

    distributions: np.ndarray
    actions: np.ndarray
    lambdas: np.ndarray
    rewards: np.ndarray
    constraints: np.ndarray

    def __len__(self) -> int:
        return self.distributions.shape[0]

    def __getitem__(self, s: int) -> RoundRecord:
        if s < 0:
            s += len(self)
        return RoundRecord(
            t=s + 1,
            distribution=ActionDistribution(self.distributions[s]),
            sampled_action=int(self.actions[s]),
            lambda_before=float(self.lambdas[s]),
            realized_reward=float(self.rewards[s]),
            realized_constraint=float(self.constraints[s]),
        )

    def __iter__(self) -> Iterator[RoundRecord]:
        for s in range(len(self)):
            yield self[s]

    @property
    def max_lambda(self) -> float:
        return float(self.lambdas.max()) if len(self) else 0.0

    @classmethod
    def from_list(cls, records) -> "RoundRecords":
        records = list(records)
        if not records:
            return cls.empty(0)
        return cls(
            distributions=np.array([r.distribution.probs for r in records]),
            actions=np.array(
                [-1 if r.sampled_action is None else r.sampled_action for r in records],
                dtype=np.int64,
            ),
            lambdas=np.array([r.lambda_before for r in records]),
            rewards=np.array([r.realized_reward for r in records]),
            constraints=np.array([r.realized_constraint for r in records]),
        )

    @classmethod
    def empty(cls, num_actions: int) -> "RoundRecords":
        return cls(
            distributions=np.zeros((0, num_actions)),
            actions=np.zeros(0, dtype=np.int64),
            lambdas=np.zeros(0),
            rewards=np.zeros(0),
            constraints=np.zeros(0),
        )


def normalize(log_w) -> ActionDistribution:
    """Softmax of the log-weights, shifted by the max entry so it never overflows."""
    if isinstance(log_w, LogWeightVector):
        log_w = log_w.log_w
    log_w = _as_vector(log_w, "log_w")
    if not np.all(np.isfinite(log_w)):
        raise ValueError("log-weights must be finite")
    out = np.empty_like(log_w)
    _kernels.normalize_into(log_w, out)
    return ActionDistribution(out)


def sample(dist: ActionDistribution, rng: np.random.Generator) -> int:
    """Draw an action index by inverse CDF using one uniform from ``rng``."""
    probs = dist.probs if isinstance(dist, ActionDistribution) else np.asarray(dist, float)
    return int(_kernels.sample_index(np.ascontiguousarray(probs), rng.random()))
