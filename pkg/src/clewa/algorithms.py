"""Online learners for constrained regret minimization.

All learners share one interface: ``decide()`` returns the distribution for the
current round and ``update_full``/``update_bandit`` consume that round's
feedback. Weights are kept in the log domain.
"""

from __future__ import annotations

import enum
import math
from typing import Mapping, Optional

import numpy as np

from clewa import _kernels
from clewa.core import (
    ActionDistribution,
    Bandit,
    DualVariable,
    FullInfo,
    LearnerParams,
    LogWeightVector,
)
from clewa.oracle import Infeasible, best_fixed


class LearnerKind(str, enum.Enum):
    EWA = "EWA"
    LEWA = "LEWA"
    HP_LEWA = "HP-LEWA"
    EXP3 = "Exp3"
    BANDIT_LEWA = "BanditLEWA"
    HP_BANDIT_LEWA = "HP-BanditLEWA"
    EXPLORE_EXPLOIT = "ExploreExploit"

    @classmethod
    def parse(cls, name) -> "LearnerKind":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown learner kind {name!r}")

    @property
    def is_bandit(self) -> bool:
        return self in BANDIT_KINDS

    @property
    def is_constrained(self) -> bool:
        return self in CONSTRAINED_KINDS


BANDIT_KINDS = frozenset({LearnerKind.EXP3, LearnerKind.BANDIT_LEWA, LearnerKind.HP_BANDIT_LEWA})
CONSTRAINED_KINDS = frozenset(
    {LearnerKind.LEWA, LearnerKind.HP_LEWA, LearnerKind.BANDIT_LEWA, LearnerKind.HP_BANDIT_LEWA}
)

_KERNEL_CODE = {
    LearnerKind.EWA: _kernels.EWA,
    LearnerKind.LEWA: _kernels.LEWA,
    LearnerKind.HP_LEWA: _kernels.HP_LEWA,
    LearnerKind.EXP3: _kernels.EXP3,
    LearnerKind.BANDIT_LEWA: _kernels.BANDIT_LEWA,
    LearnerKind.HP_BANDIT_LEWA: _kernels.HP_BANDIT_LEWA,
}

OVERRIDE_KEYS = frozenset(
    {"eta", "delta", "gamma", "epsilon", "alpha", "alpha1", "beta", "dual_regularizer", "explore"}
)


# ---------------------------------------------------------------------------
# parameter schedules


def full_info_eta(K: int, T: int) -> float:
    return math.sqrt(4.0 * math.log(K) / (9.0 * T))


def bandit_eta(gamma: float, delta: float, K: int, beta: float = 1.0) -> float:
    return (gamma / (beta * K)) * delta / (delta + 1.0)


def bandit_rate(T: int) -> float:
    """Default exploration rate and dual regularizer for the bandit learners: T^(-1/4).

    With gamma = delta = T^(-1/2) the primal step is of order 1/(K T) and the
    constraint barely reacts inside the horizon, so violation grows linearly.
    Balancing ``gamma*T`` against ``K lnK/(gamma*delta)`` and ``T*(delta*T + 1/eta)``
    puts both rates at T^(-1/4).
    """
    return T ** -0.25


def bandit_precondition(eta: float, gamma: float, delta: float, K: int) -> bool:
    return 2.0 * eta * K <= (1.0 - gamma) * delta / 2.0


def hp_bandit_constants(K: int, T: int, epsilon: float):
    """Return (alpha, alpha1, beta) for the high-probability bandit learner."""
    alpha = 2.0 * math.sqrt(math.log(4.0 * K * T / epsilon))
    alpha1 = math.sqrt(0.5 * math.log(6.0 * K * T / epsilon))
    return alpha, alpha1, max(3.0, 1.0 + 2.0 * alpha1)


def default_params(kind, K: int, T: int, c0: float,
                   overrides: Optional[Mapping[str, object]] = None) -> LearnerParams:
    """Resolve the default step-size schedule for ``kind`` and apply overrides.

    Overrides replace individual constants; derived constants that were not
    overridden (e.g. ``eta`` after overriding ``gamma``) are recomputed.
    """
    kind = LearnerKind.parse(kind)
    if K < 2:
        raise ValueError("need at least two actions")
    if T < 1:
        raise ValueError("horizon must be positive")
    if not 0.0 <= c0 <= 1.0:
        raise ValueError("c0 must lie in [0, 1]")
    ov = dict(overrides or {})
    unknown = set(ov) - OVERRIDE_KEYS
    if unknown:
        raise ValueError(f"unknown parameter overrides: {sorted(unknown)}")
    for key in ov:
        if key != "dual_regularizer":
            ov[key] = float(ov[key])
    epsilon = ov.get("epsilon", 0.1)
    extra = {"epsilon": epsilon}
    if "dual_regularizer" in ov:
        extra["dual_regularizer"] = str(ov["dual_regularizer"])

    if kind in (LearnerKind.EWA, LearnerKind.LEWA, LearnerKind.HP_LEWA, LearnerKind.EXPLORE_EXPLOIT):
        eta = ov.get("eta", full_info_eta(K, T))
        delta = ov.get("delta", eta / 2.0)
        if kind is LearnerKind.EXPLORE_EXPLOIT:
            extra["explore"] = ov.get("explore", min(1.0, T ** (-1.0 / 3.0)))
        return LearnerParams(eta=eta, delta=delta, horizon=T, num_actions=K, c0=c0, **extra)

    if kind is LearnerKind.HP_BANDIT_LEWA:
        delta = ov.get("delta", bandit_rate(T))
        gamma = ov.get("gamma", min(0.2, bandit_rate(T)))
        _check_gamma(gamma)
        alpha, alpha1, beta = hp_bandit_constants(K, T, epsilon)
        alpha = ov.get("alpha", alpha)
        alpha1 = ov.get("alpha1", alpha1)
        beta = ov.get("beta", max(3.0, 1.0 + 2.0 * alpha1))
        eta = ov.get("eta", bandit_eta(gamma, delta, K, beta))
        return LearnerParams(eta=eta, delta=delta, gamma=gamma, alpha=alpha, alpha1=alpha1,
                             beta=beta, horizon=T, num_actions=K, c0=c0, **extra)

    # Exp3 and BanditLEWA share one schedule so that BanditLEWA with c0 = 0 is Exp3
    delta = ov.get("delta", bandit_rate(T))
    if "gamma" in ov:
        gamma = ov["gamma"]
        _check_gamma(gamma)
        eta = ov.get("eta", bandit_eta(gamma, delta, K))
    else:
        gamma = min(0.2, bandit_rate(T))
        eta = ov.get("eta", bandit_eta(gamma, delta, K))
        while "eta" not in ov and not bandit_precondition(eta, gamma, delta, K):
            gamma /= 2.0
            eta = bandit_eta(gamma, delta, K)
    if kind is LearnerKind.BANDIT_LEWA and not bandit_precondition(eta, gamma, delta, K):
        raise ValueError(
            f"BanditLEWA requires 2*eta*K <= (1-gamma)*delta/2 (eta={eta}, gamma={gamma}, delta={delta})"
        )
    return LearnerParams(eta=eta, delta=delta, gamma=gamma, horizon=T, num_actions=K,
                         c0=c0, **extra)


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")


# ---------------------------------------------------------------------------
# importance weighting


def importance_estimate(probs, action: int, value: float) -> np.ndarray:
    """Inverse-propensity estimate: zero except ``value / probs[action]`` at ``action``."""
    probs = np.asarray(probs, dtype=np.float64)
    p = probs[action]
    if not p > 0.0:
        raise ValueError(f"played action {action} has zero probability")
    est = np.zeros_like(probs)
    est[action] = value / p
    return est


# ---------------------------------------------------------------------------
# learners


class Learner:
    """Single-owner learner state: log-weights, dual variable and round counter.

    ``t`` counts completed updates, so the next ``decide()`` is for round ``t+1``.
    """

    def __init__(self, kind, params: LearnerParams):
        self.kind = LearnerKind.parse(kind)
        self.params = params
        K = params.num_actions
        if self.kind is LearnerKind.HP_BANDIT_LEWA:
            init = params.eta * params.alpha * math.sqrt(K * params.horizon)
            self.log_w = np.full(K, init)
        else:
            self.log_w = np.zeros(K)
        self.lam = 0.0
        self.t = 0
        self.constraint_sums = np.zeros(K)
        self.estimated_constraint_sums = np.zeros(K)
        self.inverse_prob_sums = np.zeros(K)
        self.reward_sums = np.zeros(K)

    def __repr__(self) -> str:
        return f"Learner({self.kind.value}, K={self.num_actions}, t={self.t}, lambda={self.lam:.6g})"

    @property
    def num_actions(self) -> int:
        return self.params.num_actions

    @property
    def is_bandit(self) -> bool:
        return self.kind.is_bandit

    @property
    def weights(self) -> LogWeightVector:
        return LogWeightVector(self.log_w.copy())

    @property
    def dual(self) -> DualVariable:
        return DualVariable(self.lam)

    @property
    def dual_cap(self) -> float:
        """Upper bound c0/decay the dual variable can never exceed."""
        decay = self.params.dual_decay
        return math.inf if decay <= 0.0 else self.params.c0 / decay

    @property
    def running_constraint_mean(self) -> np.ndarray:
        return self.constraint_sums / max(self.t, 1)

    @property
    def running_estimated_constraint_mean(self) -> np.ndarray:
        return self.estimated_constraint_sums / max(self.t, 1)

    @property
    def confidence_width(self) -> float:
        """Numerator of the HP-LEWA width alpha_t = width / sqrt(t)."""
        return math.sqrt(0.5 * math.log(2.0 / self.params.epsilon))

    @property
    def explore_rounds(self) -> int:
        return int(math.ceil(self.params.explore * self.params.horizon))

    def _unmixed(self) -> np.ndarray:
        q = np.empty(self.num_actions)
        _kernels.normalize_into(self.log_w, q)
        return q

    def _played(self):
        q = self._unmixed()
        if not self.is_bandit:
            return q, q
        p = np.empty_like(q)
        _kernels.mix_into(q, self.params.gamma, p)
        return q, p

    def decide(self) -> ActionDistribution:
        if self.kind is LearnerKind.EXPLORE_EXPLOIT:
            return ActionDistribution(self._explore_exploit_dist())
        return ActionDistribution(self._played()[1])

    def update(self, feedback) -> None:
        if isinstance(feedback, Bandit):
            self.update_bandit(feedback)
        else:
            self.update_full(feedback)

    def update_full(self, feedback: FullInfo) -> None:
        if self.is_bandit:
            raise TypeError(f"{self.kind.value} consumes bandit feedback")
        r, c = feedback.reward, feedback.constraint
        if r.shape[0] != self.num_actions:
            raise ValueError(f"feedback has {r.shape[0]} entries, expected {self.num_actions}")
        if self.kind is LearnerKind.EXPLORE_EXPLOIT:
            self._explore_exploit_update(r, c)
            return
        p = self._unmixed()
        prm = self.params
        self.lam = _kernels.full_step(
            _KERNEL_CODE[self.kind], self.log_w, self.lam, self.constraint_sums, self.t + 1,
            p, r, c, prm.eta, prm.delta, prm.c0, self.confidence_width,
        )
        self.t += 1

    def update_bandit(self, feedback: Bandit) -> None:
        if not self.is_bandit:
            raise TypeError(f"{self.kind.value} consumes full-information feedback")
        if feedback.action >= self.num_actions:
            raise ValueError(f"action {feedback.action} out of range for K={self.num_actions}")
        q, p = self._played()
        if not p[feedback.action] > 0.0:
            raise AssertionError("played action has zero probability despite exploration floor")
        prm = self.params
        self.lam = _kernels.bandit_step(
            _KERNEL_CODE[self.kind], self.log_w, self.lam, self.estimated_constraint_sums,
            self.inverse_prob_sums, self.t + 1, q, p, int(feedback.action),
            float(feedback.reward), float(feedback.constraint), prm.eta, prm.gamma,
            prm.dual_decay, prm.c0, prm.alpha, prm.alpha1,
            math.sqrt(self.num_actions * prm.horizon),
        )
        self.t += 1

    # explore-then-exploit baseline: uniform play while estimating c, then the
    # best fixed distribution for the cumulative rewards under the estimate
    def _explore_exploit_dist(self) -> np.ndarray:
        K = self.num_actions
        if self.t < self.explore_rounds or self.t == 0:
            return np.full(K, 1.0 / K)
        c_hat = self.constraint_sums / min(self.t, self.explore_rounds)
        try:
            return np.array(best_fixed(self.reward_sums, c_hat, self.params.c0).distribution.probs)
        except Infeasible:
            return np.eye(K)[int(np.argmax(c_hat))]

    def _explore_exploit_update(self, r, c) -> None:
        if self.t < self.explore_rounds:
            self.constraint_sums += c
        self.reward_sums += r
        self.t += 1


def make_learner(kind, K: int, T: int, c0: float,
                 overrides: Optional[Mapping[str, object]] = None) -> Learner:
    """Build a fresh learner with the default schedule for ``kind``."""
    return Learner(kind, default_params(kind, K, T, c0, overrides))


def decide(learner: Learner) -> ActionDistribution:
    return learner.decide()


def update_full(learner: Learner, feedback: FullInfo) -> None:
    learner.update_full(feedback)


def update_bandit(learner: Learner, feedback: Bandit) -> None:
    learner.update_bandit(feedback)
