"""Lagrangian exponentially weighted average learners for online decisions under a long-term constraint."""

from clewa.algorithms import Learner, LearnerKind, decide, make_learner, update_bandit, update_full
from clewa.core import (
    ActionDistribution,
    Bandit,
    FullInfo,
    LearnerParams,
    LogWeightVector,
    RoundRecord,
    RoundRecords,
    normalize,
    sample,
)
from clewa.environments import ConstraintModel, IIDBernoulli, LowVariation, Switching, generate
from clewa.oracle import ComparatorSolution, Infeasible, best_fixed, best_fixed_grid, h_curve

__version__ = "0.1.0"
