"""Best fixed distribution in hindsight under one linear constraint.

Solves ``max p.R  s.t.  p.c >= c0, p in simplex``. The feasible set is a
polytope whose vertices are either unit vectors e_i with c_i >= c0 or the
two-point mixtures of e_i, e_j (c_i > c0 > c_j) that meet the constraint with
equality, so enumerating those O(K^2) candidates is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence

import numpy as np

from clewa.core import ActionDistribution


class Infeasible(ValueError):
    """No distribution on the simplex satisfies the constraint."""


@dataclass(frozen=True)
class ComparatorSolution:
    distribution: ActionDistribution
    value: float
    active: bool


def _inputs(R, c):
    R = np.asarray(R, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if R.ndim != 1 or R.shape != c.shape or R.size == 0:
        raise ValueError("R and c must be vectors of equal, non-zero length")
    return R, c


def _solve(R: np.ndarray, c: np.ndarray, c0: float) -> ComparatorSolution:
    K = R.shape[0]
    best_val = -np.inf
    best = None
    # candidates visited in lexicographic (first, second) index order; a unit
    # vector e_i is keyed (i, i) so it precedes every mixture (i, j>i)
    for i in range(K):
        if c[i] >= c0 and R[i] > best_val:
            best_val, best = R[i], (i, i, 1.0)
        for j in range(i + 1, K):
            if c[i] == c[j]:
                continue
            hi, lo = (i, j) if c[i] > c[j] else (j, i)
            if not c[hi] >= c0 >= c[lo]:
                continue
            a = (c0 - c[lo]) / (c[hi] - c[lo])
            val = a * R[hi] + (1.0 - a) * R[lo]
            if val > best_val:
                best_val, best = val, (hi, lo, a)
    if best is None:
        raise Infeasible(f"max constraint mean {float(c.max())!r} is below threshold {c0!r}")
    hi, lo, a = best
    probs = np.zeros(K)
    probs[hi] += a
    probs[lo] += 1.0 - a
    dist = ActionDistribution(probs)
    value = float(probs @ R)
    # mixtures meet the constraint with equality by construction
    active = hi != lo or bool(c[hi] == c0)
    return ComparatorSolution(dist, value, active)


def best_fixed(R, c, c0: float) -> ComparatorSolution:
    """Exact constrained optimum; ties go to the lowest (first, second) index pair.

    Raises ``Infeasible`` when ``max(c) < c0``.
    """
    R, c = _inputs(R, c)
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("constraint means must lie in [0, 1]")
    if not 0.0 <= c0 <= 1.0:
        raise ValueError("c0 must lie in [0, 1]")
    return _solve(R, c, float(c0))


def _compositions(K: int, n: int) -> np.ndarray:
    if K == 1:
        return np.array([[n]], dtype=np.int64)
    if K == 2:
        x = np.arange(n + 1, dtype=np.int64)
        return np.column_stack([x, n - x])
    parts = []
    for x in range(n + 1):
        rest = _compositions(K - 1, n - x)
        parts.append(np.column_stack([np.full(rest.shape[0], x), rest]))
    return np.concatenate(parts)


@lru_cache(maxsize=8)
def _simplex_grid(K: int, n: int) -> np.ndarray:
    pts = _compositions(K, n) / float(n)
    pts.setflags(write=False)
    return pts


def best_fixed_grid(R, c, c0: float, step: float) -> ComparatorSolution:
    """Exhaustive search over simplex points whose coordinates are multiples of ``step``.

    Brute-force reference for ``best_fixed``; limited to K <= 4.
    """
    R, c = _inputs(R, c)
    K = R.shape[0]
    if K > 4:
        raise ValueError("grid search is limited to K <= 4")
    if not 0.0 < step <= 0.5:
        raise ValueError("step must lie in (0, 0.5]")
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ValueError("1/step must be an integer")
    pts = _simplex_grid(K, n)
    slack = pts @ c - c0
    # exact comparison: the grid must never admit a point the exact oracle rejects
    feasible = slack >= 0.0
    if not feasible.any():
        raise Infeasible("no grid point satisfies the constraint")
    vals = np.where(feasible, pts @ R, -np.inf)
    k = int(np.argmax(vals))
    probs = pts[k].copy()
    return ComparatorSolution(
        ActionDistribution(probs), float(vals[k]), bool(abs(slack[k]) <= 1e-12)
    )


def h_curve(R, c, c0: float, gammas: Sequence[float]) -> List[float]:
    """Constrained optimum as the threshold is relaxed: h(g) = max p.R s.t. c0 - p.c <= g."""
    R, c = _inputs(R, c)
    best_fixed(R, c, c0)
    out = []
    for g in gammas:
        if g < 0.0:
            raise ValueError("relaxations must be non-negative")
        out.append(_solve(R, c, max(float(c0) - g, 0.0)).value)
    return out
