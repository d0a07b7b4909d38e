"""Compiled per-round kernels shared by the learner objects and the run loops.

Every learner update goes through ``full_step`` or ``bandit_step`` so that a
hand-driven ``Learner`` and the batch loops in ``run_full``/``run_bandit``
produce bit-identical trajectories.
"""

import math

import numpy as np
from numba import njit

EWA = 0
LEWA = 1
HP_LEWA = 2
EXP3 = 3
BANDIT_LEWA = 4
HP_BANDIT_LEWA = 5


@njit(cache=True)
def normalize_into(log_w, out):
    m = log_w[0]
    for i in range(1, log_w.shape[0]):
        if log_w[i] > m:
            m = log_w[i]
    s = 0.0
    for i in range(log_w.shape[0]):
        out[i] = math.exp(log_w[i] - m)
        s += out[i]
    for i in range(log_w.shape[0]):
        out[i] /= s


@njit(cache=True)
def mix_into(q, gamma, out):
    k = q.shape[0]
    floor = gamma / k
    for i in range(k):
        out[i] = (1.0 - gamma) * q[i] + floor


@njit(cache=True)
def sample_index(probs, u):
    # inverse CDF; zero-probability entries can never be selected
    acc = 0.0
    last = -1
    for i in range(probs.shape[0]):
        if probs[i] > 0.0:
            last = i
        acc += probs[i]
        if u < acc:
            return i
    return last


@njit(cache=True)
def project_dual(value, c0, reg):
    """Clip to [0, c0/reg].

    The upper end is never reached in exact arithmetic (the update maps
    [0, c0/reg] into itself whenever beta >= 0); clipping only removes the
    last-ulp overshoot rounding can introduce at the cap.
    """
    if not value > 0.0:
        return 0.0
    if reg > 0.0:
        cap = c0 / reg
        if value > cap:
            return cap
    return value


@njit(cache=True)
def full_step(kind, log_w, lam, c_sums, t, p, r, c, eta, delta, c0, width):
    """Apply one full-information update; returns the new dual variable.

    ``t`` is the 1-based index of the round being consumed and ``p`` the
    distribution played in it (computed before the primal update).
    """
    k = log_w.shape[0]
    if kind == EWA:
        for i in range(k):
            log_w[i] += eta * r[i]
        return lam
    if kind == LEWA:
        beta = 0.0
        for i in range(k):
            beta += p[i] * c[i]
        for i in range(k):
            log_w[i] += eta * (r[i] + lam * c[i])
    else:
        beta = 0.0
        for i in range(k):
            c_sums[i] += c[i]
        for i in range(k):
            cbar = c_sums[i] / t
            beta += p[i] * cbar
            log_w[i] += eta * (r[i] + lam * cbar)
        beta += width / math.sqrt(t)
    return project_dual((1.0 - delta * eta) * lam - eta * (beta - c0), c0, delta)


@njit(cache=True)
def bandit_step(kind, log_w, lam, chat_sums, inv_p_sums, t, q, p, action, reward,
                constraint, eta, gamma, reg, c0, alpha, alpha1, sqrt_kt):
    """Apply one bandit update; returns the new dual variable.

    ``p`` is the mixed distribution the action was drawn from and ``q`` the
    unmixed one. Importance weights use the played probability ``p[action]``.
    """
    k = log_w.shape[0]
    p_played = p[action]
    r_hat = reward / p_played
    if kind == EXP3:
        log_w[action] += eta * r_hat
        return lam
    c_hat = constraint / p_played
    if kind == BANDIT_LEWA:
        log_w[action] += eta * (r_hat + lam * c_hat)
        beta = q[action] * c_hat
    else:
        chat_sums[action] += c_hat
        bonus = (2.0 * k / gamma) * alpha1 / math.sqrt(t)
        for i in range(k):
            inv_p_sums[i] += 1.0 / p[i]
            ri = r_hat if i == action else 0.0
            upper_r = ri + alpha / (p[i] * sqrt_kt)
            upper_c = chat_sums[i] / t + bonus
            log_w[i] += eta * (upper_r + lam * upper_c)
        beta = q[action] * c_hat + alpha1 / math.sqrt(t)
    return project_dual((1.0 - reg * eta) * lam - eta * (beta - c0), c0, reg)


@njit(cache=True)
def run_full(kind, log_w, lam, c_sums, t0, rewards, constraints, uniforms,
             eta, delta, c0, width):
    n, k = rewards.shape
    dists = np.empty((n, k))
    actions = np.empty(n, dtype=np.int64)
    lambdas = np.empty(n)
    for s in range(n):
        p = dists[s]
        normalize_into(log_w, p)
        actions[s] = sample_index(p, uniforms[s])
        lambdas[s] = lam
        lam = full_step(kind, log_w, lam, c_sums, t0 + s + 1, p, rewards[s],
                        constraints[s], eta, delta, c0, width)
    return dists, actions, lambdas, lam


@njit(cache=True)
def run_bandit(kind, log_w, lam, chat_sums, inv_p_sums, t0, rewards, constraints,
               uniforms, eta, gamma, reg, c0, alpha, alpha1, sqrt_kt):
    n, k = rewards.shape
    dists = np.empty((n, k))
    actions = np.empty(n, dtype=np.int64)
    lambdas = np.empty(n)
    q = np.empty(k)
    for s in range(n):
        p = dists[s]
        normalize_into(log_w, q)
        mix_into(q, gamma, p)
        a = sample_index(p, uniforms[s])
        actions[s] = a
        lambdas[s] = lam
        lam = bandit_step(kind, log_w, lam, chat_sums, inv_p_sums, t0 + s + 1, q, p,
                          a, rewards[s, a], constraints[s, a], eta, gamma, reg, c0,
                          alpha, alpha1, sqrt_kt)
    return dists, actions, lambdas, lam
