"""Compiled inner loops for the truly sequential agents.

Bayesian posteriors and fixed rules vectorize with cumulative sums, but
UCB, projected gradient, noisy updates, and the regularized Bayes
recursion each carry state that depends on the previous step.  These
loops are the hot path of multi-seed sweeps, so they are compiled with
numba.  Reference step-by-step implementations live in ``agents``; the
tests assert both paths agree.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def ucb_choices(states: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    """UCB1 arm choices over a fixed state sequence.

    ``rewards[k, s]`` is the normalized reward of arm k when state s is
    realized.  Each arm is pulled once in index order, then the played
    arm maximizes mean + sqrt(2 ln t / n_k) with t the 1-based step;
    ties go to the lowest index.
    """
    n_arms = rewards.shape[0]
    horizon = states.shape[0]
    choices = np.empty(horizon, np.int64)
    counts = np.zeros(n_arms, np.float64)
    means = np.zeros(n_arms, np.float64)
    for t in range(horizon):
        if t < n_arms:
            arm = t
        else:
            log_t = np.log(t + 1.0)
            arm = 0
            best = -np.inf
            for k in range(n_arms):
                value = means[k] + np.sqrt(2.0 * log_t / counts[k])
                if value > best:
                    best = value
                    arm = k
        choices[t] = arm
        reward = rewards[arm, states[t]]
        counts[arm] += 1.0
        means[arm] += (reward - means[arm]) / counts[arm]
    return choices


@njit(cache=True)
def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    n = v.shape[0]
    u = np.sort(v)[::-1]
    cumulative = 0.0
    threshold = 0.0
    for j in range(n):
        cumulative += u[j]
        candidate = (cumulative - 1.0) / (j + 1.0)
        if u[j] - candidate > 0.0:
            threshold = candidate
    out = np.empty(n, np.float64)
    for s in range(n):
        diff = v[s] - threshold
        out[s] = diff if diff > 0.0 else 0.0
    return out


@njit(cache=True)
def ogd_strategies(
    states: np.ndarray, alpha0: np.ndarray, step_scale: float, floor: float
) -> np.ndarray:
    """Projected-gradient play on the per-step log utility.

    Ascends U^t(alpha) = log alpha_{s_t} with step size step_scale/sqrt(t),
    projecting back onto the simplex and blending up to the floor.
    Returns the (T, S) stream of strategies as played.
    """
    horizon = states.shape[0]
    n_states = alpha0.shape[0]
    out = np.empty((horizon, n_states), np.float64)
    alpha = alpha0.copy()
    for t in range(horizon):
        for s in range(n_states):
            out[t, s] = alpha[s]
        realized = states[t]
        alpha[realized] += step_scale / np.sqrt(t + 1.0) / alpha[realized]
        alpha = project_simplex(alpha)
        low = alpha[0]
        for s in range(1, n_states):
            if alpha[s] < low:
                low = alpha[s]
        if low < floor:
            for s in range(n_states):
                alpha[s] = (1.0 - n_states * floor) * alpha[s] + floor
    return out


@njit(cache=True)
def noisy_log_odds(
    states: np.ndarray, log_lik: np.ndarray, etas: np.ndarray, z0: float
) -> np.ndarray:
    """Log-odds trajectory of the trembling-hand two-model learner.

    ``log_lik[s]`` is the log-likelihood ratio L(s) of model a over
    model b; ``etas[t]`` the signed excess weight at step t.  Entry t of
    the result is the log-odds *before* observing states[t]; the
    recursion is z <- (1 + eta_t) L(s_t) + (1 - eta_t) z.
    """
    horizon = states.shape[0]
    out = np.empty(horizon, np.float64)
    z = z0
    for t in range(horizon):
        out[t] = z
        z = (1.0 + etas[t]) * log_lik[states[t]] + (1.0 - etas[t]) * z
    return out


@njit(cache=True)
def robust_bayes_weights(
    states: np.ndarray, models: np.ndarray, prior: np.ndarray
) -> np.ndarray:
    """Posterior trajectory of the regularized Bayes update.

    Returns (T+1, K): row t holds the weights in force before observing
    states[t]; the last row is the final posterior.  After observation
    t (1-based) the plain Bayes update is regularized with eps = t^-2
    and renormalized, flooring every weight at eps / (1 + K eps).
    """
    horizon = states.shape[0]
    n_models = prior.shape[0]
    out = np.empty((horizon + 1, n_models), np.float64)
    weights = prior.copy()
    for t in range(horizon):
        for k in range(n_models):
            out[t, k] = weights[k]
        realized = states[t]
        total = 0.0
        for k in range(n_models):
            weights[k] *= models[k, realized]
            total += weights[k]
        eps = 1.0 / ((t + 1.0) * (t + 1.0))
        denom = 1.0 + n_models * eps
        for k in range(n_models):
            weights[k] = (weights[k] / total + eps) / denom
    for k in range(n_models):
        out[horizon, k] = weights[k]
    return out
