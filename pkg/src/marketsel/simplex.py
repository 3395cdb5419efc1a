"""Probability-vector utilities: validation, flooring, divergences.

Vectors over the S market states are plain float64 numpy arrays.  The
validation helpers enforce the simplex invariants used everywhere else:
entries nonnegative, summing to one within 1e-12 at construction time
(1e-9 is tolerated after long arithmetic chains), and optionally bounded
below by a full-support floor.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

SUM_TOL = 1e-12
SUM_TOL_LOOSE = 1e-9


def as_simplex(
    weights,
    n_states: int | None = None,
    floor: float | None = None,
    name: str = "weights",
) -> np.ndarray:
    """Validate and return ``weights`` as a float64 probability vector.

    Raises InvalidInputError if the vector has fewer than two entries,
    contains negative or non-finite values, does not sum to one within
    1e-12, or (when ``floor`` is given) has an entry below the floor.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise InvalidInputError(f"{name} must be a vector over at least 2 states")
    if n_states is not None and w.size != n_states:
        raise InvalidInputError(f"{name} has {w.size} entries, expected {n_states}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise InvalidInputError(f"{name} must be finite and nonnegative")
    if abs(w.sum() - 1.0) > SUM_TOL:
        raise InvalidInputError(f"{name} must sum to 1 within {SUM_TOL}")
    if floor is not None and np.any(w < floor):
        raise InvalidInputError(f"{name} must have full support with floor {floor}")
    return w


def is_simplex(weights, tol: float = SUM_TOL_LOOSE) -> bool:
    w = np.asarray(weights, dtype=np.float64)
    return (
        w.ndim == 1
        and w.size >= 2
        and bool(np.all(np.isfinite(w)))
        and bool(np.all(w >= 0.0))
        and abs(w.sum() - 1.0) <= tol
    )


def clamp_to_floor(alpha: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    """Push every entry of a probability vector up to ``floor``.

    Uses the convex blend (1 - S*floor)*alpha + floor, which keeps the
    vector on the simplex and guarantees the floor exactly.  Vectors
    already above the floor are returned unchanged.  The second return
    value reports whether clamping happened.
    """
    a = np.asarray(alpha, dtype=np.float64)
    if a.min() >= floor:
        return a, False
    out = (1.0 - a.shape[-1] * floor) * a + floor
    return out, True


def clamp_rows_to_floor(strategies: np.ndarray, floor: float) -> tuple[np.ndarray, int]:
    """Row-wise :func:`clamp_to_floor` for a (T, S) strategy stream.

    Returns the clamped stream and the number of rows that required it.
    """
    s = np.asarray(strategies, dtype=np.float64)
    bad = s.min(axis=1) < floor
    n_bad = int(bad.sum())
    if n_bad == 0:
        return s, 0
    out = s.copy()
    out[bad] = (1.0 - s.shape[1] * floor) * s[bad] + floor
    return out, n_bad


def relative_entropy(q, alpha) -> float:
    """KL divergence sum_s q_s ln(q_s / alpha_s) in nats.

    Returns +inf when alpha puts zero weight on a state with q_s > 0.
    States with q_s = 0 contribute nothing regardless of alpha.
    """
    qv = np.asarray(q, dtype=np.float64)
    av = np.asarray(alpha, dtype=np.float64)
    if qv.shape != av.shape:
        raise InvalidInputError("q and alpha must have matching shapes")
    support = qv > 0.0
    if np.any(av[support] == 0.0):
        return float("inf")
    qs = qv[support]
    return float(np.sum(qs * (np.log(qs) - np.log(av[support]))))


def total_variation(p, q) -> float:
    """Total variation distance, half the L1 difference."""
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def softmax_rows(log_weights: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (T, K) array of log weights."""
    lw = np.asarray(log_weights, dtype=np.float64)
    shifted = lw - lw.max(axis=-1, keepdims=True)
    w = np.exp(shifted)
    w /= w.sum(axis=-1, keepdims=True)
    return w
