"""Regret accounting: hindsight benchmark, ledgers, survival analysis.

The benchmark for a state sequence is the best fixed investment vector
in hindsight, which is the empirical distribution of the sequence; an
agent's regret is the benchmark value minus its realized cumulative log
payoff.  Wealth and regret are two views of the same numbers: for any
pair of agents, the difference of regrets equals the log wealth ratio
up to the initial split (the ledger records both and their residual).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "step_utility",
    "hindsight_best",
    "regret",
    "RegretLedger",
    "build_ledger",
    "classify_survival",
    "survival_time",
    "fit_power_law",
]


def step_utility(alpha: np.ndarray, realized_state: int) -> float:
    """Log of the weight invested in the realized state, in nats.

    This is the step's change in log relative wealth against a
    true-distribution investor; -inf signals a vanishing position.
    """
    a = float(np.asarray(alpha, dtype=np.float64)[realized_state])
    if a == 0.0:
        return float("-inf")
    return float(np.log(a))


def state_counts(states: np.ndarray, n_states: int | None = None) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64)
    if s.size == 0:
        raise InvalidInputError("state sequence must be nonempty")
    length = int(s.max()) + 1 if n_states is None else n_states
    return np.bincount(s, minlength=length)


def hindsight_best(
    states: np.ndarray, n_states: int | None = None
) -> tuple[np.ndarray, float]:
    """Best fixed vector in hindsight and its cumulative utility.

    The maximizer of sum_t log alpha_{s_t} over the simplex is the
    empirical distribution; unobserved states get weight zero and
    contribute nothing.  This is an accounting construct, exempt from
    the full-support floor.
    """
    counts = state_counts(states, n_states)
    total = counts.sum()
    q_hat = counts / total
    observed = counts > 0
    value = float(np.sum(counts[observed] * np.log(q_hat[observed])))
    return q_hat, value


def regret(realized_utilities: np.ndarray, states: np.ndarray) -> float:
    """Benchmark value minus the realized cumulative utility."""
    utilities = np.asarray(realized_utilities, dtype=np.float64)
    states = np.asarray(states, dtype=np.int64)
    if utilities.shape[0] != states.size:
        raise InvalidInputError("need one utility per step")
    _, benchmark = hindsight_best(states)
    return benchmark - float(utilities.sum())


@dataclass
class RegretLedger:
    """Per-agent accounting for one completed run."""

    cumulative_utilities: np.ndarray  # (N,)
    benchmark_value: float
    regrets: np.ndarray  # (N,)
    regret_differences: np.ndarray  # (N, N), entry [n, m] = R^n - R^m
    terminal_wealths: np.ndarray  # (N,)
    terminal_log_wealths: np.ndarray  # (N,), stays finite when shares underflow
    initial_wealths: np.ndarray  # (N,)

    def identity_residuals(self) -> np.ndarray:
        """(N, N) residuals of the regret-wealth identity.

        R^n - R^m + log(w^n_T / w^m_T) - log(w^n_0 / w^m_0) is
        identically zero; entries report the numerical residual.  Wealth
        ratios are taken in log space, where they stay finite even after
        the losing agent's share underflows to zero.
        """
        log_w0 = np.log(self.initial_wealths)
        ratio_t = self.terminal_log_wealths[:, None] - self.terminal_log_wealths[None, :]
        ratio_0 = log_w0[:, None] - log_w0[None, :]
        return self.regret_differences + ratio_t - ratio_0

    def to_dict(self) -> dict:
        return {
            "benchmark_value": self.benchmark_value,
            "agents": [
                {
                    "cumulative_utility": float(self.cumulative_utilities[n]),
                    "regret": float(self.regrets[n]),
                    "terminal_wealth": float(self.terminal_wealths[n]),
                }
                for n in range(self.regrets.size)
            ],
            "regret_differences": self.regret_differences.tolist(),
        }


def build_ledger(record) -> RegretLedger:
    """Regret ledger of a completed run record."""
    utilities = record.realized_log_strategies().sum(axis=1)
    _, benchmark = hindsight_best(record.states, record.config.n_states)
    regrets = benchmark - utilities
    return RegretLedger(
        cumulative_utilities=utilities,
        benchmark_value=benchmark,
        regrets=regrets,
        regret_differences=regrets[:, None] - regrets[None, :],
        terminal_wealths=record.terminal_wealths(),
        terminal_log_wealths=record.terminal_log_wealths,
        initial_wealths=record.config.validated_initial_wealths(),
    )


def classify_survival(
    trajectories: np.ndarray,
    threshold: float = 0.05,
    survive_fraction: float = 0.95,
    vanish_median: float = 1e-3,
    min_seeds: int = 100,
) -> str:
    """Classify one agent from wealth trajectories across seeds.

    ``trajectories`` has shape (n_seeds, T+1).  The agent *survives*
    when at least ``survive_fraction`` of seeds end above ``threshold``
    and that fraction has not decayed over the last decade of time;
    it *vanishes* when the median terminal wealth sits below
    ``vanish_median`` and is still falling.  Everything else is
    inconclusive.
    """
    w = np.asarray(trajectories, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < min_seeds:
        raise InvalidInputError(f"need trajectories from at least {min_seeds} seeds")
    earlier = w.shape[1] // 10
    frac_now = float(np.mean(w[:, -1] > threshold))
    frac_then = float(np.mean(w[:, earlier] > threshold))
    median_now = float(np.median(w[:, -1]))
    median_then = float(np.median(w[:, earlier]))
    if frac_now >= survive_fraction and frac_now >= frac_then - 1e-12:
        return "survives"
    if median_now < vanish_median and median_now <= median_then:
        return "vanishes"
    return "inconclusive"


def survival_time(mean_trajectory: np.ndarray) -> tuple[int, bool]:
    """Largest t with mean wealth >= 1/2 at every step up to t.

    Returns (tau, censored); censored is True when the trajectory never
    drops, in which case tau is its last index.
    """
    w = np.asarray(mean_trajectory, dtype=np.float64)
    if w.size == 0:
        raise InvalidInputError("empty trajectory")
    below = np.nonzero(w < 0.5)[0]
    if below.size == 0:
        return w.size - 1, True
    return max(int(below[0]) - 1, 0), False


def fit_power_law(epsilons, taus) -> dict:
    """Least-squares fit of log tau against log epsilon.

    Returns the slope (the scaling exponent), intercept, and R^2.
    """
    eps = np.asarray(epsilons, dtype=np.float64)
    tau = np.asarray(taus, dtype=np.float64)
    if eps.size != tau.size or eps.size < 4:
        raise InvalidInputError("need at least 4 matching (epsilon, tau) pairs")
    if np.any(eps <= 0.0) or np.any(tau <= 0.0):
        raise InvalidInputError("power-law fits need positive values")
    x = np.log(eps)
    y = np.log(tau)
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r_squared}
