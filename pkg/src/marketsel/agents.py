"""Learning agents: every strategy is a map from observed history to the
next investment vector over states.

Two surfaces are provided.  The update rules themselves (Bayes rule,
regularized Bayes, trembling-hand updates, UCB bookkeeping, projected
gradient) are plain functions over small state records, which is what
the unit tests exercise.  The ``Agent`` classes wrap them behind a
single contract used by the market runner:

* ``reset(rng)`` — clear internal state, attach the agent's random
  substream (most agents are deterministic and ignore it);
* ``next_strategy(t)`` — the investment vector for step t, depending
  only on states observed before t;
* ``observe(state)`` — feed the realized state of the current step;
* ``strategies(states, rng)`` — the full (T, S) stream for a known
  state sequence.  The default loops over the step API; agents with a
  vectorized or compiled fast path override it.  Both paths are
  numerically identical and tested against each other.

The hindsight oracle (``MagicAgent``) is exempt from the measurability
contract: it needs the whole sequence up front and only supports the
stream form.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import InvalidInputError, UnsupportedConfigurationError
from .simplex import as_simplex, clamp_to_floor, softmax_rows

DEFAULT_STRATEGY_FLOOR = 1e-6

AGENT_KINDS = ("fixed", "bayes", "noisy_bayes", "robust_bayes", "ucb", "ogd", "magic")


# ---------------------------------------------------------------------------
# update rules on explicit state records


@dataclass
class BayesState:
    """Finite-support posterior: models (K, S) and log weights (K,)."""

    models: np.ndarray
    log_weights: np.ndarray

    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


def make_bayes_state(models, prior=None, delta: float | None = None) -> BayesState:
    m = np.asarray(models, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise InvalidInputError("models must be a (K, S) array with K >= 1")
    for k in range(m.shape[0]):
        as_simplex(m[k], floor=delta, name=f"model {k}")
    if prior is None:
        prior = np.full(m.shape[0], 1.0 / m.shape[0])
    p = np.asarray(prior, dtype=np.float64)
    if p.shape != (m.shape[0],) or np.any(p <= 0.0) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidInputError("prior must be a positive probability vector over models")
    return BayesState(models=m, log_weights=np.log(p))


def bayes_update(state: BayesState, observed: int) -> BayesState:
    """Posterior after one observation, computed in log space."""
    lw = state.log_weights + np.log(state.models[:, observed])
    lw -= _log_sum_exp(lw)
    return replace(state, log_weights=lw)


def bayes_predict(state: BayesState) -> np.ndarray:
    """Posterior-mixture probability on states; the bet-your-beliefs rule."""
    return state.weights() @ state.models


def robust_bayes_update(state: BayesState, observed: int, t: int) -> BayesState:
    """Bayes update followed by additive regularization eps_t = t^-2.

    The regularized weights (lambda~ + eps) / (1 + K eps) stay on the
    simplex and every entry is floored at eps / (1 + K eps).
    """
    if t < 1:
        raise InvalidInputError("robust update requires step t >= 1")
    n_models = state.models.shape[0]
    tentative = bayes_update(state, observed).weights()
    eps = 1.0 / (float(t) * float(t))
    weights = (tentative + eps) / (1.0 + n_models * eps)
    return replace(state, log_weights=np.log(weights))


@dataclass
class NoisyBayesState:
    """Two-model learner with log odds of model a over model b."""

    theta_a: np.ndarray
    theta_b: np.ndarray
    eta: float
    log_odds: float = 0.0

    def log_likelihood_ratio(self) -> np.ndarray:
        return np.log(self.theta_a) - np.log(self.theta_b)


def make_noisy_bayes_state(theta_a, theta_b, eta: float) -> NoisyBayesState:
    a = as_simplex(theta_a, name="theta_a")
    b = as_simplex(theta_b, name="theta_b")
    if a.size != 2 or b.size != 2:
        raise UnsupportedConfigurationError(
            "noisy updates are defined for two-state markets only"
        )
    if eta < 0.0:
        raise InvalidInputError("eta must be nonnegative")
    return NoisyBayesState(theta_a=a, theta_b=b, eta=float(eta))


def noisy_bayes_update(
    state: NoisyBayesState, observed: int, rng: np.random.Generator
) -> NoisyBayesState:
    """Trembling-hand update: data weighted 1 + eta_t, prior 1 - eta_t.

    eta_t is +-eta with equal probability, consuming one uniform draw.
    """
    sign = 1.0 if rng.random() < 0.5 else -1.0
    eta_t = sign * state.eta
    step = state.log_likelihood_ratio()[observed]
    z = (1.0 + eta_t) * step + (1.0 - eta_t) * state.log_odds
    return replace(state, log_odds=z)


def noisy_bayes_predict(state: NoisyBayesState) -> np.ndarray:
    """Mixture of the two models under the current posterior odds."""
    p_a = _sigmoid(state.log_odds)
    return p_a * state.theta_a + (1.0 - p_a) * state.theta_b


@dataclass
class UcbState:
    """Pull counts and running mean normalized reward per model."""

    counts: np.ndarray
    means: np.ndarray
    step: int = 0


def make_ucb_state(n_models: int) -> UcbState:
    if n_models < 1:
        raise InvalidInputError("need at least one model")
    return UcbState(counts=np.zeros(n_models), means=np.zeros(n_models))


def ucb_choose(state: UcbState) -> int:
    """Arm for the current step: round-robin until every arm has one
    pull, then highest mean + sqrt(2 ln t / n_k), ties to lowest index."""
    n_models = state.counts.shape[0]
    if state.step < n_models:
        return state.step
    bonus = np.sqrt(2.0 * np.log(state.step + 1.0) / state.counts)
    return int(np.argmax(state.means + bonus))


def ucb_step(
    state: UcbState, rewards: np.ndarray, observed: int
) -> tuple[int, UcbState]:
    """Choose an arm, then credit it with rewards[arm, observed]."""
    arm = ucb_choose(state)
    counts = state.counts.copy()
    means = state.means.copy()
    counts[arm] += 1.0
    means[arm] += (rewards[arm, observed] - means[arm]) / counts[arm]
    return arm, UcbState(counts=counts, means=means, step=state.step + 1)


def normalized_rewards(models: np.ndarray, delta: float) -> np.ndarray:
    """Map the log payoff of playing model k at state s into [0, 1].

    Uses the market floor Delta: r = (log theta - log Delta)/(-log Delta).
    """
    if not (0.0 < delta < 1.0):
        raise InvalidInputError("delta must lie in (0, 1)")
    scale = -np.log(delta)
    return (np.log(models) - np.log(delta)) / scale


def ogd_step(
    alpha: np.ndarray, gradient: np.ndarray, step_size: float, floor: float = 0.0
) -> np.ndarray:
    """One projected-gradient step against ``gradient`` (of the loss -U).

    Moves alpha by -step_size * gradient, projects back onto the
    simplex, and clamps to the floor.
    """
    moved = np.asarray(alpha, dtype=np.float64) - step_size * np.asarray(
        gradient, dtype=np.float64
    )
    projected = _kernels.project_simplex(moved)
    if floor > 0.0:
        projected, _ = clamp_to_floor(projected, floor)
    return projected


def empirical_distribution(states, n_states: int, floor: float = 0.0) -> np.ndarray:
    """State frequencies of a full sequence, floor-clamped if requested."""
    s = np.asarray(states, dtype=np.int64)
    if s.size == 0:
        raise InvalidInputError("state sequence must be nonempty")
    q_hat = np.bincount(s, minlength=n_states).astype(np.float64) / s.size
    if floor > 0.0:
        q_hat, _ = clamp_to_floor(q_hat, floor)
    return q_hat


def _log_sum_exp(values: np.ndarray) -> float:
    m = values.max()
    return float(m + np.log(np.exp(values - m).sum()))


def _sigmoid(z: float) -> float:
    if z >= 0.0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# agent classes


class Agent:
    """Common contract; see module docstring."""

    kind: str = "abstract"
    needs_full_sequence: bool = False

    def __init__(self, n_states: int, floor: float = DEFAULT_STRATEGY_FLOOR):
        self.n_states = int(n_states)
        self.floor = float(floor)

    def reset(self, rng: np.random.Generator | None = None) -> None:
        self._rng = rng

    def next_strategy(self, t: int) -> np.ndarray:
        raise NotImplementedError

    def observe(self, state: int) -> None:
        pass

    def strategies(
        self, states: np.ndarray, rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """(T, S) raw strategy stream for a known state sequence.

        The market applies the emission floor (and counts clamp events);
        rules whose own dynamics depend on a floor, like the projected
        gradient learner, handle it internally.
        """
        states = np.asarray(states, dtype=np.int64)
        self.reset(rng)
        out = np.empty((states.size, self.n_states), dtype=np.float64)
        for t in range(states.size):
            out[t] = self.next_strategy(t)
            self.observe(int(states[t]))
        return out


class FixedAgent(Agent):
    """Plays the same vector at every step."""

    kind = "fixed"

    def __init__(self, alpha, n_states=None, floor=DEFAULT_STRATEGY_FLOOR):
        alpha = as_simplex(alpha, n_states=n_states, name="alpha")
        super().__init__(alpha.size, floor)
        if alpha.min() <= 0.0:
            raise InvalidInputError("fixed strategies must have full support")
        self.alpha = alpha

    def next_strategy(self, t: int) -> np.ndarray:
        return self.alpha

    def strategies(self, states, rng=None):
        return np.tile(self.alpha, (np.asarray(states).size, 1))


def fixed_strategy(alpha, floor: float = DEFAULT_STRATEGY_FLOOR) -> FixedAgent:
    return FixedAgent(alpha, floor=floor)


class BayesAgent(Agent):
    """Finite-support Bayesian betting its posterior-mixture beliefs."""

    kind = "bayes"

    def __init__(self, models, prior=None, delta=None, floor=DEFAULT_STRATEGY_FLOOR):
        self._initial = make_bayes_state(models, prior, delta)
        super().__init__(self._initial.models.shape[1], floor)
        self.state = self._initial

    def reset(self, rng=None):
        super().reset(rng)
        self.state = self._initial

    def next_strategy(self, t: int) -> np.ndarray:
        return bayes_predict(self.state)

    def observe(self, state: int) -> None:
        self.state = bayes_update(self.state, state)

    def log_weight_stream(self, states: np.ndarray) -> np.ndarray:
        """(T+1, K) unnormalized log posterior weights; row t is the
        posterior before observing states[t], row T the final one."""
        states = np.asarray(states, dtype=np.int64)
        log_lik = np.log(self._initial.models[:, states]).T
        lw = np.vstack([np.zeros(log_lik.shape[1]), np.cumsum(log_lik, axis=0)])
        return self._initial.log_weights + lw

    def strategies(self, states, rng=None):
        lw = self.log_weight_stream(states)[:-1]
        return softmax_rows(lw) @ self._initial.models


class RobustBayesAgent(Agent):
    """Bayesian whose update is regularized with eps_t = t^-2.

    Keeps every model weight above eps_t / (1 + K eps_t), trading a
    vanishing amount of stationary accuracy for fast recovery after a
    distribution shift.  The step counter runs over global time and is
    never reset.
    """

    kind = "robust_bayes"

    def __init__(self, models, prior=None, delta=None, floor=DEFAULT_STRATEGY_FLOOR):
        self._initial = make_bayes_state(models, prior, delta)
        super().__init__(self._initial.models.shape[1], floor)
        self.state = self._initial
        self._t = 0

    def reset(self, rng=None):
        super().reset(rng)
        self.state = self._initial
        self._t = 0

    def next_strategy(self, t: int) -> np.ndarray:
        return bayes_predict(self.state)

    def observe(self, state: int) -> None:
        self._t += 1
        self.state = robust_bayes_update(self.state, state, self._t)

    def weight_stream(self, states: np.ndarray) -> np.ndarray:
        """(T+1, K) posterior weights; row t is in force at step t and
        the last row is the final posterior."""
        states = np.asarray(states, dtype=np.int64)
        prior = self._initial.weights()
        return _kernels.robust_bayes_weights(states, self._initial.models, prior)

    def strategies(self, states, rng=None):
        return self.weight_stream(states)[:-1] @ self._initial.models


class NoisyBayesAgent(Agent):
    """Two-model Bayesian with eta-noisy (trembling-hand) updates."""

    kind = "noisy_bayes"

    def __init__(self, theta_a, theta_b, eta, floor=DEFAULT_STRATEGY_FLOOR):
        self._initial = make_noisy_bayes_state(theta_a, theta_b, eta)
        super().__init__(2, floor)
        self.state = self._initial

    def reset(self, rng=None):
        super().reset(rng)
        self.state = self._initial

    def next_strategy(self, t: int) -> np.ndarray:
        return noisy_bayes_predict(self.state)

    def observe(self, state: int) -> None:
        if self._rng is None:
            raise InvalidInputError("noisy updates need a random stream; call reset(rng)")
        self.state = noisy_bayes_update(self.state, state, self._rng)

    def strategies(self, states, rng=None):
        if rng is None:
            raise InvalidInputError("noisy updates need a random stream")
        states = np.asarray(states, dtype=np.int64)
        signs = np.where(rng.random(states.size) < 0.5, 1.0, -1.0)
        z = _kernels.noisy_log_odds(
            states, self._initial.log_likelihood_ratio(), signs * self._initial.eta, 0.0
        )
        p_a = 1.0 / (1.0 + np.exp(-np.clip(z, -700.0, 700.0)))
        return np.outer(p_a, self._initial.theta_a) + np.outer(
            1.0 - p_a, self._initial.theta_b
        )


class UcbAgent(Agent):
    """Bandit over a finite model set, playing one model per step.

    Rewards are the realized log payoff of the played model, normalized
    into [0, 1] with the market floor Delta.
    """

    kind = "ucb"

    def __init__(self, models, delta, floor=DEFAULT_STRATEGY_FLOOR):
        models = np.asarray(models, dtype=np.float64)
        for k in range(models.shape[0]):
            as_simplex(models[k], floor=delta, name=f"model {k}")
        super().__init__(models.shape[1], floor)
        self.models = models
        self.rewards = normalized_rewards(models, delta)
        self.state = make_ucb_state(models.shape[0])
        self._pending_arm: int | None = None

    def reset(self, rng=None):
        super().reset(rng)
        self.state = make_ucb_state(self.models.shape[0])
        self._pending_arm = None

    def next_strategy(self, t: int) -> np.ndarray:
        self._pending_arm = ucb_choose(self.state)
        return self.models[self._pending_arm]

    def observe(self, state: int) -> None:
        arm = self._pending_arm if self._pending_arm is not None else ucb_choose(self.state)
        counts = self.state.counts
        means = self.state.means
        counts[arm] += 1.0
        means[arm] += (self.rewards[arm, state] - means[arm]) / counts[arm]
        self.state.step += 1
        self._pending_arm = None

    def choice_stream(self, states: np.ndarray) -> np.ndarray:
        return _kernels.ucb_choices(np.asarray(states, dtype=np.int64), self.rewards)

    def strategies(self, states, rng=None):
        return self.models[self.choice_stream(states)]


class OgdAgent(Agent):
    """Projected-gradient learner on the per-step log utility.

    Takes an ascent step of size step_scale/sqrt(t) on U^t at the
    current play, projects back onto the simplex, and clamps to the
    floor.  The floor participates in the dynamics, so it should be set
    well above zero when the step scale is large.
    """

    kind = "ogd"

    def __init__(self, alpha0, step_scale=0.1, n_states=None, floor=DEFAULT_STRATEGY_FLOOR):
        alpha0 = as_simplex(alpha0, n_states=n_states, name="alpha0")
        super().__init__(alpha0.size, floor)
        if alpha0.min() <= 0.0:
            raise InvalidInputError("starting point must be interior")
        self.alpha0 = alpha0
        self.step_scale = float(step_scale)
        self.alpha = alpha0.copy()
        self._t = 0

    def reset(self, rng=None):
        super().reset(rng)
        self.alpha = self.alpha0.copy()
        self._t = 0

    def next_strategy(self, t: int) -> np.ndarray:
        return self.alpha

    def observe(self, state: int) -> None:
        self._t += 1
        gradient = np.zeros(self.n_states)
        gradient[state] = -1.0 / self.alpha[state]  # gradient of -U^t
        self.alpha = ogd_step(
            self.alpha, gradient, self.step_scale / np.sqrt(self._t), self.floor
        )

    def strategies(self, states, rng=None):
        return _kernels.ogd_strategies(
            np.asarray(states, dtype=np.int64), self.alpha0, self.step_scale, self.floor
        )


class MagicAgent(Agent):
    """Hindsight oracle playing the eventual empirical distribution.

    Exempt from the measurability contract by construction; only the
    stream form is available because the strategy depends on the whole
    sequence.
    """

    kind = "magic"
    needs_full_sequence = True

    def __init__(self, n_states, floor=DEFAULT_STRATEGY_FLOOR):
        super().__init__(n_states, floor)

    def next_strategy(self, t: int) -> np.ndarray:
        raise UnsupportedConfigurationError(
            "the hindsight oracle needs the full sequence; use strategies()"
        )

    def strategies(self, states, rng=None):
        q_hat = empirical_distribution(states, self.n_states, floor=self.floor)
        return np.tile(q_hat, (np.asarray(states).size, 1))


def magic_strategy(states, n_states: int, floor: float = DEFAULT_STRATEGY_FLOOR) -> MagicAgent:
    """Oracle agent primed for a known sequence (validates it now)."""
    empirical_distribution(states, n_states)
    return MagicAgent(n_states, floor)


# ---------------------------------------------------------------------------
# declarative specs


@dataclass
class AgentSpec:
    """Serializable description of an agent.

    kind-specific fields: ``alpha`` (fixed), ``models`` and optional
    ``prior`` (bayes / robust_bayes / ucb), ``theta_a``/``theta_b`` and
    ``eta`` (noisy_bayes), ``alpha0`` and ``step_scale`` (ogd).  ``floor``
    overrides the market-wide strategy floor for this agent.
    """

    kind: str
    name: str | None = None
    alpha: list = None
    models: list = None
    prior: list = None
    theta_a: list = None
    theta_b: list = None
    eta: float = None
    alpha0: list = None
    step_scale: float = None
    floor: float = None

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for key in (
            "name", "alpha", "models", "prior", "theta_a", "theta_b",
            "eta", "alpha0", "step_scale", "floor",
        ):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "AgentSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown agent fields: {sorted(unknown)}")
        if "kind" not in data:
            raise InvalidInputError("agent spec needs a 'kind'")
        return cls(**data)


def build_agent(
    spec: AgentSpec,
    n_states: int,
    delta: float,
    default_floor: float = DEFAULT_STRATEGY_FLOOR,
) -> Agent:
    """Instantiate the agent described by ``spec`` for an S-state market."""
    floor = default_floor if spec.floor is None else float(spec.floor)
    kind = spec.kind
    if kind == "fixed":
        return FixedAgent(spec.alpha, n_states=n_states, floor=floor)
    if kind == "bayes":
        return BayesAgent(spec.models, spec.prior, delta=delta, floor=floor)
    if kind == "robust_bayes":
        return RobustBayesAgent(spec.models, spec.prior, delta=delta, floor=floor)
    if kind == "noisy_bayes":
        eta = 0.0 if spec.eta is None else spec.eta
        return NoisyBayesAgent(spec.theta_a, spec.theta_b, eta, floor=floor)
    if kind == "ucb":
        return UcbAgent(spec.models, delta=delta, floor=floor)
    if kind == "ogd":
        alpha0 = spec.alpha0
        if alpha0 is None:
            alpha0 = [1.0 / n_states] * n_states
        step_scale = 0.1 if spec.step_scale is None else spec.step_scale
        return OgdAgent(alpha0, step_scale=step_scale, n_states=n_states, floor=floor)
    if kind == "magic":
        return MagicAgent(n_states, floor=floor)
    raise InvalidInputError(f"unknown agent kind {kind!r}; expected one of {AGENT_KINDS}")
