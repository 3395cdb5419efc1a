"""Market mechanics: state sampling, price clearing, wealth evolution.

One unit of asset s pays one unit of wealth when state s is realized.
With every agent investing fractions alpha of its wealth, the clearing
price of asset s is the wealth-weighted average investment, and the
post-state wealth of agent n is alpha_n[s] w_n / p[s].  Prices cancel
out of wealth *ratios*, so the runner accounts in log space: the wealth
share of agent n after t steps is the softmax, over agents, of
log w_0 plus the running sum of realized log strategy weights.  This is
exact and survives 10^6-step horizons that underflow in linear space.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .agents import Agent, AgentSpec, build_agent, DEFAULT_STRATEGY_FLOOR
from .errors import DegenerateMarketError, InvalidInputError
from .rng import substream
from .shift import ShiftSchedule, generate_shifted_states
from .simplex import as_simplex, clamp_rows_to_floor, softmax_rows

log = logging.getLogger(__name__)

__all__ = [
    "MarketConfig",
    "MarketSnapshot",
    "RunRecord",
    "sample_state",
    "sample_states",
    "clearing_prices",
    "update_wealths",
    "log_wealth_ratio",
    "run_market",
]


def sample_state(q: np.ndarray, rng: np.random.Generator) -> int:
    """Draw one state from q, consuming exactly one uniform draw.

    Inverse-CDF over states in index order, so results are reproducible
    across platforms and identical to the vectorized form.
    """
    q = as_simplex(q, name="q")
    if q.min() <= 0.0:
        raise InvalidInputError("q must have full support")
    cdf = np.cumsum(q)
    u = rng.random()
    return int(min(np.searchsorted(cdf, u, side="right"), q.size - 1))


def sample_states(q: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized i.i.d. sampling; draw-for-draw equal to sample_state."""
    q = as_simplex(q, name="q")
    if q.min() <= 0.0:
        raise InvalidInputError("q must have full support")
    cdf = np.cumsum(q)
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), q.size - 1).astype(np.int64)


def clearing_prices(strategies: np.ndarray, wealths: np.ndarray) -> np.ndarray:
    """Market-clearing prices p_s = sum_n alpha_n[s] w_n."""
    strategies = np.asarray(strategies, dtype=np.float64)
    wealths = np.asarray(wealths, dtype=np.float64)
    if strategies.ndim != 2 or strategies.shape[0] != wealths.shape[0]:
        raise InvalidInputError("need one strategy row per agent")
    if abs(wealths.sum() - 1.0) > 1e-9 or np.any(wealths < 0.0):
        raise InvalidInputError("wealths must be nonnegative and sum to 1")
    return wealths @ strategies


def update_wealths(
    strategies: np.ndarray,
    wealths: np.ndarray,
    prices: np.ndarray,
    realized_state: int,
) -> np.ndarray:
    """Post-state wealths alpha_n[s] w_n / p_s.

    Conserves total wealth exactly when prices clear these strategies
    and wealths.  An agent holding nothing of the realized asset ends
    with zero wealth.
    """
    strategies = np.asarray(strategies, dtype=np.float64)
    wealths = np.asarray(wealths, dtype=np.float64)
    price = float(np.asarray(prices, dtype=np.float64)[realized_state])
    if price <= 0.0:
        raise DegenerateMarketError(
            f"no aggregate demand for realized state {realized_state}"
        )
    return strategies[:, realized_state] * wealths / price


def log_wealth_ratio(
    strategies_n: np.ndarray,
    strategies_m: np.ndarray,
    states: np.ndarray,
    r0: float = 1.0,
) -> float:
    """log of the terminal wealth ratio of agent n over agent m.

    Prices cancel, leaving sum_t log(alpha_n[s_t] / alpha_m[s_t]) plus
    log r0.  Returns -inf when agent n puts zero weight on a realized
    state (it vanishes), +inf when agent m does.
    """
    sn = np.asarray(strategies_n, dtype=np.float64)
    sm = np.asarray(strategies_m, dtype=np.float64)
    states = np.asarray(states, dtype=np.int64)
    if sn.shape != sm.shape or sn.shape[0] != states.size:
        raise InvalidInputError("histories must have equal length")
    steps = np.arange(states.size)
    an = sn[steps, states]
    am = sm[steps, states]
    n_zero = bool(np.any(an == 0.0))
    m_zero = bool(np.any(am == 0.0))
    if n_zero and m_zero:
        raise InvalidInputError("both agents vanish on this history")
    if n_zero:
        return float("-inf")
    if m_zero:
        return float("inf")
    return float(np.sum(np.log(an) - np.log(am)) + np.log(r0))


@dataclass
class MarketConfig:
    """Complete description of one simulated market run.

    Exactly one of ``q`` (stationary generator) or ``schedule``
    (piecewise-stationary generator) must be given.  ``delta`` is the
    full-support floor every generator distribution and agent model must
    respect.  ``strategy_floor`` is the emission floor applied to agent
    strategies (clamp events are counted per agent in the run record).
    """

    n_states: int
    horizon: int
    agents: list
    delta: float = 0.01
    q: list | np.ndarray | None = None
    schedule: ShiftSchedule | None = None
    initial_wealths: list | np.ndarray | None = None
    seed: int = 0
    strategy_floor: float = DEFAULT_STRATEGY_FLOOR

    def validated_q(self) -> np.ndarray | None:
        if self.q is None:
            return None
        return as_simplex(self.q, n_states=self.n_states, floor=self.delta, name="q")

    def validated_initial_wealths(self) -> np.ndarray:
        n_agents = len(self.agents)
        if self.initial_wealths is None:
            return np.full(n_agents, 1.0 / n_agents)
        w0 = np.asarray(self.initial_wealths, dtype=np.float64)
        if w0.shape != (n_agents,):
            raise InvalidInputError("need one initial wealth per agent")
        if np.any(w0 <= 0.0) or abs(w0.sum() - 1.0) > 1e-12:
            raise InvalidInputError("initial wealths must be positive and sum to 1")
        return w0

    def validate(self) -> None:
        if self.n_states < 2:
            raise InvalidInputError("need at least two states")
        if self.horizon < 1:
            raise InvalidInputError("horizon must be positive")
        if not (0.0 < self.delta < 1.0 / self.n_states):
            raise InvalidInputError("delta must lie in (0, 1/S)")
        if (self.q is None) == (self.schedule is None):
            raise InvalidInputError("exactly one of q or schedule must be set")
        if not self.agents:
            raise InvalidInputError("need at least one agent")
        self.validated_q()
        if self.schedule is not None:
            self.schedule.validate(self.n_states, self.delta)
            if self.schedule.total_duration() != self.horizon:
                raise InvalidInputError("schedule durations must sum to the horizon")
        self.validated_initial_wealths()


@dataclass
class MarketSnapshot:
    """State of the market at one step: the strategies played, the
    clearing prices, the realized state, and the post-settlement wealths."""

    t: int
    strategies: np.ndarray
    prices: np.ndarray
    realized_state: int
    wealths: np.ndarray


@dataclass
class RunRecord:
    """Full trace of one run.

    ``wealth_path[0]`` holds the initial wealths; ``wealth_path[t + 1]``
    the wealths after step t settles.  ``strategies[n, t]`` is the
    vector agent n actually played (after floor clamping) at step t.
    """

    config: MarketConfig
    states: np.ndarray
    strategies: np.ndarray
    prices: np.ndarray
    wealth_path: np.ndarray
    terminal_log_wealths: np.ndarray  # log shares; finite even when w underflows
    clamp_counts: np.ndarray
    agent_kinds: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.states.size

    @property
    def n_agents(self) -> int:
        return self.strategies.shape[0]

    def terminal_wealths(self) -> np.ndarray:
        return self.wealth_path[-1]

    def realized_log_strategies(self) -> np.ndarray:
        """(N, T) log of each agent's weight on the realized states."""
        steps = np.arange(self.horizon)
        with np.errstate(divide="ignore"):
            return np.log(self.strategies[:, steps, self.states])

    def cumulative_utilities(self) -> np.ndarray:
        """Per-agent sum of realized log payoff weights, in nats."""
        return self.realized_log_strategies().sum(axis=1)

    def snapshot(self, t: int) -> MarketSnapshot:
        return MarketSnapshot(
            t=t,
            strategies=self.strategies[:, t, :],
            prices=self.prices[t],
            realized_state=int(self.states[t]),
            wealths=self.wealth_path[t + 1],
        )

    def to_csv(self) -> str:
        """Serialize the trace; one row per step, shortest round-trip floats.

        Columns: t, realized_state, wealth per agent (post-settlement),
        then strategy weight per agent x state.
        """
        n_agents, horizon, n_states = self.strategies.shape
        header = ["t", "realized_state"]
        header += [f"wealth_{n}" for n in range(n_agents)]
        header += [
            f"strategy_{n}_{s}" for n in range(n_agents) for s in range(n_states)
        ]
        lines = [",".join(header)]
        for t in range(horizon):
            row = [str(t), str(int(self.states[t]))]
            row += [repr(float(w)) for w in self.wealth_path[t + 1]]
            row += [
                repr(float(self.strategies[n, t, s]))
                for n in range(n_agents)
                for s in range(n_states)
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def generate_states(config: MarketConfig) -> np.ndarray:
    """The run's state sequence, drawn from the 'states' substream."""
    rng = substream(config.seed, "states")
    if config.schedule is not None:
        return generate_shifted_states(config.schedule, rng)
    return sample_states(config.validated_q(), config.horizon, rng)


def _agent_instances(config: MarketConfig) -> list[Agent]:
    agents = []
    for i, spec in enumerate(config.agents):
        if isinstance(spec, Agent):
            agents.append(spec)
        elif isinstance(spec, AgentSpec):
            agents.append(
                build_agent(spec, config.n_states, config.delta, config.strategy_floor)
            )
        else:
            raise InvalidInputError(f"agent {i} is neither an Agent nor an AgentSpec")
    return agents


def run_market(config: MarketConfig, record_prices: bool = True) -> RunRecord:
    """Execute one run: deterministic in the config (seed included).

    Each agent sees only the realized-state prefix when emitting its
    step-t strategy; the hindsight oracle is the one sanctioned
    exception.  Raises DegenerateMarketError (with the step index) if
    the realized asset has zero aggregate demand.
    """
    config.validate()
    states = generate_states(config)
    agents = _agent_instances(config)
    n_agents = len(agents)
    horizon = states.size

    strategies = np.empty((n_agents, horizon, config.n_states), dtype=np.float64)
    clamp_counts = np.zeros(n_agents, dtype=np.int64)
    for i, agent in enumerate(agents):
        rng = substream(config.seed, f"agent:{i}")
        try:
            stream = agent.strategies(states, rng)
        except Exception as exc:
            raise type(exc)(f"agent {i} ({agent.kind}): {exc}") from exc
        stream, n_clamped = clamp_rows_to_floor(stream, agent.floor)
        clamp_counts[i] = n_clamped
        if n_clamped:
            log.debug(
                "clamped %d emissions of agent %d (%s) to floor %g",
                n_clamped, i, agent.kind, agent.floor,
            )
        strategies[i] = stream

    w0 = config.validated_initial_wealths()
    steps = np.arange(horizon)
    with np.errstate(divide="ignore"):
        realized_la = np.log(strategies[:, steps, states])  # (N, T)
        log_w0 = np.log(w0)
    cumulative = np.cumsum(realized_la, axis=1).T  # (T, N)
    log_path = np.vstack([np.zeros(n_agents), cumulative]) + log_w0
    wealth_path = softmax_rows(log_path)  # (T+1, N)
    final = log_path[-1]
    terminal_log = final - (final.max() + np.log(np.exp(final - final.max()).sum()))

    if record_prices:
        prices = np.einsum("tn,nts->ts", wealth_path[:-1], strategies)
        realized_prices = prices[steps, states]
    else:
        prices = np.empty((0, config.n_states))
        pre = wealth_path[:-1]
        realized_prices = np.einsum("tn,nt->t", pre, strategies[:, steps, states])
    dead = np.nonzero(realized_prices <= 0.0)[0]
    if dead.size:
        raise DegenerateMarketError(
            f"all agents assigned zero weight to the realized state at step {dead[0]}"
        )

    return RunRecord(
        config=config,
        states=states,
        strategies=strategies,
        prices=prices,
        wealth_path=wealth_path,
        terminal_log_wealths=terminal_log,
        clamp_counts=clamp_counts,
        agent_kinds=[a.kind for a in agents],
    )
