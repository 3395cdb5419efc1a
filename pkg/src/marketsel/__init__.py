"""Deterministic complete-asset-market simulator with heterogeneous
learning agents, plus a regret and survival analysis toolkit."""

from .agents import (
    AgentSpec,
    BayesAgent,
    FixedAgent,
    MagicAgent,
    NoisyBayesAgent,
    OgdAgent,
    RobustBayesAgent,
    UcbAgent,
    bayes_predict,
    bayes_update,
    build_agent,
    empirical_distribution,
    fixed_strategy,
    magic_strategy,
    make_bayes_state,
    make_noisy_bayes_state,
    make_ucb_state,
    noisy_bayes_predict,
    noisy_bayes_update,
    ogd_step,
    robust_bayes_update,
    ucb_step,
)
from .errors import (
    DegenerateMarketError,
    InvalidInputError,
    MarketSelError,
    SchemaError,
    UnsupportedConfigurationError,
)
from .market import (
    MarketConfig,
    MarketSnapshot,
    RunRecord,
    clearing_prices,
    log_wealth_ratio,
    run_market,
    sample_state,
    sample_states,
    update_wealths,
)
from .regret import (
    RegretLedger,
    build_ledger,
    classify_survival,
    fit_power_law,
    hindsight_best,
    regret,
    step_utility,
    survival_time,
)
from .shift import (
    ShiftSchedule,
    generate_shifted_states,
    interval_benchmark,
    shifted_regret,
)
from .simplex import relative_entropy, total_variation

__version__ = "0.1.0"
