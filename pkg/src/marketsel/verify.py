"""Acceptance checks: every claim the package is expected to reproduce,
runnable at two levels.

``full`` runs each check at its declared scale and tolerance; ``fast``
shrinks seed counts and horizons (loosened parameters are part of each
check's declaration below, not ad-hoc).  Checks print one line each and
are independent: any subset can be run by name.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .agents import BayesAgent
from .catalog import builtin_scenarios, builtin_sweeps, evaluate_checks, run_sweep
from .errors import InvalidInputError
from .experiments import run_scenario, to_json
from .market import generate_states
from .regret import hindsight_best, regret
from .rng import run_seed, substream
from .simplex import relative_entropy

__all__ = ["CheckResult", "run_checks", "CHECK_NAMES"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _sample_states_for(config, seed: int) -> np.ndarray:
    return generate_states(replace(config, seed=seed))


def _mean_constant_regret(q, alpha, horizon, n_seeds, base_seed) -> float:
    """Mean hindsight regret of a constant strategy over fresh seeds."""
    q = np.asarray(q, dtype=np.float64)
    log_alpha = np.log(np.asarray(alpha, dtype=np.float64))
    cdf = np.cumsum(q)
    total = 0.0
    for i in range(n_seeds):
        rng = substream(run_seed(base_seed, i), "states")
        states = np.minimum(
            np.searchsorted(cdf, rng.random(horizon), side="right"), q.size - 1
        )
        total += regret(log_alpha[states], states)
    return total / n_seeds


# ---------------------------------------------------------------------------
# regret of constant strategies


def check_constant_regret_of_q(params, n_workers=1) -> CheckResult:
    q = (0.7, 0.3)
    m1 = _mean_constant_regret(q, q, params["horizon"], params["n_seeds"], 101_000)
    m2 = _mean_constant_regret(q, q, 4 * params["horizon"], params["n_seeds"], 102_000)
    lo, hi = params["window"]
    passed = lo <= m1 <= hi and abs(m2 - m1) < params["constancy"]
    detail = (
        f"mean regret {m1:.4f} at T={params['horizon']} (window [{lo}, {hi}]), "
        f"{m2:.4f} at T={4 * params['horizon']}, drift {abs(m2 - m1):.4f} "
        f"(need < {params['constancy']})"
    )
    return CheckResult("constant_regret_of_q", passed, detail)


def check_constant_strategy_regret_formula(params, n_workers=1) -> CheckResult:
    q = (0.75, 0.25)
    alpha = (0.5, 0.5)
    horizon = params["horizon"]
    divergence = relative_entropy(q, alpha)
    target = horizon * divergence + 0.5
    mean = _mean_constant_regret(q, alpha, horizon, params["n_seeds"], 103_000)
    rel = abs(mean - target) / target
    passed = rel <= params["rel_tol"]
    detail = (
        f"mean regret {mean:.2f} vs T*I+R = {target:.2f} "
        f"(I={divergence:.6f}); relative error {rel:.3%} "
        f"(need <= {params['rel_tol']:.0%})"
    )
    return CheckResult("constant_strategy_regret_formula", passed, detail)


# ---------------------------------------------------------------------------
# regret-wealth identity across the catalog


def check_regret_wealth_identity(params, n_workers=1) -> CheckResult:
    worst = 0.0
    worst_name = "all scenarios"
    for name, scenario in builtin_scenarios().items():
        result = run_scenario(
            scenario,
            horizon=params["horizon"],
            n_seeds=params["n_seeds"],
            n_workers=n_workers,
        )
        if result.identity_residual_max > worst:
            worst = result.identity_residual_max
            worst_name = name
    passed = worst < 1e-6
    detail = f"max |R^n - R^m + log r_T - log r_0| = {worst:.3e} ({worst_name}); need < 1e-6"
    return CheckResult("regret_wealth_identity", passed, detail)


# ---------------------------------------------------------------------------
# hindsight benchmark vs grid brute force


def _simplex_grid_values(counts: np.ndarray, grid_log: np.ndarray) -> float:
    observed = counts > 0
    with np.errstate(invalid="ignore"):
        values = grid_log[:, observed] @ counts[observed]
    return float(np.nanmax(values))


def check_hindsight_bruteforce(params, n_workers=1) -> CheckResult:
    step = 1e-3
    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 9)
    with np.errstate(divide="ignore"):
        grid2 = np.stack([ticks, 1.0 - ticks], axis=1)
        grid2_log = np.log(grid2)
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        keep = a + b <= 1.0 + 1e-12
        grid3 = np.stack([a[keep], b[keep], 1.0 - a[keep] - b[keep]], axis=1)
        grid3[:, 2] = np.maximum(grid3[:, 2], 0.0)
        grid3_log = np.log(grid3)
    rng = np.random.default_rng(104_000)
    overshoot = 0.0
    slack = 0.0
    for i in range(params["n_sequences"]):
        n_states = 2 if i % 2 == 0 else 3
        horizon = int(rng.integers(1, 13))
        states = rng.integers(0, n_states, size=horizon)
        counts = np.bincount(states, minlength=n_states).astype(np.float64)
        q_hat, closed = hindsight_best(states, n_states)
        grid_log = grid2_log if n_states == 2 else grid3_log
        grid_best = _simplex_grid_values(counts, grid_log)
        observed = counts > 0
        bound = float(
            np.sum(counts[observed] * np.log(q_hat[observed] / (q_hat[observed] - step)))
        )
        overshoot = max(overshoot, grid_best - closed)
        slack = max(slack, closed - grid_best - bound)
    passed = overshoot <= 1e-9 and slack <= 0.0
    detail = (
        f"{params['n_sequences']} sequences: max grid overshoot {overshoot:.2e} "
        f"(need <= 1e-9), max slack beyond discretization bound {slack:.2e} (need <= 0)"
    )
    return CheckResult("hindsight_bruteforce", passed, detail)


# ---------------------------------------------------------------------------
# posterior log-odds drift of the accurate Bayesian


def check_bayes_convergence_rate(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["fig2c"]
    config = scenario.config_for(params["horizon"])
    models = np.asarray(config.agents[0].models, dtype=np.float64)
    q = np.asarray(config.q, dtype=np.float64)
    divergences = np.array([relative_entropy(q, m) for m in models])
    true_index = int(np.argmin(divergences))
    agent = BayesAgent(models, delta=config.delta)
    horizon = config.horizon
    slopes = np.zeros(models.shape[0])
    for i in range(params["n_seeds"]):
        states = _sample_states_for(config, run_seed(scenario.base_seed, i))
        lw = agent.log_weight_stream(states)
        odds = (lw[-1] - lw[-1, true_index]) - (lw[0] - lw[0, true_index])
        slopes += odds / horizon
    slopes /= params["n_seeds"]
    rel_errors = {}
    passed = True
    for k in range(models.shape[0]):
        if k == true_index:
            continue
        rel = abs(slopes[k] + divergences[k]) / divergences[k]
        rel_errors[f"model{k}"] = rel
        passed = passed and rel <= 0.10
    detail = ", ".join(
        f"{name}: slope err {rel:.2%}" for name, rel in rel_errors.items()
    )
    return CheckResult(
        "bayes_convergence_rate", passed, detail + " (need <= 10% each)"
    )


# ---------------------------------------------------------------------------
# who takes over the market


def check_bayes_beats_ucb(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["fig2c"]
    result = run_scenario(
        scenario,
        horizon=params["horizon"],
        n_seeds=params["n_seeds"],
        n_workers=n_workers,
    )
    checks = evaluate_checks(scenario, result)
    frac = float((result.terminal_wealths[:, 0] > 0.9).mean())
    passed = frac >= 0.95
    return CheckResult(
        "bayes_beats_ucb",
        passed,
        f"bayes terminal wealth > 0.9 in {frac:.1%} of {result.n_seeds} seeds "
        f"(need >= 95%); {checks[0]['detail']}",
    )


def check_inaccurate_bayes_vs_ucb(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["fig1"]
    result = run_scenario(
        scenario,
        horizon=params["horizon"],
        n_seeds=params["n_seeds"],
        n_workers=n_workers,
    )
    ucb_mean = float(result.terminal_wealths[:, 1].mean())
    early = float(result.early_half_fraction[:, 0].mean())
    passed = ucb_mean > 0.9 and early >= 0.30
    detail = (
        f"ucb mean terminal wealth {ucb_mean:.4f} (need > 0.9); bayes wealth above "
        f"1/2 in {early:.1%} of early (seed, step) samples (need >= 30%)"
    )
    return CheckResult("inaccurate_bayes_vs_ucb", passed, detail)


# ---------------------------------------------------------------------------
# survival-time scaling sweeps


def _sweep_check(name: str, params, n_workers) -> CheckResult:
    sweep = builtin_sweeps()[name]
    result = run_sweep(sweep, n_seeds=params["n_seeds"], n_workers=n_workers)
    taus = ", ".join(
        f"eps={p['eps']:g}: tau={p['tau']}{'(censored)' if p['censored'] else ''}"
        for p in result.points
    )
    if result.fit is None:
        return CheckResult(
            f"survival_scaling_{name}", False, f"fit unavailable ({taus})"
        )
    slope = result.fit["slope"]
    lo, hi = sweep.slope_window
    detail = (
        f"slope {slope:.3f} (window [{lo}, {hi}], target {sweep.target_slope}); "
        f"R^2 {result.fit['r_squared']:.3f}; {taus}"
    )
    return CheckResult(f"survival_scaling_{name}", lo <= slope <= hi, detail)


def check_survival_scaling_obs1(params, n_workers=1) -> CheckResult:
    return _sweep_check("obs1", params, n_workers)


def check_survival_scaling_obs2(params, n_workers=1) -> CheckResult:
    return _sweep_check("obs2", params, n_workers)


def check_survival_scaling_obs3(params, n_workers=1) -> CheckResult:
    return _sweep_check("obs3", params, n_workers)


# ---------------------------------------------------------------------------
# noisy updates never settle


def check_noisy_nonconvergence(params, n_workers=1) -> CheckResult:
    scenarios = builtin_scenarios()
    details = []
    passed = True
    for name in ("noisy_005", "noisy_010"):
        scenario = scenarios[name]
        result = run_scenario(
            scenario,
            horizon=params["horizon"],
            n_seeds=params["n_seeds"],
            n_workers=n_workers,
        )
        ratios = result.strategy_var_last[:, 0] / np.maximum(
            result.strategy_var_first[:, 0], 1e-300
        )
        times = result.regret_checkpoints
        idx_full = int(np.nonzero(times == result.horizon)[0][0])
        idx_fifth = int(np.nonzero(times == result.horizon // 5)[0][0])
        r_full = result.regret_curve[:, 0, idx_full]
        r_fifth = result.regret_curve[:, 0, idx_fifth]
        per_seed = (ratios >= 0.25) & (r_full >= 5.0 * r_fifth - params["slack_nats"])
        frac = float(per_seed.mean())
        ok = frac >= params["fraction"]
        passed = passed and ok
        details.append(
            f"{name}: variance kept and regret grew in {frac:.0%} of seeds "
            f"(need >= {params['fraction']:.0%}); mean regret "
            f"{r_fifth.mean():.1f}@T/5 -> {r_full.mean():.1f}@T"
        )
    return CheckResult("noisy_nonconvergence", passed, "; ".join(details))


# ---------------------------------------------------------------------------
# distribution shift


def check_prop7_linear_regret(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["prop7"]
    result = run_scenario(
        scenario,
        horizon=params["horizon"],
        n_seeds=params["n_seeds"],
        n_workers=n_workers,
    )
    rates = result.shifted_regrets[:, 0] / result.horizon
    frac = float((rates >= 1.0 / 23.0).mean())
    passed = frac >= 0.90
    detail = (
        f"shifted regret per step >= 1/23 in {frac:.0%} of seeds at T={result.horizon} "
        f"(mean rate {rates.mean():.4f}; need >= 90%)"
    )
    return CheckResult("prop7_linear_regret", passed, detail)


def check_thm8_log_regret(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["thm8_shift"]
    horizons = params["horizons"]
    means = []
    for horizon in horizons:
        result = run_scenario(
            scenario,
            horizon=horizon,
            n_seeds=params["n_seeds"],
            n_workers=n_workers,
        )
        means.append(float(result.shifted_regrets[:, 0].mean()))
    x = np.log(np.asarray(horizons, dtype=np.float64))
    y = np.asarray(means)
    b, a = np.polyfit(x, y, 1)
    fitted = a + b * x
    rel_residual = float(np.max(np.abs(fitted - y) / np.abs(y)))
    passed = rel_residual < 0.20 and 0.0 < b < params["b_max"]
    detail = (
        f"mean shifted regret {', '.join(f'{m:.2f}@{h}' for m, h in zip(means, horizons))}; "
        f"fit a + b lnT with b={b:.3f} (need 0 < b < {params['b_max']}), "
        f"max relative residual {rel_residual:.1%} (need < 20%)"
    )
    return CheckResult("thm8_log_regret", passed, detail)


def check_thm8_stationary_constant(params, n_workers=1) -> CheckResult:
    scenario = builtin_scenarios()["thm8_stationary"]
    result = run_scenario(
        scenario,
        horizon=params["horizon"],
        n_seeds=params["n_seeds"],
        n_workers=n_workers,
    )
    times = result.regret_checkpoints
    idx_full = int(np.nonzero(times == result.horizon)[0][0])
    idx_early = int(np.nonzero(times == params["early_checkpoint"])[0][0])
    growth = result.regret_curve[:, 0, idx_full] - result.regret_curve[:, 0, idx_early]
    frac = float((growth < 1.0).mean())
    passed = frac >= params["fraction"]
    detail = (
        f"regret growth from t={params['early_checkpoint']} to T={result.horizon} "
        f"below 1 nat in {frac:.0%} of seeds (need >= {params['fraction']:.0%}); "
        f"mean growth {growth.mean():.3f}"
    )
    return CheckResult("thm8_stationary_constant", passed, detail)


# ---------------------------------------------------------------------------
# exact posterior floor of the regularized update


def check_robust_floor(params, n_workers=1) -> CheckResult:
    scenarios = builtin_scenarios()
    worst = np.inf
    for name in ("thm8_stationary", "thm8_shift", "thm8_shift4"):
        result = run_scenario(
            scenarios[name],
            horizon=params["horizon"],
            n_seeds=params["n_seeds"],
            n_workers=n_workers,
        )
        worst = min(worst, float(result.robust_floor_margins.min()))
    passed = worst >= -1e-15
    detail = f"worst slack of min_k weight over eps_t/(1+K eps_t): {worst:.3e} (need >= -1e-15)"
    return CheckResult("robust_floor", passed, detail)


# ---------------------------------------------------------------------------
# conservation and byte determinism


def check_conservation_determinism(params, n_workers=1) -> CheckResult:
    worst = 0.0
    mismatches = []
    for name, scenario in builtin_scenarios().items():
        first = run_scenario(
            scenario,
            horizon=params["horizon"],
            n_seeds=params["n_seeds"],
            extra_outputs=("prices",),
            keep_first_record=True,
        )
        second = run_scenario(
            scenario,
            horizon=params["horizon"],
            n_seeds=params["n_seeds"],
            extra_outputs=("prices",),
            keep_first_record=True,
        )
        worst = max(worst, first.conservation_residual_max)
        same_summary = to_json(first.summary_document()) == to_json(
            second.summary_document()
        )
        same_trace = first.first_record.to_csv() == second.first_record.to_csv()
        if not (same_summary and same_trace):
            mismatches.append(name)
    passed = worst < 1e-9 and not mismatches
    detail = (
        f"max conservation residual {worst:.3e} (need < 1e-9); "
        f"byte mismatches: {mismatches or 'none'}"
    )
    return CheckResult("conservation_determinism", passed, detail)


# ---------------------------------------------------------------------------
# registry


_CRITERIA = [
    (
        "constant_regret_of_q",
        check_constant_regret_of_q,
        {"full": {"horizon": 10_000, "n_seeds": 500, "window": (0.35, 0.65), "constancy": 0.1},
         "fast": {"horizon": 4_000, "n_seeds": 400, "window": (0.35, 0.65), "constancy": 0.15}},
    ),
    (
        "constant_strategy_regret_formula",
        check_constant_strategy_regret_formula,
        {"full": {"horizon": 10_000, "n_seeds": 500, "rel_tol": 0.05},
         "fast": {"horizon": 4_000, "n_seeds": 150, "rel_tol": 0.05}},
    ),
    (
        "regret_wealth_identity",
        check_regret_wealth_identity,
        {"full": {"horizon": 20_000, "n_seeds": 10},
         "fast": {"horizon": 5_000, "n_seeds": 4}},
    ),
    (
        "hindsight_bruteforce",
        check_hindsight_bruteforce,
        {"full": {"n_sequences": 1_000}, "fast": {"n_sequences": 200}},
    ),
    (
        "bayes_convergence_rate",
        check_bayes_convergence_rate,
        {"full": {"horizon": 100_000, "n_seeds": 50},
         "fast": {"horizon": 30_000, "n_seeds": 20}},
    ),
    (
        "bayes_beats_ucb",
        check_bayes_beats_ucb,
        {"full": {"horizon": 100_000, "n_seeds": 50},
         "fast": {"horizon": 40_000, "n_seeds": 15}},
    ),
    (
        "inaccurate_bayes_vs_ucb",
        check_inaccurate_bayes_vs_ucb,
        {"full": {"horizon": 100_000, "n_seeds": 20},
         "fast": {"horizon": 100_000, "n_seeds": 8}},
    ),
    (
        "survival_scaling_obs1",
        check_survival_scaling_obs1,
        {"full": {"n_seeds": 100}, "fast": {"n_seeds": 30}},
    ),
    (
        "survival_scaling_obs2",
        check_survival_scaling_obs2,
        {"full": {"n_seeds": 100}, "fast": {"n_seeds": 30}},
    ),
    (
        "survival_scaling_obs3",
        check_survival_scaling_obs3,
        {"full": {"n_seeds": 100}, "fast": {"n_seeds": 30}},
    ),
    (
        "noisy_nonconvergence",
        check_noisy_nonconvergence,
        {"full": {"horizon": 100_000, "n_seeds": 50, "fraction": 0.90, "slack_nats": 25.0},
         "fast": {"horizon": 50_000, "n_seeds": 20, "fraction": 0.85, "slack_nats": 25.0}},
    ),
    (
        "prop7_linear_regret",
        check_prop7_linear_regret,
        {"full": {"horizon": 90_000, "n_seeds": 50},
         "fast": {"horizon": 30_000, "n_seeds": 15}},
    ),
    (
        "thm8_log_regret",
        check_thm8_log_regret,
        {"full": {"horizons": (10_000, 40_000, 160_000), "n_seeds": 50, "b_max": 10.0},
         "fast": {"horizons": (10_000, 40_000, 160_000), "n_seeds": 15, "b_max": 10.0}},
    ),
    (
        "thm8_stationary_constant",
        check_thm8_stationary_constant,
        {"full": {"horizon": 160_000, "n_seeds": 50, "early_checkpoint": 10_000, "fraction": 0.90},
         "fast": {"horizon": 40_000, "n_seeds": 20, "early_checkpoint": 10_000, "fraction": 0.85}},
    ),
    (
        "robust_floor",
        check_robust_floor,
        {"full": {"horizon": 40_000, "n_seeds": 25},
         "fast": {"horizon": 10_000, "n_seeds": 8}},
    ),
    (
        "conservation_determinism",
        check_conservation_determinism,
        {"full": {"horizon": 4_000, "n_seeds": 3},
         "fast": {"horizon": 2_000, "n_seeds": 2}},
    ),
]

CHECK_NAMES = [name for name, _, _ in _CRITERIA]


def run_checks(
    level: str = "full",
    names=None,
    n_workers: int = 1,
    report=None,
) -> list[CheckResult]:
    """Run acceptance checks; ``report`` (if given) is called with each
    result as it completes."""
    if level not in ("fast", "full"):
        raise InvalidInputError(f"unknown level {level!r}; expected fast or full")
    selected = set(names) if names else None
    if selected:
        unknown = selected - set(CHECK_NAMES)
        if unknown:
            raise InvalidInputError(f"unknown checks: {sorted(unknown)}")
    results = []
    for name, fn, param_sets in _CRITERIA:
        if selected and name not in selected:
            continue
        result = fn(param_sets[level], n_workers=n_workers)
        results.append(result)
        if report is not None:
            report(result)
    return results
