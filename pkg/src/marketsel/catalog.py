"""Built-in scenario and sweep catalog.

Desk-scale defaults: horizons of 10^4 to 1.6*10^5 and 20 to 100 seeds, so
that the whole catalog runs in minutes.  Full-scale settings (10^6-step
figures) are reachable through the horizon/seed overrides.

Scenario families:

* ``fig1`` — an inaccurate Bayesian (its best model is off the truth)
  against a UCB learner whose action set contains the truth.  Long run,
  the bandit takes over; early on the Bayesian holds its own.
* ``fig2a/fig2b/fig2c`` — accurate Bayesians and/or UCB learners with
  nested model sets over the same two-state market.
* ``prop7`` — a standard Bayesian under a single mid-run distribution
  flip; its regret against the interval benchmark grows linearly.
* ``thm8_*`` — the regularized Bayesian under zero, one, or three
  flips; regret stays constant (stationary) or logarithmic (shifts).
* ``noisy_*`` — trembling-hand Bayes updates; beliefs never settle.
* sweeps ``obs1/obs2/obs3`` — survival time of an inaccurate player,
  at total-variation error eps, against competitors with constant,
  logarithmic, and square-root regret growth; the fitted log-log slope
  of survival time against eps is the scaling exponent under test.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np

from .agents import AgentSpec
from .errors import InvalidInputError
from .experiments import Scenario, ScenarioResult, run_scenario
from .market import MarketConfig
from .regret import fit_power_law, survival_time
from .shift import ShiftSchedule

__all__ = [
    "builtin_scenarios",
    "builtin_sweeps",
    "Sweep",
    "SweepResult",
    "run_sweep",
    "evaluate_checks",
]

# Sweep geometry: two-state market with uniform truth, inaccurate player
# at total variation eps.  Uniform q makes the divergence of the tilted
# vector exactly 2 eps^2 + O(eps^4), the Pinsker-minimal value.
SWEEP_Q = (0.5, 0.5)
SWEEP_EPSILONS = (0.02, 0.04, 0.08, 0.16)

# Constant-regret competitor for obs1: a perfect Bayesian holding prior
# mass exp(-OBS1_HANDICAP) on the true model.  Its learning phase costs
# about OBS1_HANDICAP nats, which is the buffer the inaccurate player
# lives off; survival time is then handicap / (2 eps^2).
OBS1_HANDICAP = 10.0

_OBS2_HORIZONS = {0.02: 700_000, 0.04: 170_000, 0.08: 45_000, 0.16: 14_000}
_OBS3_HORIZONS = {0.02: 900_000, 0.04: 65_000, 0.08: 6_000, 0.16: 1_200}
_OBS3_STEP_SCALE = 0.5
_OBS3_FLOOR = 0.1
_OBS3_START = (0.9, 0.1)


def _tilted(eps: float) -> list:
    return [SWEEP_Q[0] - eps, SWEEP_Q[1] + eps]


def _two_block_schedule(horizon: int, p: float = 0.75) -> ShiftSchedule:
    t1 = (2 * horizon) // 3
    return ShiftSchedule([(t1, (p, 1.0 - p)), (horizon - t1, (1.0 - p, p))])


def _single_block_schedule(horizon: int, p: float = 0.75) -> ShiftSchedule:
    return ShiftSchedule([(horizon, (p, 1.0 - p))])


def _four_block_schedule(horizon: int, p: float = 0.75) -> ShiftSchedule:
    quarter = horizon // 4
    q1, q2 = (p, 1.0 - p), (1.0 - p, p)
    blocks = [(quarter, q1), (quarter, q2), (quarter, q1)]
    blocks.append((horizon - 3 * quarter, q2))
    return ShiftSchedule(blocks)


def builtin_scenarios() -> dict[str, Scenario]:
    """Catalog of named scenarios (fresh instances on every call)."""
    scenarios = {}

    fig_models = [[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]
    scenarios["fig1"] = Scenario(
        name="fig1",
        description=(
            "Inaccurate Bayesian (best model at KL 0.028 from truth) vs a UCB "
            "learner whose action set contains the true distribution."
        ),
        config=MarketConfig(
            n_states=2,
            horizon=100_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="bayes", models=[[0.8, 0.2], [0.9, 0.1], [0.3, 0.7]]),
                AgentSpec(kind="ucb", models=[[0.7, 0.3], [0.9, 0.1], [0.3, 0.7]]),
            ],
        ),
        n_seeds=20,
        base_seed=7_000,
        outputs=("mean_trajectory", "regret_curve", "early_half_fraction"),
        hist_range=(0.5, 1.0),
        checks=("fig1_ucb_takeover",),
    )

    scenarios["fig2a"] = Scenario(
        name="fig2a",
        description="Two accurate Bayesians; agent 2 carries one extra model.",
        config=MarketConfig(
            n_states=2,
            horizon=100_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="bayes", models=fig_models),
                AgentSpec(kind="bayes", models=fig_models + [[0.5, 0.5]]),
            ],
        ),
        n_seeds=20,
        base_seed=7_100,
        outputs=("mean_trajectory", "regret_curve"),
    )

    scenarios["fig2b"] = Scenario(
        name="fig2b",
        description="Two UCB learners with nested action sets.",
        config=MarketConfig(
            n_states=2,
            horizon=100_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="ucb", models=fig_models),
                AgentSpec(kind="ucb", models=fig_models + [[0.5, 0.5]]),
            ],
        ),
        n_seeds=20,
        base_seed=7_200,
        outputs=("mean_trajectory", "regret_curve"),
    )

    scenarios["fig2c"] = Scenario(
        name="fig2c",
        description="Accurate Bayesian vs UCB on the same model set.",
        config=MarketConfig(
            n_states=2,
            horizon=100_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="bayes", models=fig_models),
                AgentSpec(kind="ucb", models=fig_models),
            ],
        ),
        n_seeds=50,
        base_seed=7_300,
        outputs=("mean_trajectory", "regret_curve"),
        checks=("fig2c_bayes_takeover",),
    )

    prop7_models = [[0.75, 0.25], [0.25, 0.75]]
    scenarios["prop7"] = Scenario(
        name="prop7",
        description=(
            "Standard Bayesian over both phase distributions under a single "
            "shift at 2T/3; regret against the interval benchmark is linear."
        ),
        config=MarketConfig(
            n_states=2,
            horizon=90_000,
            delta=0.1,
            schedule=_two_block_schedule(90_000),
            agents=[AgentSpec(kind="bayes", models=prop7_models)],
        ),
        n_seeds=50,
        base_seed=7_400,
        outputs=("mean_trajectory", "shifted_regret", "regret_curve"),
        checks=("prop7_linear_regret",),
        schedule_builder=partial(_two_block_schedule),
    )

    scenarios["thm8_stationary"] = Scenario(
        name="thm8_stationary",
        description="Regularized Bayesian, no shifts; regret stays constant.",
        config=MarketConfig(
            n_states=2,
            horizon=160_000,
            delta=0.1,
            schedule=_single_block_schedule(160_000),
            agents=[AgentSpec(kind="robust_bayes", models=prop7_models)],
        ),
        n_seeds=50,
        base_seed=7_500,
        outputs=("shifted_regret", "regret_curve", "robust_floor"),
        checkpoints=(10_000,),
        checks=("robust_floor",),
        schedule_builder=partial(_single_block_schedule),
    )

    scenarios["thm8_shift"] = Scenario(
        name="thm8_shift",
        description="Regularized Bayesian under one shift at 2T/3.",
        config=MarketConfig(
            n_states=2,
            horizon=90_000,
            delta=0.1,
            schedule=_two_block_schedule(90_000),
            agents=[AgentSpec(kind="robust_bayes", models=prop7_models)],
        ),
        n_seeds=50,
        base_seed=7_600,
        outputs=("mean_trajectory", "shifted_regret", "regret_curve", "robust_floor"),
        checks=("robust_floor",),
        schedule_builder=partial(_two_block_schedule),
    )

    scenarios["thm8_shift4"] = Scenario(
        name="thm8_shift4",
        description="Regularized Bayesian under three shifts (four blocks).",
        config=MarketConfig(
            n_states=2,
            horizon=120_000,
            delta=0.1,
            schedule=_four_block_schedule(120_000),
            agents=[AgentSpec(kind="robust_bayes", models=prop7_models)],
        ),
        n_seeds=50,
        base_seed=7_700,
        outputs=("shifted_regret", "regret_curve", "robust_floor"),
        checks=("robust_floor",),
        schedule_builder=partial(_four_block_schedule),
    )

    for eta in (0.05, 0.1):
        name = f"noisy_{int(eta * 100):03d}"
        scenarios[name] = Scenario(
            name=name,
            description=(
                f"Trembling-hand Bayes updates with excess weight {eta}; the "
                "posterior keeps oscillating and regret grows linearly."
            ),
            config=MarketConfig(
                n_states=2,
                horizon=100_000,
                delta=0.1,
                q=[0.7, 0.3],
                agents=[
                    AgentSpec(
                        kind="noisy_bayes",
                        theta_a=[0.7, 0.3],
                        theta_b=[0.685, 0.315],
                        eta=eta,
                    )
                ],
            ),
            n_seeds=50,
            base_seed=7_800 + int(eta * 100),
            outputs=("strategy_variance", "regret_curve"),
            checks=("noisy_nonconvergence",),
        )

    return scenarios


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class Sweep:
    """An epsilon grid of survival-time scenarios plus a slope window."""

    name: str
    description: str
    epsilons: tuple
    n_seeds: int
    base_seed: int
    target_slope: float
    slope_window: tuple
    make_point: object  # callable eps -> Scenario

    def point(self, eps: float) -> Scenario:
        return self.make_point(eps)


@dataclass
class SweepResult:
    name: str
    points: list  # dicts: eps, tau, censored, horizon
    fit: dict | None
    target_slope: float
    slope_window: tuple

    @property
    def passed(self) -> bool:
        if self.fit is None:
            return False
        lo, hi = self.slope_window
        return lo <= self.fit["slope"] <= hi

    def summary_document(self) -> dict:
        return {
            "name": self.name,
            "points": self.points,
            "fit": self.fit,
            "target_slope": self.target_slope,
            "slope_window": list(self.slope_window),
            "passed": self.passed,
        }


def _obs1_point(eps: float, n_seeds: int, base_seed: int) -> Scenario:
    horizon = int(2.0 * OBS1_HANDICAP / (2.0 * eps * eps)) + 1_500
    lam_q = float(np.exp(-OBS1_HANDICAP))
    return Scenario(
        name=f"obs1_eps{eps:g}",
        description="Inaccurate fixed player vs perfect Bayesian with a handicapped prior.",
        config=MarketConfig(
            n_states=2,
            horizon=horizon,
            delta=0.1,
            q=list(SWEEP_Q),
            agents=[
                AgentSpec(kind="fixed", alpha=_tilted(eps)),
                AgentSpec(
                    kind="bayes",
                    models=[list(SWEEP_Q), [0.9, 0.1]],
                    prior=[lam_q, 1.0 - lam_q],
                ),
            ],
        ),
        n_seeds=n_seeds,
        base_seed=base_seed,
        outputs=("mean_trajectory",),
    )


def _obs2_point(eps: float, n_seeds: int, base_seed: int) -> Scenario:
    horizon = _OBS2_HORIZONS.get(eps) or max(int(2.8 / eps**2.4), 4_000)
    return Scenario(
        name=f"obs2_eps{eps:g}",
        description="Inaccurate fixed player vs UCB (logarithmic regret).",
        config=MarketConfig(
            n_states=2,
            horizon=horizon,
            delta=0.1,
            q=list(SWEEP_Q),
            agents=[
                AgentSpec(kind="fixed", alpha=_tilted(eps)),
                AgentSpec(kind="ucb", models=[[0.9, 0.1], list(SWEEP_Q)]),
            ],
        ),
        n_seeds=n_seeds,
        base_seed=base_seed,
        outputs=("mean_trajectory",),
    )


def _obs3_point(eps: float, n_seeds: int, base_seed: int) -> Scenario:
    horizon = _OBS3_HORIZONS.get(eps) or max(int(0.65 / eps**4), 2_500)
    return Scenario(
        name=f"obs3_eps{eps:g}",
        description="Inaccurate fixed player vs projected gradient (sqrt-T regret).",
        config=MarketConfig(
            n_states=2,
            horizon=horizon,
            delta=0.1,
            q=list(SWEEP_Q),
            agents=[
                AgentSpec(kind="fixed", alpha=_tilted(eps)),
                AgentSpec(
                    kind="ogd",
                    alpha0=list(_OBS3_START),
                    step_scale=_OBS3_STEP_SCALE,
                    floor=_OBS3_FLOOR,
                ),
            ],
        ),
        n_seeds=n_seeds,
        base_seed=base_seed,
        outputs=("mean_trajectory",),
    )


def builtin_sweeps() -> dict[str, Sweep]:
    return {
        "obs1": Sweep(
            name="obs1",
            description=(
                "Survival time vs a constant-regret competitor (perfect "
                "Bayesian with handicapped prior); expected exponent -2."
            ),
            epsilons=SWEEP_EPSILONS,
            n_seeds=100,
            base_seed=21_000,
            target_slope=-2.0,
            slope_window=(-2.5, -1.5),
            make_point=partial(_obs1_point, n_seeds=100, base_seed=21_000),
        ),
        "obs2": Sweep(
            name="obs2",
            description=(
                "Survival time vs a UCB competitor (logarithmic regret); "
                "expected exponent -3."
            ),
            epsilons=SWEEP_EPSILONS,
            n_seeds=100,
            base_seed=22_000,
            target_slope=-3.0,
            slope_window=(-3.5, -2.5),
            make_point=partial(_obs2_point, n_seeds=100, base_seed=22_000),
        ),
        "obs3": Sweep(
            name="obs3",
            description=(
                "Survival time vs a projected-gradient competitor (sqrt-T "
                "regret); expected exponent -4."
            ),
            epsilons=SWEEP_EPSILONS,
            n_seeds=100,
            base_seed=23_000,
            target_slope=-4.0,
            slope_window=(-4.7, -3.3),
            make_point=partial(_obs3_point, n_seeds=100, base_seed=23_000),
        ),
    }


def run_sweep(
    sweep: Sweep,
    epsilons=None,
    n_seeds: int | None = None,
    n_workers: int = 1,
) -> SweepResult:
    """Run every grid point, extract survival times, fit the exponent.

    The inaccurate player is agent 0 of every point scenario; its
    survival time is read off the seed-mean wealth trajectory.  Censored
    (never-dropping) points invalidate the fit rather than faking a tau.
    """
    eps_grid = tuple(epsilons) if epsilons is not None else tuple(sweep.epsilons)
    if not eps_grid:
        raise InvalidInputError("empty epsilon grid")
    points = []
    for eps in eps_grid:
        scenario = sweep.point(float(eps))
        result = run_scenario(scenario, n_seeds=n_seeds, n_workers=n_workers)
        tau, censored = survival_time(result.mean_trajectory[:, 0])
        points.append(
            {
                "eps": float(eps),
                "tau": int(tau),
                "censored": bool(censored),
                "horizon": int(result.horizon),
                "n_seeds": int(result.n_seeds),
            }
        )
    fit = None
    taus = [p["tau"] for p in points]
    usable = (
        len(points) >= 4
        and all(t > 0 for t in taus)
        and not any(p["censored"] for p in points)
    )
    if usable:
        fit = fit_power_law([p["eps"] for p in points], taus)
    return SweepResult(
        name=sweep.name,
        points=points,
        fit=fit,
        target_slope=sweep.target_slope,
        slope_window=sweep.slope_window,
    )


# ---------------------------------------------------------------------------
# scenario-attached checks


def _check_fig1(result: ScenarioResult):
    ucb_mean = float(result.terminal_wealths[:, 1].mean())
    early = float(result.early_half_fraction[:, 0].mean())
    passed = ucb_mean > 0.9 and early >= 0.30
    return passed, (
        f"ucb mean terminal wealth {ucb_mean:.4f} (need > 0.9); "
        f"bayes early above-half fraction {early:.3f} (need >= 0.30)"
    )


def _check_fig2c(result: ScenarioResult):
    frac = float((result.terminal_wealths[:, 0] > 0.9).mean())
    return frac >= 0.95, f"bayes terminal wealth > 0.9 in {frac:.2%} of seeds (need >= 95%)"


def _check_prop7(result: ScenarioResult):
    rates = result.shifted_regrets[:, 0] / result.horizon
    frac = float((rates >= 1.0 / 23.0).mean())
    return frac >= 0.90, (
        f"shifted regret per step >= 1/23 in {frac:.2%} of seeds "
        f"(mean rate {rates.mean():.4f}, need >= 90%)"
    )


def _check_robust_floor(result: ScenarioResult):
    worst = float(result.robust_floor_margins.min())
    return worst >= -1e-15, f"worst weight-floor slack {worst:.3e} (need >= -1e-15)"


def _check_noisy(result: ScenarioResult):
    var_first = result.strategy_var_first[:, 0]
    var_last = result.strategy_var_last[:, 0]
    frac = float((var_last >= 0.25 * var_first).mean())
    return frac >= 0.90, (
        f"late/early strategy-variance ratio >= 0.25 in {frac:.0%} of seeds (need >= 90%)"
    )


CHECKS = {
    "fig1_ucb_takeover": _check_fig1,
    "fig2c_bayes_takeover": _check_fig2c,
    "prop7_linear_regret": _check_prop7,
    "robust_floor": _check_robust_floor,
    "noisy_nonconvergence": _check_noisy,
}


def evaluate_checks(scenario: Scenario, result: ScenarioResult) -> list[dict]:
    out = []
    for name in scenario.checks:
        if name not in CHECKS:
            raise InvalidInputError(f"unknown check {name!r}")
        passed, detail = CHECKS[name](result)
        out.append({"name": name, "passed": bool(passed), "detail": detail})
    result.check_results = out
    return out
