import numpy as np
import pytest

from marketsel.agents import AgentSpec
from marketsel.errors import InvalidInputError
from marketsel.market import MarketConfig, run_market
from marketsel.regret import (
    build_ledger,
    classify_survival,
    fit_power_law,
    hindsight_best,
    regret,
    step_utility,
    survival_time,
)
from marketsel.rng import substream


class TestStepUtility:
    def test_full_mass_near_one(self):
        delta = 1e-6
        assert step_utility([1.0 - delta, delta], 0) == pytest.approx(np.log(1 - delta))

    def test_hand_value(self):
        assert step_utility([0.7, 0.3], 1) == pytest.approx(-1.20397, abs=1e-5)

    def test_permutation_equivariance(self):
        alpha = np.array([0.2, 0.5, 0.3])
        perm = np.array([2, 0, 1])
        for s in range(3):
            assert step_utility(alpha, s) == step_utility(alpha[perm], np.argsort(perm)[s])

    def test_zero_weight_sentinel(self):
        assert step_utility([1.0, 0.0], 1) == -np.inf


def brute_force_benchmark(states, n_states, step=1e-3):
    """Grid search over the simplex (2 or 3 states)."""
    counts = np.bincount(states, minlength=n_states).astype(float)
    ticks = np.arange(0.0, 1.0 + step / 2, step)
    best = -np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        if n_states == 2:
            grid = np.stack([ticks, 1 - ticks], axis=1)
        else:
            a, b = np.meshgrid(ticks, ticks, indexing="ij")
            keep = a + b <= 1 + 1e-12
            grid = np.stack([a[keep], b[keep], np.maximum(1 - a[keep] - b[keep], 0)], axis=1)
        log_grid = np.log(grid)
        observed = counts > 0
        values = log_grid[:, observed] @ counts[observed]
        best = np.nanmax(values)
    return float(best)


class TestHindsightBest:
    def test_counting_example(self):
        q_hat, value = hindsight_best([0] * 7 + [1] * 3)
        np.testing.assert_allclose(q_hat, [0.7, 0.3])
        assert value == pytest.approx(7 * np.log(0.7) + 3 * np.log(0.3))

    def test_uniform_counts_give_uniform_maximizer(self):
        q_hat, _ = hindsight_best([0, 1, 2, 2, 1, 0], 3)
        np.testing.assert_allclose(q_hat, [1 / 3] * 3)

    def test_single_state_point_mass_value_zero(self):
        q_hat, value = hindsight_best([1, 1, 1], 2)
        np.testing.assert_allclose(q_hat, [0.0, 1.0])
        assert value == 0.0

    def test_never_beaten_by_grid_search(self):
        rng = np.random.default_rng(21)
        for _ in range(60):
            n_states = int(rng.integers(2, 4))
            horizon = int(rng.integers(1, 13))
            states = rng.integers(0, n_states, size=horizon)
            _, closed = hindsight_best(states, n_states)
            brute = brute_force_benchmark(states, n_states)
            assert brute <= closed + 1e-9

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            hindsight_best([])


class TestRegret:
    def test_playing_empirical_distribution_gives_zero(self):
        states = np.array([0, 0, 1, 0, 1])
        q_hat, _ = hindsight_best(states, 2)
        utilities = np.log(q_hat[states])
        assert regret(utilities, states) == pytest.approx(0.0, abs=1e-12)

    def test_constant_q_expected_regret_half(self):
        # E[R] -> (S-1)/2 = 0.5 for S=2 (checked by Monte Carlo)
        q = np.array([0.7, 0.3])
        cdf = np.cumsum(q)
        total = 0.0
        n_seeds = 300
        for i in range(n_seeds):
            rng = substream(1000 + i, "states")
            states = np.minimum(
                np.searchsorted(cdf, rng.random(5_000), side="right"), 1
            )
            total += regret(np.log(q[states]), states)
        mean = total / n_seeds
        # chi-square scale: sd of the mean ~ 0.7/sqrt(300) ~ 0.04
        assert abs(mean - 0.5) < 0.15

    def test_constant_strategy_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            states = rng.integers(0, 2, size=100)
            alpha = rng.dirichlet([1, 1])
            alpha = np.maximum(alpha, 1e-6)
            alpha /= alpha.sum()
            assert regret(np.log(alpha[states]), states) >= -1e-12

    def test_length_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            regret(np.zeros(3), [0, 1])


class TestLedger:
    def run_record(self, horizon=4_000, seed=5):
        config = MarketConfig(
            n_states=2,
            horizon=horizon,
            delta=0.1,
            q=[0.7, 0.3],
            seed=seed,
            agents=[
                AgentSpec(kind="bayes", models=[[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]),
                AgentSpec(kind="ucb", models=[[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]),
                AgentSpec(kind="fixed", alpha=[0.5, 0.5]),
            ],
        )
        return run_market(config)

    def test_identity_residuals_tiny(self):
        ledger = build_ledger(self.run_record())
        assert np.abs(ledger.identity_residuals()).max() < 1e-6

    def test_regret_differences_antisymmetric(self):
        ledger = build_ledger(self.run_record())
        np.testing.assert_allclose(
            ledger.regret_differences, -ledger.regret_differences.T, atol=1e-12
        )

    def test_vanishing_threshold_consequence(self):
        # if R^n - R^m > log(w0_n / (eps * w0_m)) then w_n < eps: an exact
        # algebraic consequence of the wealth-ratio identity
        ledger = build_ledger(self.run_record(horizon=20_000))
        eps = 1e-6
        w0 = ledger.initial_wealths
        for n in range(3):
            for m in range(3):
                if ledger.regret_differences[n, m] > np.log(w0[n] / (eps * w0[m])):
                    assert ledger.terminal_wealths[n] < eps

    def test_export_shape(self):
        doc = build_ledger(self.run_record()).to_dict()
        assert len(doc["agents"]) == 3
        assert set(doc["agents"][0]) == {"cumulative_utility", "regret", "terminal_wealth"}
        assert len(doc["regret_differences"]) == 3


class TestClassifySurvival:
    def trajectories(self, drift, sigma=0.05, n_seeds=120, horizon=400, start=0.5, seed=0):
        rng = np.random.default_rng(seed)
        increments = rng.normal(drift, sigma, size=(n_seeds, horizon))
        logit = np.log(start / (1 - start)) + np.cumsum(increments, axis=1)
        w = 1 / (1 + np.exp(-np.clip(logit, -700, 700)))
        return np.concatenate([np.full((n_seeds, 1), start), w], axis=1)

    def test_positive_drift_survives(self):
        assert classify_survival(self.trajectories(+0.05)) == "survives"

    def test_negative_drift_vanishes(self):
        assert classify_survival(self.trajectories(-0.05)) == "vanishes"

    def test_mixed_outcomes_are_inconclusive(self):
        # mild negative drift with heavy dispersion: too many losers to
        # call survival, median too healthy to call vanishing
        trajectories = self.trajectories(-0.01, sigma=0.1, seed=3)
        assert classify_survival(trajectories) == "inconclusive"

    def test_identical_agents_split_exactly(self):
        config = MarketConfig(
            n_states=2,
            horizon=500,
            delta=0.1,
            q=[0.7, 0.3],
            seed=1,
            agents=[
                AgentSpec(kind="fixed", alpha=[0.6, 0.4]),
                AgentSpec(kind="fixed", alpha=[0.6, 0.4]),
            ],
        )
        record = run_market(config)
        np.testing.assert_array_equal(record.wealth_path, 0.5)

    def test_too_few_seeds_rejected(self):
        with pytest.raises(InvalidInputError):
            classify_survival(np.full((10, 50), 0.9))


class TestSurvivalTime:
    def test_starts_below_half(self):
        tau, censored = survival_time([0.4, 0.6, 0.7])
        assert tau == 0 and not censored

    def test_first_dip(self):
        tau, censored = survival_time([0.5, 0.6, 0.55, 0.49, 0.6])
        assert tau == 2 and not censored

    def test_censored(self):
        tau, censored = survival_time([0.5, 0.6, 0.7])
        assert censored and tau == 2

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            survival_time([])


class TestFitPowerLaw:
    def test_exact_inverse_square(self):
        eps = np.array([0.02, 0.04, 0.08, 0.16])
        fit = fit_power_law(eps, eps**-2.0)
        assert fit["slope"] == pytest.approx(-2.0, abs=1e-9)
        assert fit["r_squared"] == pytest.approx(1.0, abs=1e-12)

    def test_exact_inverse_cube(self):
        eps = np.array([0.02, 0.04, 0.08, 0.16])
        fit = fit_power_law(eps, 3.7 * eps**-3.0)
        assert fit["slope"] == pytest.approx(-3.0, abs=1e-9)

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidInputError):
            fit_power_law([0.1, 0.2, 0.4, 0.8], [10.0, 5.0, 0.0, 1.0])

    def test_rejects_too_few_points(self):
        with pytest.raises(InvalidInputError):
            fit_power_law([0.1, 0.2, 0.4], [3.0, 2.0, 1.0])
