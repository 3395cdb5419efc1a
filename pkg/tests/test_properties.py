"""Cross-module behavior: posterior concentration, recovery after a
shift, and the stationary constant-regret bound for the regularized
Bayesian."""

import numpy as np
import pytest
from dataclasses import replace
from scipy.special import zeta

from marketsel.agents import BayesAgent, RobustBayesAgent
from marketsel.catalog import builtin_scenarios
from marketsel.experiments import run_scenario
from marketsel.market import generate_states
from marketsel.regret import hindsight_best
from marketsel.rng import run_seed
from marketsel.simplex import relative_entropy, softmax_rows


class TestPosteriorConcentration:
    """The posterior mass on the divergence-minimizing model goes to 1."""

    @pytest.mark.parametrize("scenario_name", ["fig2c", "fig1"])
    def test_weight_exceeds_0999_by_1e5(self, scenario_name):
        scenario = builtin_scenarios()[scenario_name]
        config = scenario.config_for(100_000)
        models = np.asarray(config.agents[0].models, dtype=np.float64)
        q = np.asarray(config.q)
        best = int(np.argmin([relative_entropy(q, m) for m in models]))
        agent = BayesAgent(models, delta=config.delta)
        hits = 0
        n_seeds = 100
        for i in range(n_seeds):
            states = generate_states(replace(config, seed=run_seed(scenario.base_seed, i)))
            final = agent.log_weight_stream(states)[-1]
            weights = softmax_rows(final[None, :])[0]
            hits += weights[best] > 0.999
        assert hits / n_seeds >= 0.99


class TestRobustRecovery:
    """After a shift at T1 the regularized Bayesian re-learns in
    O(log T1) steps: the floor keeps the discarded model warm."""

    def recovery_times(self, horizon, n_seeds=30):
        scenario = builtin_scenarios()["thm8_shift"]
        config = scenario.config_for(horizon)
        t1 = config.schedule.intervals[0][0]
        models = np.asarray(config.agents[0].models, dtype=np.float64)
        agent = RobustBayesAgent(models)
        times = []
        for i in range(n_seeds):
            states = generate_states(replace(config, seed=run_seed(scenario.base_seed, i)))
            weights = agent.weight_stream(states)
            after = weights[t1 + 1 :, 1]
            assert after.max() > 0.5
            times.append(int(np.argmax(after > 0.5)) + 1)
        return t1, np.asarray(times)

    def test_logarithmic_recovery(self):
        drift = relative_entropy([0.25, 0.75], [0.75, 0.25])
        offsets = []
        for horizon in (30_000, 90_000, 270_000):
            t1, times = self.recovery_times(horizon)
            budget = (2.0 / drift) * np.log(t1) + 25.0
            assert np.mean(times <= budget) >= 0.95
            offsets.append(np.quantile(times, 0.95) - (2.0 / drift) * np.log(t1))
        # the offset beyond (2/I) ln T1 stays bounded as T1 grows 9x
        assert max(offsets) - min(offsets) < 20.0


class TestStationaryConstantRegret:
    def test_mean_regret_below_zeta_bound(self):
        # stationary phase: mean regret <= 2 I_max zeta(4/3) + R
        scenario = builtin_scenarios()["thm8_stationary"]
        result = run_scenario(scenario, horizon=160_000, n_seeds=30)
        i_max = relative_entropy([0.75, 0.25], [0.25, 0.75])
        bound = 2.0 * i_max * zeta(4.0 / 3.0) + 0.5
        times = result.regret_checkpoints
        final = result.regret_curve[:, 0, int(np.nonzero(times == result.horizon)[0][0])]
        assert final.mean() <= bound
        # and it is non-increasing in expectation late in the run: compare
        # the last two checkpoints with a small noise allowance
        sel = times >= result.horizon // 5
        late = result.regret_curve[:, 0, :].mean(axis=0)[sel]
        assert late[-1] <= late[0] + 1.0


class TestPriceFormation:
    def test_prices_interpolate_strategies(self):
        # the richer agent moves prices toward its own strategy
        from marketsel.agents import AgentSpec
        from marketsel.market import MarketConfig, run_market

        config = MarketConfig(
            n_states=2,
            horizon=200,
            delta=0.1,
            q=[0.7, 0.3],
            seed=3,
            initial_wealths=[0.99, 0.01],
            agents=[
                AgentSpec(kind="fixed", alpha=[0.9, 0.1]),
                AgentSpec(kind="fixed", alpha=[0.1, 0.9]),
            ],
        )
        record = run_market(config)
        np.testing.assert_allclose(record.prices[0], [0.892, 0.108], atol=1e-12)

    def test_benchmark_mean_consistency(self):
        # the hindsight benchmark over a long i.i.d. run sits near -T H(q)
        rng_states = generate_states(
            builtin_scenarios()["fig2c"].config_for(50_000)
        )
        _, bench = hindsight_best(rng_states, 2)
        q = np.array([0.7, 0.3])
        entropy = -np.sum(q * np.log(q))
        assert bench / 50_000 == pytest.approx(-entropy, abs=0.01)


class TestSurvivalClassification:
    """Survival calls on real market trajectories across seeds."""

    def wealth_trajectories(self, config, base_seed, n_seeds):
        from marketsel.market import run_market

        paths = []
        for i in range(n_seeds):
            record = run_market(replace(config, seed=run_seed(base_seed, i)))
            paths.append(record.wealth_path[:, 0])
        return np.stack(paths)

    def test_accurate_bayesian_survives_against_truth_player(self):
        from marketsel.agents import AgentSpec
        from marketsel.market import MarketConfig
        from marketsel.regret import classify_survival

        config = MarketConfig(
            n_states=2,
            horizon=20_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="bayes", models=[[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]),
                AgentSpec(kind="fixed", alpha=[0.7, 0.3]),
            ],
        )
        trajectories = self.wealth_trajectories(config, 31_000, 100)
        assert classify_survival(trajectories) == "survives"

    def test_inaccurate_bayesian_vanishes_against_ucb(self):
        from marketsel.catalog import builtin_scenarios
        from marketsel.regret import classify_survival

        config = builtin_scenarios()["fig1"].config_for(40_000)
        trajectories = self.wealth_trajectories(config, 32_000, 100)
        assert classify_survival(trajectories) == "vanishes"

    def test_identical_twins_both_survive(self):
        from marketsel.agents import AgentSpec
        from marketsel.market import MarketConfig
        from marketsel.regret import classify_survival

        config = MarketConfig(
            n_states=2,
            horizon=2_000,
            delta=0.1,
            q=[0.7, 0.3],
            agents=[
                AgentSpec(kind="fixed", alpha=[0.6, 0.4]),
                AgentSpec(kind="fixed", alpha=[0.6, 0.4]),
            ],
        )
        trajectories = self.wealth_trajectories(config, 33_000, 100)
        np.testing.assert_array_equal(trajectories, 0.5)
        assert classify_survival(trajectories) == "survives"
