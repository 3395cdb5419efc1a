import numpy as np
import pytest
from scipy import stats

from marketsel.agents import (
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
    make_bayes_state,
    make_noisy_bayes_state,
    make_ucb_state,
    noisy_bayes_update,
    normalized_rewards,
    robust_bayes_update,
    ucb_step,
)
from marketsel.errors import (
    InvalidInputError,
    UnsupportedConfigurationError,
)
from marketsel.rng import substream
from marketsel.simplex import relative_entropy
from marketsel._kernels import project_simplex


def sample_states(q, size, rng):
    cdf = np.cumsum(q)
    return np.minimum(np.searchsorted(cdf, rng.random(size), side="right"), len(q) - 1)


class TestFixedAgent:
    def test_emits_same_vector_forever(self):
        agent = fixed_strategy([0.5, 0.5])
        agent.reset()
        first = agent.next_strategy(0)
        late = agent.next_strategy(10**6)
        np.testing.assert_array_equal(first, late)

    def test_requires_full_support(self):
        with pytest.raises(InvalidInputError):
            FixedAgent([1.0, 0.0])

    def test_expected_utility_gap_is_relative_entropy(self):
        # alpha=(0.5,0.5) under q=(0.75,0.25): gap = I_q(alpha) = 0.13081 nats
        q = np.array([0.75, 0.25])
        alpha = np.array([0.5, 0.5])
        gap = relative_entropy(q, alpha)
        assert gap == pytest.approx(0.13081, abs=1e-5)
        rng = np.random.default_rng(11)
        draws = 200_000
        states = sample_states(q, draws, rng)
        measured = np.mean(np.log(q[states]) - np.log(alpha[states]))
        sigma = np.std(np.log(q[states]) - np.log(alpha[states])) / np.sqrt(draws)
        assert abs(measured - gap) < 3 * sigma + 1e-9


class TestBayesUpdate:
    def test_one_step_hand_computation(self):
        # uniform prior over (0.7,0.3) and (0.3,0.7); observe state 0:
        # (0.35, 0.15) normalized = (0.7, 0.3)
        state = make_bayes_state([[0.7, 0.3], [0.3, 0.7]])
        posterior = bayes_update(state, 0)
        np.testing.assert_allclose(posterior.weights(), [0.7, 0.3], atol=1e-12)

    def test_point_mass_is_absorbing(self):
        state = make_bayes_state([[0.7, 0.3], [0.3, 0.7]], prior=[1.0 - 1e-15, 1e-15])
        for s in (0, 1, 1, 0):
            state = bayes_update(state, s)
        assert state.weights()[0] == pytest.approx(1.0, abs=1e-9)

    def test_log_odds_by_counts_vs_product_oracle(self):
        # pairwise log odds after n observations equal the prior odds plus
        # sum_s n_s log(theta_k / theta_l); cross-checked against a brute
        # force product-form posterior on 20-step sequences
        rng = np.random.default_rng(3)
        models = np.array([[0.6, 0.4], [0.5, 0.5], [0.2, 0.8]])
        prior = np.array([0.5, 0.25, 0.25])
        for _ in range(25):
            states = rng.integers(0, 2, size=20)
            state = make_bayes_state(models, prior)
            for s in states:
                state = bayes_update(state, int(s))
            # brute force in linear space
            products = prior * np.prod(models[:, states], axis=1)
            brute = products / products.sum()
            np.testing.assert_allclose(state.weights(), brute, rtol=1e-10)
            counts = np.bincount(states, minlength=2)
            for k in range(3):
                for l in range(3):
                    expected = np.log(prior[k] / prior[l]) + np.sum(
                        counts * (np.log(models[k]) - np.log(models[l]))
                    )
                    got = state.log_weights[k] - state.log_weights[l]
                    assert got == pytest.approx(expected, abs=1e-9)

    def test_predict_point_mass(self):
        state = make_bayes_state([[0.7, 0.3], [0.3, 0.7]], prior=[1 - 1e-16, 1e-16])
        np.testing.assert_allclose(bayes_predict(state), [0.7, 0.3], atol=1e-12)

    def test_predict_symmetric_mixture(self):
        state = make_bayes_state([[0.7, 0.3], [0.3, 0.7]])
        np.testing.assert_allclose(bayes_predict(state), [0.5, 0.5], atol=1e-12)

    def test_predict_weighted_mixture(self):
        state = make_bayes_state([[0.7, 0.3], [0.3, 0.7]], prior=[0.7, 0.3])
        np.testing.assert_allclose(bayes_predict(state), [0.58, 0.42], atol=1e-12)

    def test_stream_matches_stepwise(self):
        from marketsel.agents import Agent

        rng = np.random.default_rng(5)
        states = rng.integers(0, 2, size=400)
        fast = BayesAgent([[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]).strategies(states)
        slow = Agent.strategies(BayesAgent([[0.8, 0.2], [0.7, 0.3], [0.6, 0.4]]), states)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


class TestRobustBayes:
    def test_hand_example(self):
        # K=2, tentative posterior (0.999, 0.001), t=10 (eps=0.01)
        # -> ((0.999+0.01)/1.02, (0.001+0.01)/1.02)
        state = make_bayes_state([[0.5, 0.5], [0.5, 0.5]], prior=[0.999, 0.001])
        # identical models: the Bayes step is a no-op, isolating the
        # regularization arithmetic
        out = robust_bayes_update(state, 0, t=10)
        np.testing.assert_allclose(
            out.weights(), [0.989215686274510, 0.010784313725490], atol=1e-12
        )

    def test_regularization_vanishes_for_large_t(self):
        state = make_bayes_state([[0.5, 0.5], [0.5, 0.5]], prior=[0.8, 0.2])
        out = robust_bayes_update(state, 0, t=10**9)
        np.testing.assert_allclose(out.weights(), [0.8, 0.2], atol=1e-9)

    def test_uniform_stays_uniform(self):
        state = make_bayes_state([[0.5, 0.5], [0.5, 0.5]], prior=[0.5, 0.5])
        for t in (1, 2, 7, 100):
            out = robust_bayes_update(state, 1, t=t)
            np.testing.assert_allclose(out.weights(), [0.5, 0.5], atol=1e-14)

    def test_rejects_t_below_one(self):
        state = make_bayes_state([[0.6, 0.4], [0.4, 0.6]])
        with pytest.raises(InvalidInputError):
            robust_bayes_update(state, 0, t=0)

    def test_exact_floor_every_step(self):
        rng = np.random.default_rng(9)
        agent = RobustBayesAgent([[0.75, 0.25], [0.25, 0.75]])
        states = rng.integers(0, 2, size=3000)
        stream = agent.weight_stream(states)
        t = np.arange(1, stream.shape[0], dtype=np.float64)
        eps = t**-2
        floors = eps / (1.0 + 2 * eps)
        assert np.all(stream[1:].min(axis=1) >= floors - 1e-15)

    def test_stream_matches_stepwise(self):
        from marketsel.agents import Agent

        rng = np.random.default_rng(10)
        states = rng.integers(0, 2, size=300)
        fast = RobustBayesAgent([[0.75, 0.25], [0.25, 0.75]]).strategies(states)
        slow = Agent.strategies(RobustBayesAgent([[0.75, 0.25], [0.25, 0.75]]), states)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


class TestNoisyBayes:
    def test_two_states_only(self):
        with pytest.raises(UnsupportedConfigurationError):
            make_noisy_bayes_state([0.5, 0.3, 0.2], [0.4, 0.3, 0.3], 0.1)

    def test_eta_zero_reduces_to_bayes(self):
        rng_states = np.random.default_rng(12)
        states = rng_states.integers(0, 2, size=500)
        noisy = NoisyBayesAgent([0.7, 0.3], [0.3, 0.7], eta=0.0)
        stream = noisy.strategies(states, substream(1, "agent:0"))
        bayes = BayesAgent([[0.7, 0.3], [0.3, 0.7]])
        np.testing.assert_allclose(stream, bayes.strategies(states), atol=1e-9)

    def test_update_recursion_form(self):
        # z_{t+1} = (1 + eta_t) L(s_t) + (1 - eta_t) z_t
        state = make_noisy_bayes_state([0.7, 0.3], [0.4, 0.6], eta=0.1)

        class OneDraw:
            def __init__(self, u):
                self.u = u

            def random(self):
                return self.u

        log_lik = state.log_likelihood_ratio()
        up = noisy_bayes_update(state, 1, OneDraw(0.3))  # u < 0.5 -> +eta
        assert up.log_odds == pytest.approx(1.1 * log_lik[1] + 0.9 * state.log_odds)
        down = noisy_bayes_update(state, 0, OneDraw(0.7))  # u >= 0.5 -> -eta
        assert down.log_odds == pytest.approx(0.9 * log_lik[0] + 1.1 * state.log_odds)

    def test_prior_decay_product_frequency(self):
        # |prod_t (1 - eta_t)| = (1-eta)^{n+} (1+eta)^{n-}; for eta=0.1,
        # t=1e4 the exact binomial tail gives the below-1e-10 frequency
        eta, horizon, n_seeds = 0.1, 10_000, 1000
        log_lo, log_hi = np.log(1 - eta), np.log(1 + eta)
        threshold = np.log(1e-10)
        # exact oracle: log|prod| < threshold  <=>  n+ > (t log_hi - thr)/(log_hi - log_lo)
        cut = (horizon * log_hi - threshold) / (log_hi - log_lo)
        p_exact = stats.binom.sf(np.ceil(cut) - 1, horizon, 0.5)
        hits = 0
        for i in range(n_seeds):
            rng = substream(i, "agent:0")
            n_plus = int((rng.random(horizon) < 0.5).sum())
            log_mag = n_plus * log_lo + (horizon - n_plus) * log_hi
            hits += log_mag < threshold
        freq = hits / n_seeds
        sigma = np.sqrt(p_exact * (1 - p_exact) / n_seeds)
        assert p_exact > 0.99
        assert abs(freq - p_exact) <= 3 * sigma + 1e-9

    def test_emitted_strategy_respects_floor(self):
        from marketsel.market import MarketConfig, run_market

        config = MarketConfig(
            n_states=2,
            horizon=2_000,
            delta=0.1,
            q=[0.7, 0.3],
            seed=13,
            agents=[
                AgentSpec(kind="noisy_bayes", theta_a=[0.7, 0.3], theta_b=[0.3, 0.7], eta=0.3)
            ],
        )
        record = run_market(config)
        assert record.strategies.min() >= 1e-6
        assert record.strategies.max() <= 1 - 1e-6 + 1e-12

    def test_stream_matches_stepwise(self):
        from marketsel.agents import Agent

        states = np.random.default_rng(14).integers(0, 2, size=400)
        fast = NoisyBayesAgent([0.7, 0.3], [0.6, 0.4], eta=0.05).strategies(
            states, substream(5, "agent:0")
        )
        slow = Agent.strategies(
            NoisyBayesAgent([0.7, 0.3], [0.6, 0.4], eta=0.05),
            states,
            substream(5, "agent:0"),
        )
        np.testing.assert_allclose(fast, slow, atol=1e-12)


class TestUcb:
    def test_single_model_always_plays_it(self):
        agent = UcbAgent([[0.7, 0.3]], delta=0.1)
        states = np.random.default_rng(1).integers(0, 2, size=100)
        assert np.all(agent.choice_stream(states) == 0)

    def test_rewards_normalized_to_unit_interval(self):
        rewards = normalized_rewards(np.array([[0.7, 0.3], [0.9, 0.1]]), delta=0.1)
        assert rewards.min() >= 0.0
        assert rewards.max() <= 1.0
        assert rewards[1, 1] == pytest.approx(0.0)  # at the floor

    def test_initial_round_robin_and_tie_breaking(self):
        state = make_ucb_state(3)
        rewards = np.zeros((3, 2))  # all rewards equal: ties forever
        choices = []
        for s in (0, 1, 0, 1, 0):
            arm, state = ucb_step(state, rewards, s)
            choices.append(arm)
        assert choices[:3] == [0, 1, 2]
        # equal means and counts after the round robin: lowest index wins
        assert choices[3] == 0

    def test_wrong_arm_pull_bound(self):
        # models {q, theta'} with I_q(theta') = 0.339: pulls of theta' at
        # T=1e5 stay below 50 ln T / gap^2 (normalized units)
        q = np.array([0.7, 0.3])
        models = np.array([[0.7, 0.3], [0.3, 0.7]])
        delta = 0.3
        agent = UcbAgent(models, delta=delta)
        gap = relative_entropy(q, models[1]) / (-np.log(delta))
        bound = 50 * np.log(100_000) / gap**2
        rng = np.random.default_rng(2)
        states = sample_states(q, 100_000, rng)
        pulls = int((agent.choice_stream(states) == 1).sum())
        assert pulls < bound
        assert pulls > 0  # it does explore

    def test_concentrates_on_true_model(self):
        # fig-1 action set under q=(0.7,0.3): long-run play concentrates
        # on the correct distribution
        q = np.array([0.7, 0.3])
        agent = UcbAgent([[0.7, 0.3], [0.9, 0.1], [0.3, 0.7]], delta=0.1)
        states = sample_states(q, 100_000, np.random.default_rng(4))
        choices = agent.choice_stream(states)
        late = choices[-50_000:]
        assert np.mean(late == 0) > 0.9

    def test_stream_matches_stepwise(self):
        from marketsel.agents import Agent

        states = np.random.default_rng(6).integers(0, 2, size=500)
        fast = UcbAgent([[0.7, 0.3], [0.9, 0.1]], delta=0.1).strategies(states)
        slow = Agent.strategies(UcbAgent([[0.7, 0.3], [0.9, 0.1]], delta=0.1), states)
        np.testing.assert_allclose(fast, slow, atol=0)


class TestOgd:
    def test_projection_is_identity_on_simplex(self):
        for v in ([0.5, 0.5], [0.2, 0.3, 0.5]):
            np.testing.assert_allclose(project_simplex(np.array(v)), v, atol=1e-12)

    def test_projection_euclidean_oracle(self):
        # brute-force grid check of the projection on the 2-simplex
        rng = np.random.default_rng(15)
        grid = np.stack([np.linspace(0, 1, 2001), 1 - np.linspace(0, 1, 2001)], axis=1)
        for _ in range(50):
            v = rng.normal(size=2) * 2
            proj = project_simplex(v)
            dists = np.sum((grid - v) ** 2, axis=1)
            best = grid[np.argmin(dists)]
            assert np.sum((proj - v) ** 2) <= np.min(dists) + 1e-9
            np.testing.assert_allclose(proj, best, atol=1e-3)

    def test_monotone_drift_until_floor_binds(self):
        floor = 0.01
        agent = OgdAgent([0.5, 0.5], step_scale=0.1, floor=floor)
        states = np.zeros(2000, dtype=np.int64)
        stream = agent.strategies(states)
        first = stream[:, 0]
        bound = np.nonzero(stream[:, 1] <= 2 * floor)[0][0]
        assert bound > 0
        assert np.all(np.diff(first[: bound + 1]) >= -1e-12)
        # once binding, the floor blend holds the losing state in a band
        assert stream[:, 1].min() >= floor
        assert np.all(stream[bound:, 1] <= 3 * floor)

    def test_sublinear_regret_growth(self):
        # mean regret ratio R(T)/R(T/4) stays below 3 (sqrt-T predicts 2)
        from marketsel.regret import regret as regret_of

        q = np.array([0.7, 0.3])
        horizon = 100_000
        ratios = []
        for i in range(20):
            rng = np.random.default_rng(500 + i)
            states = sample_states(q, horizon, rng)
            agent = OgdAgent([0.5, 0.5], step_scale=0.1, n_states=2, floor=1e-6)
            stream = agent.strategies(states)
            la = np.log(stream[np.arange(horizon), states])
            quarter = horizon // 4
            r_full = regret_of(la, states)
            r_quarter = regret_of(la[:quarter], states[:quarter])
            ratios.append(r_full / r_quarter)
        assert np.mean(ratios) < 3.0

    def test_stream_matches_stepwise(self):
        from marketsel.agents import Agent

        states = np.random.default_rng(16).integers(0, 2, size=300)
        fast = OgdAgent([0.6, 0.4], step_scale=0.2, floor=0.05).strategies(states)
        slow = Agent.strategies(OgdAgent([0.6, 0.4], step_scale=0.2, floor=0.05), states)
        np.testing.assert_allclose(fast, slow, atol=1e-12)


class TestMagic:
    def test_counting_example(self):
        states = [0, 0, 1, 0, 1, 0, 0, 1, 0, 0]
        np.testing.assert_allclose(
            empirical_distribution(states, 2), [0.7, 0.3], atol=1e-15
        )

    def test_uniform_counts(self):
        np.testing.assert_allclose(
            empirical_distribution([0, 1, 2, 0, 1, 2], 3), [1 / 3] * 3, atol=1e-15
        )

    def test_empty_sequence_rejected(self):
        with pytest.raises(InvalidInputError):
            empirical_distribution([], 2)

    def test_unseen_state_gets_floored(self):
        q_hat = empirical_distribution([0, 0, 0], 2, floor=1e-6)
        assert q_hat[1] == pytest.approx(1e-6)
        assert q_hat.sum() == pytest.approx(1.0)

    def test_stepwise_interface_refused(self):
        agent = MagicAgent(2)
        with pytest.raises(UnsupportedConfigurationError):
            agent.next_strategy(0)


class TestMeasurability:
    """Strategies at step t must depend only on states before t."""

    AGENTS = {
        "fixed": lambda: FixedAgent([0.6, 0.4]),
        "bayes": lambda: BayesAgent([[0.8, 0.2], [0.6, 0.4]]),
        "robust_bayes": lambda: RobustBayesAgent([[0.8, 0.2], [0.6, 0.4]]),
        "noisy_bayes": lambda: NoisyBayesAgent([0.7, 0.3], [0.6, 0.4], eta=0.1),
        "ucb": lambda: UcbAgent([[0.8, 0.2], [0.6, 0.4]], delta=0.1),
        "ogd": lambda: OgdAgent([0.5, 0.5], step_scale=0.2, floor=0.01),
    }

    @pytest.mark.parametrize("kind", sorted(AGENTS))
    def test_future_permutation_invariance(self, kind):
        rng = np.random.default_rng(77)
        horizon, cut = 300, 120
        base = rng.integers(0, 2, size=horizon)
        permuted = base.copy()
        permuted[cut:] = rng.permutation(base[cut:])
        # guard against a trivially identical suffix
        if np.array_equal(base, permuted):
            permuted[-1] ^= 1
        make = self.AGENTS[kind]
        a = make().strategies(base, substream(9, "agent:0"))
        b = make().strategies(permuted, substream(9, "agent:0"))
        np.testing.assert_array_equal(a[: cut + 1], b[: cut + 1])

    def test_magic_is_exempt(self):
        states = np.array([0, 0, 0, 1, 1, 1])
        permuted = np.array([0, 0, 0, 1, 1, 0])
        a = MagicAgent(2).strategies(states)
        b = MagicAgent(2).strategies(permuted)
        assert not np.array_equal(a[0], b[0])


class TestAgentSpec:
    def test_round_trip(self):
        spec = AgentSpec(kind="bayes", models=[[0.7, 0.3], [0.3, 0.7]], prior=[0.5, 0.5])
        assert AgentSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_fields_rejected(self):
        with pytest.raises(InvalidInputError):
            AgentSpec.from_dict({"kind": "fixed", "alpha": [0.5, 0.5], "bogus": 1})

    def test_missing_kind_rejected(self):
        with pytest.raises(InvalidInputError):
            AgentSpec.from_dict({"alpha": [0.5, 0.5]})

    def test_build_all_kinds(self):
        specs = [
            AgentSpec(kind="fixed", alpha=[0.5, 0.5]),
            AgentSpec(kind="bayes", models=[[0.7, 0.3], [0.3, 0.7]]),
            AgentSpec(kind="robust_bayes", models=[[0.7, 0.3], [0.3, 0.7]]),
            AgentSpec(kind="noisy_bayes", theta_a=[0.7, 0.3], theta_b=[0.6, 0.4], eta=0.1),
            AgentSpec(kind="ucb", models=[[0.7, 0.3], [0.3, 0.7]]),
            AgentSpec(kind="ogd", alpha0=[0.5, 0.5], step_scale=0.1),
            AgentSpec(kind="magic"),
        ]
        for spec in specs:
            agent = build_agent(spec, n_states=2, delta=0.1)
            assert agent.kind == spec.kind

    def test_unknown_kind_rejected(self):
        with pytest.raises(InvalidInputError):
            build_agent(AgentSpec(kind="oracle"), n_states=2, delta=0.1)

    def test_model_floor_validated_against_delta(self):
        spec = AgentSpec(kind="bayes", models=[[0.95, 0.05], [0.5, 0.5]])
        with pytest.raises(InvalidInputError):
            build_agent(spec, n_states=2, delta=0.1)


class TestOgdStepOp:
    def test_zero_gradient_is_identity_on_simplex(self):
        from marketsel.agents import ogd_step

        alpha = np.array([0.3, 0.7])
        np.testing.assert_allclose(
            ogd_step(alpha, np.zeros(2), 0.1), alpha, atol=1e-12
        )

    def test_matches_agent_dynamics(self):
        from marketsel.agents import ogd_step

        agent = OgdAgent([0.6, 0.4], step_scale=0.2, floor=0.05)
        agent.reset()
        states = [0, 1, 1, 0, 1]
        alpha = np.array([0.6, 0.4])
        for t, s in enumerate(states, start=1):
            gradient = np.zeros(2)
            gradient[s] = -1.0 / alpha[s]
            alpha = ogd_step(alpha, gradient, 0.2 / np.sqrt(t), 0.05)
            agent.observe(s)
        np.testing.assert_allclose(agent.next_strategy(len(states)), alpha, atol=1e-15)
