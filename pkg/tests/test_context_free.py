"""Context-free training loop: loss construction, baselines, evaluation, bounds."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scpolicy.context_free import (
    BRUTE_FORCE_GUARD,
    SCPConfig,
    average_regret_bound_check,
    brute_force_opt,
    context_free_bound_check,
    discounted_benefits,
    discounted_cumulative_benefit,
    empirical_f,
    evaluate_distribution,
    evaluate_mixture,
    greedy_clairvoyant,
    loss_range,
    position_weights,
    run_scp_context_free,
    scp_losses,
    uniform_state_sampler,
    verify_sampling_ratio,
)
from scpolicy.environments import random_coverage_instance
from scpolicy.learners import Exp3, WeightedMajority
from scpolicy.objectives import Objective, ProbabilisticCoverage, State


class TestPositionWeights:
    def test_hand_values(self):
        assert_allclose(position_weights(2, 2), [0.5, 1.0])
        assert_allclose(position_weights(3, 3), [4.0 / 9.0, 2.0 / 3.0, 1.0])
        assert_allclose(position_weights(1, 5), [1.0])

    def test_k_equal_one_keeps_only_last_position(self):
        # 0^0 = 1 must hold for the final slot
        assert_allclose(position_weights(3, 1), [0.0, 0.0, 1.0])
        assert_allclose(position_weights(1, 1), [1.0])

    def test_nondecreasing_and_last_is_one(self):
        w = position_weights(7, 4)
        assert np.all(np.diff(w) >= 0)
        assert w[-1] == 1.0

    def test_loss_range(self):
        assert loss_range(3, 5) == 3.0
        assert loss_range(5, 3) == 3.0
        assert loss_range(4, 4) == 4.0

    def test_validation(self):
        with pytest.raises(ValueError):
            position_weights(0, 2)


class TestDiscountedBenefit:
    def setup_method(self):
        self.obj = ProbabilisticCoverage(np.array([[0.5, 0.4]]))
        self.x = self.obj.states()[0]

    def test_hand_value(self):
        # L = (1, 1), s = 0, m = k = 2:
        #   position 1: weight 0.5, benefit b(0 | []) = 0.5          -> 0.25
        #   position 2: weight 1.0, benefit b(0 | [1]) = 0.6 * 0.5   -> 0.30
        got = discounted_cumulative_benefit(self.obj, self.x, [1, 1], 0, 2)
        assert_allclose(got, 0.55)

    def test_vectorized_matches_reference(self):
        rng = np.random.default_rng(2)
        obj = ProbabilisticCoverage(rng.uniform(0.0, 0.9, size=(3, 5)))
        for _ in range(20):
            x = obj.states()[int(rng.integers(3))]
            items = rng.integers(0, 5, size=int(rng.integers(1, 7))).tolist()
            k = int(rng.integers(1, 5))
            fast = discounted_benefits(obj, x, items, k)
            slow = [
                discounted_cumulative_benefit(obj, x, items, s, k) for s in range(5)
            ]
            assert_allclose(fast, slow, atol=1e-12)

    def test_losses_hand_value(self):
        # r = (0.55, 0.20) -> losses (0, 0.35)
        losses = scp_losses(self.obj, self.x, [1, 1], 2)
        assert_allclose(losses, [0.0, 0.35])

    def test_losses_nonnegative_with_exact_zero(self):
        rng = np.random.default_rng(4)
        obj = ProbabilisticCoverage(rng.uniform(0.0, 1.0, size=(2, 6)))
        for _ in range(10):
            items = rng.integers(0, 6, size=3).tolist()
            losses = scp_losses(obj, obj.states()[0], items, 3)
            assert losses.min() == 0.0
            assert np.all(losses <= loss_range(3, 3) + 1e-12)

    def test_identical_benefits_zero_losses(self):
        # modular objective: every item adds 0.1 whatever the prefix holds
        class _Modular(Objective):
            n_items = 4

            def states(self):
                return (State(id=0),)

            def evaluate(self, state, items):
                return min(1.0, 0.1 * len(items))

        obj = _Modular()
        losses = scp_losses(obj, obj.states()[0], [0, 1], 2)
        assert_allclose(losses, np.zeros(4), atol=1e-15)

    def test_spent_prefix_items_lose_to_fresh_ones(self):
        # under set semantics a repeated item earns nothing at later slots
        obj = ProbabilisticCoverage(np.full((1, 4), 0.3))
        losses = scp_losses(obj, obj.states()[0], [0, 1], 2)
        assert losses[0] > 0.0
        assert_allclose(losses[1:], np.zeros(3), atol=1e-15)


class TestBaselines:
    def test_greedy_picks_best_marginals(self):
        obj = ProbabilisticCoverage(np.array([[0.9, 0.5, 0.1]]))
        items = greedy_clairvoyant(obj, obj.states(), 2)
        assert items[0] == 0
        assert items[1] == 1

    def test_brute_force_tiny(self):
        obj = ProbabilisticCoverage(np.array([[0.5, 0.3]]))
        items, value = brute_force_opt(obj, obj.states(), 2)
        assert items == [0, 1]
        assert_allclose(value, 0.65)

    def test_brute_force_guard(self):
        obj = ProbabilisticCoverage(np.zeros((1, 10)))
        with pytest.raises(ValueError):
            brute_force_opt(obj, obj.states(), 8)
        assert 10**8 > BRUTE_FORCE_GUARD

    def test_greedy_ratio_on_random_instances(self):
        for seed in range(5):
            obj = random_coverage_instance(4, 6, seed=seed)
            states = obj.states()
            greedy = greedy_clairvoyant(obj, states, 3)
            _, opt = brute_force_opt(obj, states, 3)
            assert empirical_f(obj, states, greedy) >= (1.0 - 1.0 / np.e) * opt

    def test_empirical_f_fast_path_matches_generic(self):
        obj = random_coverage_instance(5, 7, seed=1)
        states = obj.states()[:3]
        for items in ([0], [1, 2, 2], [6, 0, 3]):
            direct = np.mean([obj.evaluate(x, items) for x in states])
            assert_allclose(empirical_f(obj, states, items), direct)


class TestConfig:
    def test_m_defaults_to_k(self):
        cfg = SCPConfig(k=4, T=100)
        assert cfg.m == 4

    def test_snapshot_stride(self):
        assert SCPConfig(k=2, T=5000).snapshot_stride == 25
        assert SCPConfig(k=2, T=150).snapshot_stride == 1
        assert SCPConfig(k=2, T=201).snapshot_stride == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            SCPConfig(k=0, T=10)
        with pytest.raises(ValueError):
            SCPConfig(k=2, T=-1)


class TestTrainingLoop:
    def setup_method(self):
        self.obj = random_coverage_instance(4, 6, seed=8)
        self.states = self.obj.states()

    def _run(self, T=50, learner=None, seed=0, k=3):
        cfg = SCPConfig(k=k, T=T, seed=seed)
        if learner is None:
            learner = WeightedMajority(6, eta="doubling", loss_range=loss_range(k, k))
        return run_scp_context_free(
            cfg, self.obj, uniform_state_sampler(self.states), learner,
            rng=np.random.default_rng(seed),
        )

    def test_shapes_and_ranges(self):
        run = self._run(T=50)
        assert len(run.lists) == 50
        assert all(len(L) == 3 for L in run.lists)
        assert run.f_values.shape == (50,)
        assert np.all((run.f_values >= 0.0) & (run.f_values <= 1.0))
        assert run.ledger.n_rounds == 50

    def test_snapshots_follow_stride(self):
        run = self._run(T=50)
        rounds = [t for t, _ in run.snapshots]
        assert rounds == list(range(1, 51))  # stride 1 below 200 rounds
        assert_allclose(run.snapshots[0][1], np.full(6, 1.0 / 6.0))

    def test_deterministic_given_seed(self):
        a = self._run(T=30, seed=5)
        b = self._run(T=30, seed=5)
        assert a.lists == b.lists
        assert_allclose(a.final_probabilities, b.final_probabilities)
        c = self._run(T=30, seed=6)
        assert a.lists != c.lists

    def test_t_zero_returns_initial_snapshot(self):
        run = self._run(T=0)
        assert run.lists == []
        assert len(run.snapshots) == 1
        assert_allclose(run.snapshots[0][1], np.full(6, 1.0 / 6.0))

    def test_learner_size_must_match(self):
        with pytest.raises(ValueError):
            self._run(learner=WeightedMajority(5, loss_range=3.0))

    def test_loss_range_must_cover_k_prime(self):
        with pytest.raises(ValueError):
            self._run(learner=WeightedMajority(6, loss_range=1.0))

    def test_exp3_protocol_runs(self):
        learner = Exp3(6, eta="doubling", gamma=0.05, loss_range=3.0)
        run = self._run(T=60, learner=learner)
        assert run.ledger.n_rounds == 60
        assert np.isfinite(run.ledger.regret())

    def test_regret_drops_with_more_rounds(self):
        short = self._run(T=400, seed=2)
        long = self._run(T=3200, seed=2)
        assert long.ledger.regret() / 3200 < short.ledger.regret() / 400


class TestEvaluation:
    def setup_method(self):
        self.obj = ProbabilisticCoverage(np.array([[0.5, 0.3], [0.2, 0.8]]))
        self.states = self.obj.states()

    def test_point_mass_distribution_is_exact(self):
        probs = np.array([1.0, 0.0])
        est = evaluate_distribution(
            self.obj, self.states, probs, m=1, n_mc=64, rng=np.random.default_rng(0)
        )
        assert_allclose(est.mean, empirical_f(self.obj, self.states, [0]))
        assert est.se <= 1e-12  # identical draws, float-noise std only

    def test_mixture_of_point_masses_averages(self):
        snaps = [(1, np.array([1.0, 0.0])), (2, np.array([0.0, 1.0]))]
        est = evaluate_mixture(
            self.obj, self.states, snaps, m=1, n_mc=4000, rng=np.random.default_rng(1)
        )
        f0 = empirical_f(self.obj, self.states, [0])
        f1 = empirical_f(self.obj, self.states, [1])
        assert abs(est.mean - 0.5 * (f0 + f1)) <= 4.0 * est.se + 1e-12

    def test_empty_snapshots_rejected(self):
        with pytest.raises(ValueError):
            evaluate_mixture(self.obj, self.states, [], 1, 10, np.random.default_rng(0))
        with pytest.raises(ValueError):
            evaluate_distribution(
                self.obj, self.states, np.array([1.0, 0.0]), 1, 0, np.random.default_rng(0)
            )


class TestBoundChecks:
    def test_sampling_ratio_on_tiny_instance(self):
        obj = random_coverage_instance(1, 8, seed=3)
        x = obj.states()[0]
        benchmark, _ = brute_force_opt(obj, [x], 3)
        rep = verify_sampling_ratio(
            obj, x, benchmark, sample_len=3, n_mc=4000, rng=np.random.default_rng(0)
        )
        assert rep.passed
        assert rep.details["ratio"] == pytest.approx(1.0 - (2.0 / 3.0) ** 3)

    def test_sampling_ratio_rejects_empty_benchmark(self):
        obj = random_coverage_instance(1, 4, seed=0)
        with pytest.raises(ValueError):
            verify_sampling_ratio(
                obj, obj.states()[0], [], 2, 10, np.random.default_rng(0)
            )

    def test_full_guarantee_on_short_run(self):
        obj = random_coverage_instance(4, 6, seed=12)
        states = obj.states()
        cfg = SCPConfig(k=3, T=800, seed=0)
        learner = WeightedMajority(6, eta="doubling", loss_range=3.0)
        run = run_scp_context_free(
            cfg, obj, uniform_state_sampler(states), learner,
            rng=np.random.default_rng(3),
        )
        rep = context_free_bound_check(
            run, obj, states, n_mc=1500, rng=np.random.default_rng(4)
        )
        assert rep.passed
        envelope = average_regret_bound_check(run, n_experts=6)
        assert envelope.passed
        assert "PASS" in str(rep)

    def test_bound_check_requires_rounds(self):
        obj = random_coverage_instance(2, 4, seed=0)
        cfg = SCPConfig(k=2, T=0)
        learner = WeightedMajority(4, loss_range=2.0)
        run = run_scp_context_free(
            cfg, obj, uniform_state_sampler(obj.states()), learner,
            rng=np.random.default_rng(0),
        )
        with pytest.raises(ValueError):
            context_free_bound_check(run, obj, obj.states(), 10, np.random.default_rng(0))
