"""Acceptance gate: the ten headline guarantees at full resolution.

Each test runs one verification check with its parameters pinned (a drifting
default elsewhere cannot silently weaken the gate) and prints the check's
pass/fail line; run with `pytest -v -s tests/test_acceptance.py` to see them.
"""

from scpolicy.checks import (
    check_context_free_bound,
    check_gradient_fd,
    check_greedy_ratio,
    check_loss_exactness,
    check_news_data_efficiency,
    check_objective_validators,
    check_realizable_gap,
    check_regret_sublinearity,
    check_sampling_guarantee,
    check_scaled_ratios,
)


def settle(result, budget_s=None):
    print(result)
    assert result.passed, result.message
    if budget_s is not None:
        assert result.duration_s < budget_s, f"took {result.duration_s:.1f}s, budget {budget_s}s"


def test_criterion_01_greedy_ratio():
    settle(check_greedy_ratio(seed=0, n_instances=50), budget_s=10.0)


def test_criterion_02_scaled_list_ratios():
    settle(check_scaled_ratios(seed=0, n_instances=20))


def test_criterion_03_sampling_guarantee():
    settle(check_sampling_guarantee(seed=0, n_seeds=10, n_mc=10_000), budget_s=30.0)


def test_criterion_04_context_free_guarantee():
    settle(
        check_context_free_bound(seed=0, n_seeds=20, T=5000, n_mc=2000, max_violations=2),
        budget_s=120.0,
    )


def test_criterion_05_regret_sublinearity():
    settle(check_regret_sublinearity(seed=0, n_seeds=10))


def test_criterion_06_loss_exactness():
    settle(check_loss_exactness(seed=0, n_cases=100))


def test_criterion_07_news_data_efficiency():
    settle(
        check_news_data_efficiency(seed=0, sizes=(10, 20, 40), n_seeds=5, margin=0.02),
        budget_s=300.0,
    )


def test_criterion_08_gradient_oracle_agreement():
    settle(check_gradient_fd(seed=0, n_points=20))


def test_criterion_09_realizable_convex_gap():
    settle(check_realizable_gap(seed=0, T=2000))


def test_criterion_10_objective_validators():
    settle(check_objective_validators(seed=0, trials=10_000))
