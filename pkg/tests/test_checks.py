"""Verification battery: fast mode runs green and reports cleanly."""

import numpy as np
import pytest

from scpolicy.checks import CheckResult, run_all_checks


class TestCheckResult:
    def test_str_formats_pass_line(self):
        res = CheckResult("greedy ratio", True, "50/50 instances", 1.234)
        assert str(res) == "[PASS] greedy ratio: 50/50 instances (1.2s)"

    def test_str_formats_fail_line(self):
        res = CheckResult("gap", False, "0.2 > 0.05", 0.05)
        assert str(res).startswith("[FAIL] gap: 0.2 > 0.05")


@pytest.fixture(scope="module")
def fast_results():
    return run_all_checks(seed=0, fast=True)


class TestRunAllChecks:
    def test_fast_battery_is_green(self, fast_results):
        assert len(fast_results) == 13
        failures = [str(r) for r in fast_results if not r.passed]
        assert not failures, "\n".join(failures)

    def test_names_are_unique_and_durations_recorded(self, fast_results):
        names = [r.name for r in fast_results]
        assert len(set(names)) == len(names)
        assert all(np.isfinite(r.duration_s) and r.duration_s >= 0 for r in fast_results)
