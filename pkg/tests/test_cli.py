"""Command-line interface: exit codes, artifacts, determinism."""

import csv
import json
import math
from pathlib import Path

import pytest

from scpolicy import cli
from scpolicy.checks import CheckResult
from scpolicy.objectives import load_instance


def run_cli(*argv) -> int:
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def instance_file(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("gen")
    rc = run_cli(
        "gen-env", "--kind", "random", "--n-states", 5, "--n-items", 7,
        "--seed", 3, "--out", out,
    )
    assert rc == 0
    return out / "instance.json"


def read_rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class TestGenEnv:
    def test_random_instance_loads(self, instance_file):
        obj = load_instance(instance_file)
        assert obj.n_items == 7
        assert len(obj.states()) == 5
        config = json.loads((instance_file.parent / "config.json").read_text())
        assert config["seed"] == 3
        assert "spawn_key" in config["seeding"]

    def test_news_writes_environment_too(self, tmp_path):
        rc = run_cli(
            "gen-env", "--kind", "news", "--n-users", 12, "--n-articles", 6,
            "--seed", 1, "--out", tmp_path,
        )
        assert rc == 0
        env_data = json.loads((tmp_path / "environment.json").read_text())
        assert env_data["kind"] == "news_env"
        assert load_instance(tmp_path / "instance.json").n_items == 6

    def test_unigram_writes_environment_too(self, tmp_path):
        rc = run_cli("gen-env", "--kind", "unigram", "--seed", 2, "--out", tmp_path)
        assert rc == 0
        env_data = json.loads((tmp_path / "environment.json").read_text())
        assert env_data["kind"] == "unigram_env"


class TestRunContextFree:
    def test_artifacts_and_bound(self, instance_file, tmp_path):
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 60,
            "--n-mc", 300, "--seed", 0, "--out", tmp_path,
        )
        assert rc == 0
        rep = tmp_path / "replicate_00"
        rows = read_rows(rep / "rounds.csv")
        assert len(rows) == 60
        assert list(rows[0]) == ["round", "f_value", "expected_loss", "regret", "F_mixture_estimate"]
        ledger = read_rows(rep / "ledger.csv")
        assert list(ledger[0]) == ["round", "expected_loss", "best_fixed_cumloss", "regret"]
        summary = json.loads((rep / "summary.json").read_text())
        assert summary["bound_passed"] is True  # 7^2 lists, brute force runs
        assert summary["final_mixture_estimate"] <= summary["opt_value"] + 3 * summary["final_mixture_se"]

    def test_mixture_column_only_at_snapshot_rounds(self, instance_file, tmp_path):
        # T=201 makes the snapshot stride 2: estimates on odd rounds only
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 201,
            "--n-mc", 100, "--seed", 0, "--out", tmp_path,
        )
        assert rc == 0
        rows = read_rows(tmp_path / "replicate_00" / "rounds.csv")
        for row in rows:
            filled = row["F_mixture_estimate"] != ""
            assert filled == (int(row["round"]) % 2 == 1)

    def test_exp3_and_fixed_eta(self, instance_file, tmp_path):
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 40,
            "--learner", "exp3", "--eta", 0.2, "--n-mc", 100, "--out", tmp_path,
        )
        assert rc == 0
        regrets = [float(r["regret"]) for r in read_rows(tmp_path / "replicate_00" / "ledger.csv")]
        assert all(math.isfinite(v) for v in regrets)

    def test_zero_rounds_run(self, instance_file, tmp_path):
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 0,
            "--eta", "auto", "--n-mc", 100, "--out", tmp_path,
        )
        assert rc == 0
        assert read_rows(tmp_path / "replicate_00" / "rounds.csv") == []
        summary = json.loads((tmp_path / "replicate_00" / "summary.json").read_text())
        assert summary["regret"] == 0.0


class TestReplicateDeterminism:
    def run_three(self, instance_file, out, workers):
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 30,
            "--n-mc", 100, "--seed", 9, "--out", out,
            "--replicates", 3, "--workers", workers,
        )
        assert rc == 0

    def test_rerun_is_byte_identical_and_parallel_matches_serial(self, instance_file, tmp_path):
        a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
        self.run_three(instance_file, a, workers=1)
        self.run_three(instance_file, b, workers=1)
        self.run_three(instance_file, c, workers=3)
        for rep in ("replicate_00", "replicate_01", "replicate_02"):
            for name in ("rounds.csv", "ledger.csv"):
                ref = (a / rep / name).read_bytes()
                assert (b / rep / name).read_bytes() == ref
                assert (c / rep / name).read_bytes() == ref

    def test_replicates_differ_but_first_is_stable_under_count(self, instance_file, tmp_path):
        many, one = tmp_path / "many", tmp_path / "one"
        self.run_three(instance_file, many, workers=1)
        rc = run_cli(
            "run-context-free", "--instance", instance_file, "--k", 2, "--T", 30,
            "--n-mc", 100, "--seed", 9, "--out", one,
        )
        assert rc == 0
        ref = (many / "replicate_00" / "rounds.csv").read_bytes()
        assert (one / "replicate_00" / "rounds.csv").read_bytes() == ref
        assert (many / "replicate_01" / "rounds.csv").read_bytes() != ref


class TestRunContextual:
    def test_unigram_both_baselines(self, tmp_path):
        rc = run_cli(
            "run-contextual", "--env", "unigram", "--k", 3, "--T", 8,
            "--baseline", "both", "--seed", 0, "--out", tmp_path,
        )
        assert rc == 0
        rep = tmp_path / "replicate_00"
        for name in ("rounds_scp.csv", "rounds_conseqopt.csv"):
            rows = read_rows(rep / name)
            assert len(rows) == 8
            assert list(rows[0]) == [
                "round", "train_f", "heldout_f", "failure_prob", "surrogate_loss", "csc_loss",
            ]
            for row in rows:  # failure column mirrors the heldout estimate
                held = float(row["heldout_f"])
                assert abs(float(row["failure_prob"]) - (1.0 - held)) < 1e-9
        summary = json.loads((rep / "summary.json").read_text())
        assert {"scp", "conseqopt"} <= set(summary)

    def test_file_env_and_ranking(self, tmp_path):
        gen = tmp_path / "env"
        assert run_cli("gen-env", "--kind", "unigram", "--seed", 5, "--out", gen) == 0
        rc = run_cli(
            "run-contextual", "--env", "file", "--instance", gen / "environment.json",
            "--reduction", "ranking", "--k", 2, "--T", 6, "--normalized-benefit",
            "--out", tmp_path / "run",
        )
        assert rc == 0
        summary = json.loads((tmp_path / "run" / "replicate_00" / "summary.json").read_text())
        assert 0.0 <= summary["scp"]["final_heldout_f"] <= 1.0


class TestVerifyCommand:
    def test_report_files_and_exit_code(self, tmp_path, monkeypatch, capsys):
        results = [CheckResult("alpha", True, "fine", 0.1), CheckResult("beta", True, "fine", 0.2)]
        monkeypatch.setattr(cli, "run_all_checks", lambda seed, fast: results)
        rc = run_cli("verify", "--fast", "--out", tmp_path)
        assert rc == 0
        report = json.loads((tmp_path / "verify_report.json").read_text())
        assert [r["name"] for r in report] == ["alpha", "beta"]
        text = (tmp_path / "verify_report.txt").read_text()
        assert "[PASS] alpha" in text
        assert "2/2 checks passed" in capsys.readouterr().out

    def test_any_failure_returns_one(self, tmp_path, monkeypatch):
        results = [CheckResult("alpha", True, "fine", 0.1), CheckResult("beta", False, "bad", 0.2)]
        monkeypatch.setattr(cli, "run_all_checks", lambda seed, fast: results)
        assert run_cli("verify", "--out", tmp_path) == 1
        report = json.loads((tmp_path / "verify_report.json").read_text())
        assert report[1]["passed"] is False


class TestBruteForceCommand:
    def test_small_instance(self, instance_file, tmp_path):
        rc = run_cli("brute-force", "--instance", instance_file, "--k", 2, "--out", tmp_path)
        assert rc == 0
        result = json.loads((tmp_path / "brute_force.json").read_text())
        assert len(result["items"]) == 2
        assert 0.0 <= result["value"] <= 1.0


class TestUsageErrors:
    def assert_usage_error(self, tmp_path, *argv):
        out = tmp_path / "untouched"
        assert run_cli(*argv, "--out", out) == 2
        assert not out.exists()  # usage errors must not leave artifacts

    def test_missing_instance_file(self, tmp_path):
        self.assert_usage_error(
            tmp_path, "run-context-free", "--instance", tmp_path / "nope.json", "--k", 2
        )

    def test_bad_k_and_bad_eta(self, instance_file, tmp_path):
        self.assert_usage_error(
            tmp_path, "run-context-free", "--instance", instance_file, "--k", 0
        )
        self.assert_usage_error(
            tmp_path, "run-context-free", "--instance", instance_file, "--k", 2,
            "--eta", "fast",
        )

    def test_contextual_file_env_needs_instance(self, tmp_path):
        self.assert_usage_error(tmp_path, "run-contextual", "--env", "file")

    def test_brute_force_guard(self, tmp_path):
        gen = tmp_path / "big"
        assert run_cli(
            "gen-env", "--kind", "random", "--n-states", 3, "--n-items", 30,
            "--out", gen,
        ) == 0
        self.assert_usage_error(
            tmp_path, "brute-force", "--instance", gen / "instance.json", "--k", 8
        )

    def test_replicate_and_worker_counts(self, instance_file, tmp_path):
        self.assert_usage_error(
            tmp_path, "run-context-free", "--instance", instance_file, "--k", 2,
            "--replicates", 0,
        )
        self.assert_usage_error(
            tmp_path, "run-context-free", "--instance", instance_file, "--k", 2,
            "--workers", 0,
        )
