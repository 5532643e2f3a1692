"""Command-line harness: environment generation, training runs, verification.

Subcommands: gen-env, run-context-free, run-contextual, verify, brute-force.
Every run writes a config echo (config.json) sufficient to reproduce it
bit-for-bit, per-round CSVs, and a summary.json. A single root --seed is
expanded into per-replicate generators via seed-sequence spawn keys, so
adding replicates never changes the streams earlier replicates see.

Exit codes: 0 success, 1 check or run failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .checks import run_all_checks
from .context_free import (
    SCPConfig,
    brute_force_opt,
    context_free_bound_check,
    evaluate_mixture,
    run_scp_context_free,
    uniform_state_sampler,
)
from .contextual import (
    FeatureMap,
    LinearPolicy,
    PolicyList,
    build_list,
    evaluate_policy,
    run_scp_contextual,
    train_conseqopt,
)
from .environments import (
    env_from_dict,
    env_to_dict,
    generate_news_env,
    generate_unigram_env,
    random_coverage_instance,
    NewsEnv,
)
from .learners import Exp3, WeightedMajority, optimal_eta
from .objectives import instance_from_dict, instance_to_dict

BRUTE_FORCE_SUMMARY_LIMIT = 200_000  # skip the optional opt/bound report above this


class UsageError(Exception):
    """Bad flags, missing files, invalid combinations. Exits 2, no artifacts."""


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise UsageError(f"file not found: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"not valid JSON: {path} ({exc})") from exc


def _load_objective(path: Path):
    """Accept an instance file or an environment file; return the objective."""
    data = _load_json(path)
    kind = data.get("kind", "")
    if kind.endswith("_env"):
        return env_from_dict(data).objective()
    try:
        return instance_from_dict(data)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"cannot read objective from {path}: {exc}") from exc


def _load_env(path: Path):
    data = _load_json(path)
    try:
        return env_from_dict(data)
    except (KeyError, ValueError) as exc:
        raise UsageError(f"cannot read environment from {path}: {exc}") from exc


def _replicate_rng(root_seed: int, replicate: int, stream: int) -> np.random.Generator:
    """Stream 0 drives training, stream 1 evaluation; independent per replicate."""
    return np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=(replicate, stream)))


def _config_echo(args: argparse.Namespace, replicate: int | None = None) -> dict:
    echo = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("func",)
    }
    echo["version"] = __version__
    echo["seeding"] = "default_rng(SeedSequence(seed, spawn_key=(replicate, stream)))"
    if replicate is not None:
        echo["replicate"] = replicate
    return echo


def _prepare_out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# gen-env

def cmd_gen_env(args) -> int:
    out = _prepare_out(args)
    if args.kind == "news":
        env = generate_news_env(
            n_users=args.n_users,
            n_articles=args.n_articles,
            d_base=args.d_base,
            seed=args.seed,
            n_clusters=args.n_clusters if args.n_clusters is not None else 5,
            noise=args.noise,
        )
        _write_json(out / "instance.json", instance_to_dict(env.objective()))
        _write_json(out / "environment.json", env_to_dict(env))
    elif args.kind == "unigram":
        env = generate_unigram_env(
            n_clusters=args.n_clusters if args.n_clusters is not None else 3,
            n_sentences=args.n_sentences,
            vocab=args.vocab,
            budget=args.budget,
            seed=args.seed,
        )
        _write_json(out / "instance.json", instance_to_dict(env.objective()))
        _write_json(out / "environment.json", env_to_dict(env))
    else:
        obj = random_coverage_instance(args.n_states, args.n_items, seed=args.seed)
        _write_json(out / "instance.json", instance_to_dict(obj))
    _write_json(out / "config.json", _config_echo(args))
    print(f"wrote {out / 'instance.json'}")
    return 0


# ---------------------------------------------------------------------------
# run-context-free

def _context_free_replicate(payload: dict) -> dict:
    rep = payload["replicate"]
    rep_dir = Path(payload["out_dir"])
    rep_dir.mkdir(parents=True, exist_ok=True)
    try:
        obj = _load_objective(Path(payload["instance"]))
        states = obj.states()
        k, m, T = payload["k"], payload["m"], payload["T"]
        config = SCPConfig(k=k, T=T, m=m, seed=payload["seed"])
        k_prime = float(min(m, k))
        eta = payload["eta"]
        # max(T, 1): at T=0 no update ever fires, any valid rate will do
        rate = optimal_eta(obj.n_items, max(T, 1)) if eta == "auto" else float(eta)
        if payload["learner"] == "wm":
            learner = WeightedMajority(obj.n_items, eta=rate, loss_range=k_prime)
        else:
            learner = Exp3(obj.n_items, eta=rate, gamma=0.05, loss_range=k_prime)
        run_rng = _replicate_rng(payload["root_seed"], rep, 0)
        run = run_scp_context_free(
            config, obj, uniform_state_sampler(states), learner, rng=run_rng
        )
        eval_rng = _replicate_rng(payload["root_seed"], rep, 1)

        # progressive mixture estimates at snapshot rounds, cheap per point
        progressive: dict[int, float] = {}
        for j in range(len(run.snapshots)):
            t_j = run.snapshots[j][0]
            est = evaluate_mixture(
                obj, states, run.snapshots[: j + 1], m, n_mc=200, rng=eval_rng
            )
            progressive[t_j] = est.mean

        with open(rep_dir / "rounds.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "f_value", "expected_loss", "regret", "F_mixture_estimate"])
            for t in range(1, T + 1):
                writer.writerow([
                    t,
                    _fmt(run.f_values[t - 1]),
                    _fmt(run.ledger.expected_losses[t - 1]),
                    _fmt(run.ledger.regret(t)),
                    _fmt(progressive[t]) if t in progressive else "",
                ])
        run.ledger.to_csv(rep_dir / "ledger.csv")

        final_mix = evaluate_mixture(
            obj, states, run.snapshots, m, n_mc=payload["n_mc"], rng=eval_rng
        )
        summary = {
            "final_mixture_estimate": final_mix.mean,
            "final_mixture_se": final_mix.se,
            "regret": run.ledger.regret() if T else 0.0,
            "avg_regret": (run.ledger.regret() / T) if T else 0.0,
            "rounds": T,
            "n_items": obj.n_items,
            "n_states": len(states),
        }
        if obj.n_items**k <= BRUTE_FORCE_SUMMARY_LIMIT and T:
            opt_items, opt_value = brute_force_opt(obj, states, k)
            rep_check = context_free_bound_check(
                run, obj, states, n_mc=payload["n_mc"], rng=eval_rng, opt_value=opt_value
            )
            summary.update(
                opt_list=opt_items,
                opt_value=opt_value,
                bound_value=rep_check.bound,
                bound_passed=rep_check.passed,
                bound_details=rep_check.details,
            )
        else:
            summary["bound_passed"] = None
            summary["bound_note"] = "search space above limit or empty run; opt skipped"
        _write_json(rep_dir / "summary.json", summary)
        _write_json(rep_dir / "config.json", dict(payload, kind="context-free"))
        return {"replicate": rep, "ok": True, "summary": summary}
    except UsageError:
        raise
    except Exception:
        (rep_dir / "error.txt").write_text(traceback.format_exc(), encoding="utf-8")
        return {"replicate": rep, "ok": False}


def cmd_run_context_free(args) -> int:
    instance = Path(args.instance)
    if not instance.is_file():
        raise UsageError(f"instance file not found: {instance}")
    _load_objective(instance)  # validate before creating any artifacts
    if args.T < 0 or args.k < 1:
        raise UsageError("need T >= 0 and k >= 1")
    if args.eta != "auto":
        try:
            if float(args.eta) <= 0:
                raise UsageError("eta must be positive or 'auto'")
        except ValueError:
            raise UsageError(f"eta must be a number or 'auto', got {args.eta!r}")
    out = _prepare_out(args)
    payload_base = {
        "instance": str(instance),
        "k": args.k,
        "m": args.m if args.m is not None else args.k,
        "T": args.T,
        "learner": args.learner,
        "eta": args.eta,
        "n_mc": args.n_mc,
        "root_seed": args.seed,
    }
    return _run_replicates(args, out, _context_free_replicate, payload_base)


# ---------------------------------------------------------------------------
# run-contextual

def _resolve_contextual_env(payload: dict):
    if payload["env"] == "news":
        env = generate_news_env(seed=payload["root_seed"])
    elif payload["env"] == "unigram":
        env = generate_unigram_env(seed=payload["root_seed"])
    else:
        env = _load_env(Path(payload["instance"]))
    if isinstance(env, NewsEnv):
        obj = env.objective()
        all_states = obj.states()
        train = tuple(all_states[i] for i in env.train_users)
        heldout = tuple(all_states[i] for i in env.test_users)
    else:
        obj = env.objective()
        train = obj.states()
        heldout = obj.states()
    fm = FeatureMap(env.base_features, env.base_feature_dim, obj.n_items)
    return env, obj, train, heldout, fm


def _stride_filled(snapshot_values: list[tuple[int, float]], T: int) -> list[float]:
    """Step-function fill: row t carries the latest snapshot value at or before t."""
    out = []
    idx = -1
    current = math.nan
    for t in range(1, T + 1):
        while idx + 1 < len(snapshot_values) and snapshot_values[idx + 1][0] <= t:
            idx += 1
            current = snapshot_values[idx][1]
        out.append(current)
    return out


def _write_contextual_csv(path: Path, T: int, f_values, heldout_series, surro, csc) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "train_f", "heldout_f", "failure_prob", "surrogate_loss", "csc_loss"])
        for t in range(1, T + 1):
            held = heldout_series[t - 1]
            writer.writerow([
                t,
                _fmt(f_values[t - 1]),
                _fmt(held),
                _fmt(1.0 - held),
                _fmt(surro[t - 1]),
                _fmt(csc[t - 1]),
            ])


def _contextual_replicate(payload: dict) -> dict:
    rep = payload["replicate"]
    rep_dir = Path(payload["out_dir"])
    rep_dir.mkdir(parents=True, exist_ok=True)
    try:
        env, obj, train, heldout, fm = _resolve_contextual_env(payload)
        config = SCPConfig(
            k=payload["k"], T=payload["T"], m=payload["m"], seed=payload["seed"]
        )
        m, T = config.m, config.T
        summary: dict = {"rounds": T, "n_items": obj.n_items, "heldout_states": len(heldout)}
        normalized = payload["normalized_benefit"]

        if payload["baseline"] in ("scp", "both"):
            run = run_scp_contextual(
                config,
                obj,
                uniform_state_sampler(train),
                payload["reduction"],
                fm,
                eta0=payload["eta0"],
                rng=_replicate_rng(payload["root_seed"], rep, 0),
                store_examples=False,
                use_normalized_benefit=normalized,
            )
            held_points = [
                (t, evaluate_policy(obj, heldout, LinearPolicy(h, mode=run.policy.mode), m, fm))
                for t, h in run.snapshots
            ]
            series = _stride_filled(held_points, T)
            final_f = evaluate_policy(obj, heldout, run.policy, m, fm)
            _write_contextual_csv(
                rep_dir / "rounds_scp.csv", T, run.f_values, series,
                run.surrogate_losses, run.csc_losses,
            )
            summary["scp"] = {
                "final_heldout_f": final_f,
                "final_failure_prob": 1.0 - final_f,
                "total_csc_loss": float(run.csc_losses.sum()) if T else 0.0,
            }

        if payload["baseline"] in ("conseqopt", "both"):
            record: dict = {}
            policies = train_conseqopt(
                config,
                obj,
                uniform_state_sampler(train),
                payload["reduction"],
                fm,
                eta0=payload["eta0"],
                rng=_replicate_rng(payload["root_seed"], rep, 2),
                use_normalized_benefit=normalized,
                record=record,
            )
            held_points = [
                (t, evaluate_policy(obj, heldout, pl, m, fm))
                for t, pl in record["snapshots"]
            ]
            series = _stride_filled(held_points, T)
            final_f = evaluate_policy(obj, heldout, policies, m, fm)
            _write_contextual_csv(
                rep_dir / "rounds_conseqopt.csv", T, record["f_values"], series,
                record["surrogate_losses"], record["csc_losses"],
            )
            summary["conseqopt"] = {
                "final_heldout_f": final_f,
                "final_failure_prob": 1.0 - final_f,
                "total_csc_loss": float(record["csc_losses"].sum()) if T else 0.0,
            }

        _write_json(rep_dir / "summary.json", summary)
        _write_json(rep_dir / "config.json", dict(payload, kind="contextual"))
        return {"replicate": rep, "ok": True, "summary": summary}
    except UsageError:
        raise
    except Exception:
        (rep_dir / "error.txt").write_text(traceback.format_exc(), encoding="utf-8")
        return {"replicate": rep, "ok": False}


def cmd_run_contextual(args) -> int:
    if args.env == "file":
        if args.instance is None:
            raise UsageError("--env file requires --instance")
        if not Path(args.instance).is_file():
            raise UsageError(f"environment file not found: {args.instance}")
        _load_env(Path(args.instance))
    if args.T < 0 or args.k < 1:
        raise UsageError("need T >= 0 and k >= 1")
    if args.eta0 <= 0:
        raise UsageError("eta0 must be positive")
    out = _prepare_out(args)
    payload_base = {
        "env": args.env,
        "instance": str(args.instance) if args.instance else None,
        "reduction": args.reduction,
        "k": args.k,
        "m": args.m if args.m is not None else args.k,
        "T": args.T,
        "eta0": args.eta0,
        "baseline": args.baseline,
        "normalized_benefit": args.normalized_benefit,
        "root_seed": args.seed,
    }
    return _run_replicates(args, out, _contextual_replicate, payload_base)


# ---------------------------------------------------------------------------
# verify and brute-force

def cmd_verify(args) -> int:
    out = _prepare_out(args)
    results = run_all_checks(seed=args.seed, fast=args.fast)
    lines = [str(r) for r in results]
    for line in lines:
        print(line)
    _write_json(out / "config.json", _config_echo(args))
    _write_json(
        out / "verify_report.json",
        [
            {"name": r.name, "passed": r.passed, "message": r.message, "seconds": r.duration_s}
            for r in results
        ],
    )
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 1 if n_fail else 0


def cmd_brute_force(args) -> int:
    instance = Path(args.instance)
    if not instance.is_file():
        raise UsageError(f"instance file not found: {instance}")
    obj = _load_objective(instance)
    if args.k < 1:
        raise UsageError("k must be >= 1")
    try:
        items, value = brute_force_opt(obj, obj.states(), args.k)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = _prepare_out(args)
    _write_json(out / "config.json", _config_echo(args))
    _write_json(out / "brute_force.json", {"items": items, "value": value, "k": args.k})
    print(f"best length-{args.k} list: {items} value {value:.6f}")
    return 0


# ---------------------------------------------------------------------------
# replicate orchestration

def _run_replicates(args, out: Path, worker, payload_base: dict) -> int:
    payloads = []
    for rep in range(args.replicates):
        rep_dir = out / f"replicate_{rep:02d}"
        payloads.append(
            dict(payload_base, replicate=rep, seed=args.seed, out_dir=str(rep_dir))
        )
    if args.workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(worker, payloads))
    else:
        results = [worker(p) for p in payloads]
    _write_json(out / "config.json", _config_echo(args))
    _write_json(
        out / "summary.json",
        {
            "replicates": args.replicates,
            "ok": [r["ok"] for r in results],
            "summaries": [r.get("summary") for r in results],
        },
    )
    failures = [r["replicate"] for r in results if not r["ok"]]
    if failures:
        print(f"replicates failed: {failures} (see error.txt in their directories)", file=sys.stderr)
        return 1
    print(f"wrote {args.replicates} replicate(s) under {out}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scpolicy",
        description="Submodular list optimization: training loops, baselines, verification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    common.add_argument("--out", type=Path, default=Path("scpolicy-out"), help="output directory")
    common.add_argument("--replicates", type=int, default=1, help="independent repeats")
    common.add_argument("--workers", type=int, default=1, help="parallel replicate workers")

    g = sub.add_parser("gen-env", parents=[common], help="generate and save an environment")
    g.add_argument("--kind", choices=["news", "unigram", "random"], required=True)
    g.add_argument("--n-users", type=int, default=75)
    g.add_argument("--n-articles", type=int, default=30)
    g.add_argument("--d-base", type=int, default=5)
    g.add_argument("--n-clusters", type=int, default=None)
    g.add_argument("--noise", type=float, default=0.1)
    g.add_argument("--n-sentences", type=int, default=36)
    g.add_argument("--vocab", type=int, default=256)
    g.add_argument("--budget", type=float, default=665.0)
    g.add_argument("--n-states", type=int, default=6)
    g.add_argument("--n-items", type=int, default=10)
    g.set_defaults(func=cmd_gen_env)

    r1 = sub.add_parser(
        "run-context-free", parents=[common], help="train one shared item distribution"
    )
    r1.add_argument("--instance", type=Path, required=True)
    r1.add_argument("--k", type=int, required=True)
    r1.add_argument("--m", type=int, default=None, help="constructed list length (default k)")
    r1.add_argument("--T", type=int, default=2000)
    r1.add_argument("--learner", choices=["wm", "exp3"], default="wm")
    r1.add_argument("--eta", default="auto", help="learning rate or 'auto'")
    r1.add_argument("--n-mc", type=int, default=2000, help="Monte Carlo draws for evaluation")
    r1.set_defaults(func=cmd_run_context_free)

    r2 = sub.add_parser("run-contextual", parents=[common], help="train a contextual policy")
    r2.add_argument("--env", choices=["news", "unigram", "file"], default="news")
    r2.add_argument("--instance", type=Path, default=None, help="environment file for --env file")
    r2.add_argument("--reduction", choices=["regression", "ranking"], default="regression")
    r2.add_argument("--k", type=int, default=5)
    r2.add_argument("--m", type=int, default=None)
    r2.add_argument("--T", type=int, default=200)
    r2.add_argument("--eta0", type=float, default=0.5)
    r2.add_argument("--baseline", choices=["scp", "conseqopt", "both"], default="scp")
    r2.add_argument(
        "--normalized-benefit", action="store_true",
        help="score items by benefit per unit length (budgeted objectives)",
    )
    r2.set_defaults(func=cmd_run_contextual)

    v = sub.add_parser("verify", parents=[common], help="run every guarantee check")
    v.add_argument("--fast", action="store_true", help="smaller configs, same checks")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("brute-force", parents=[common], help="exhaustive list search")
    b.add_argument("--instance", type=Path, required=True)
    b.add_argument("--k", type=int, required=True)
    b.set_defaults(func=cmd_brute_force)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.replicates < 1 or args.workers < 1:
        print("error: --replicates and --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
