"""Context-free training loop over a fixed distribution of states.

One no-regret learner holds a single distribution over the ground set; each
round it samples a full list of m items, scores every item by its discounted
cumulative benefit along that list, and feeds the induced loss vector back.
Also here: the clairvoyant greedy and exhaustive-search baselines, Monte
Carlo evaluation of item distributions, and empirical checks of the
sampling and average-regret guarantees.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .learners import Exp3, RegretLedger, WeightedMajority
from .objectives import ItemList, Objective, ProbabilisticCoverage, State, marginal_benefit

BRUTE_FORCE_GUARD = 10**7


def position_weights(m: int, k: int) -> np.ndarray:
    """Weights (1 - 1/k)^(m-i) for positions i = 1..m; the last is always 1."""
    if m < 1 or k < 1:
        raise ValueError("m and k must be >= 1")
    return np.power(1.0 - 1.0 / k, m - np.arange(1, m + 1, dtype=float))


def loss_range(m: int, k: int) -> float:
    """Largest possible discounted cumulative benefit: min(m, k)."""
    return float(min(m, k))


def discounted_cumulative_benefit(obj: Objective, x: State, items: ItemList, s: int, k: int) -> float:
    """Position-weighted sum of s's marginal benefits over prefixes of ``items``.

    Reference implementation built from plain evaluate() differences. The
    training loop uses the vectorized ``discounted_benefits`` instead; the
    two are tested against each other.
    """
    w = position_weights(len(items), k)
    total = 0.0
    for i in range(len(items)):
        total += w[i] * marginal_benefit(obj, x, items[:i], s)
    return total


def discounted_benefits(obj: Objective, x: State, items: ItemList, k: int) -> np.ndarray:
    """Discounted cumulative benefit of every ground-set item at once."""
    w = position_weights(len(items), k)
    r = np.zeros(obj.n_items)
    for i in range(len(items)):
        r += w[i] * obj.marginal_benefits(x, items[:i])
    return r


def scp_losses(obj: Objective, x: State, items: ItemList, k: int) -> np.ndarray:
    """Per-item loss: best discounted benefit minus the item's own.

    Non-negative with an exact zero at the argmax (ties toward the lowest
    index do not change the vector).
    """
    r = discounted_benefits(obj, x, items, k)
    return r.max() - r


def empirical_f(obj: Objective, states: Sequence[State], items: ItemList) -> float:
    """Average objective value over an explicit state sample."""
    if isinstance(obj, ProbabilisticCoverage):
        ids = [x.id for x in states]
        return float(obj.evaluate_over_states(items)[ids].mean())
    return float(np.mean([obj.evaluate(x, items) for x in states]))


def uniform_state_sampler(states: Sequence[State]) -> Callable[[np.random.Generator], State]:
    states = tuple(states)
    if not states:
        raise ValueError("need at least one state")

    def sample(rng: np.random.Generator) -> State:
        return states[int(rng.integers(len(states)))]

    return sample


@dataclass
class SCPConfig:
    """Shared knobs for the training loops.

    ``m`` is the length of the list constructed each round, ``k`` the length
    of the benchmark list the guarantees compare against, ``T`` the number of
    rounds. ``m`` defaults to ``k``.
    """

    k: int
    T: int
    m: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.m is None:
            self.m = self.k
        if self.k < 1 or self.m < 1:
            raise ValueError("k and m must be >= 1")
        if self.T < 0:
            raise ValueError("T must be >= 0")

    @property
    def snapshot_stride(self) -> int:
        return max(1, math.ceil(self.T / 200))


@dataclass
class ContextFreeRun:
    config: SCPConfig
    state_ids: np.ndarray
    lists: list[tuple[int, ...]]
    f_values: np.ndarray
    snapshots: list[tuple[int, np.ndarray]]
    final_probabilities: np.ndarray
    ledger: RegretLedger

    @property
    def sampled_states(self) -> np.ndarray:
        return self.state_ids


def run_scp_context_free(
    config: SCPConfig,
    obj: Objective,
    state_sampler: Callable[[np.random.Generator], State],
    learner: WeightedMajority | Exp3,
    rng: np.random.Generator | None = None,
) -> ContextFreeRun:
    """Run T rounds of sample-list / observe-state / feed-losses.

    The ledger always records the full-information loss vector, even when
    the learner itself only consumes bandit feedback (EXP3), so regret is
    accounted identically across learners. With EXP3 the learner observes
    min(m,k) minus the discounted benefit of one extra sampled item, which
    differs from the full-information loss by a per-round constant and so
    ranks items identically.
    """
    if learner.n_experts != obj.n_items:
        raise ValueError("learner expert set must equal the ground set")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m, k, T = config.m, config.k, config.T
    k_prime = loss_range(m, k)
    if learner.loss_range < k_prime - 1e-12:
        raise ValueError(
            f"learner declares loss range {learner.loss_range}, need at least {k_prime}"
        )
    ledger = RegretLedger(obj.n_items)
    state_ids = np.empty(T, dtype=int)
    f_values = np.empty(T)
    lists: list[tuple[int, ...]] = []
    snapshots: list[tuple[int, np.ndarray]] = []
    stride = config.snapshot_stride
    for t in range(1, T + 1):
        if (t - 1) % stride == 0:
            snapshots.append((t, learner.probabilities.copy()))
        items = learner.sample(rng, m).tolist()
        x = state_sampler(rng)
        try:
            r = discounted_benefits(obj, x, items, k)
            f_values[t - 1] = obj.evaluate(x, items)
        except Exception as exc:
            raise RuntimeError(
                f"objective evaluation failed at round {t} (state {x.id}, list {items})"
            ) from exc
        losses = r.max() - r
        ledger.append(learner.expected_loss(losses), losses)
        if isinstance(learner, Exp3):
            chosen = int(learner.sample(rng, 1)[0])
            learner.update(chosen, k_prime - r[chosen])
        else:
            learner.update(losses)
        state_ids[t - 1] = x.id
        lists.append(tuple(items))
    if T == 0:
        snapshots.append((1, learner.probabilities.copy()))
    return ContextFreeRun(
        config=config,
        state_ids=state_ids,
        lists=lists,
        f_values=f_values,
        snapshots=snapshots,
        final_probabilities=learner.probabilities.copy(),
        ledger=ledger,
    )


# ---------------------------------------------------------------------------
# Baselines.

def greedy_clairvoyant(obj: Objective, states: Sequence[State], k: int) -> list[int]:
    """Length-k list built by argmax of average marginal benefit per slot."""
    if not states:
        raise ValueError("need at least one state")
    if k < 1:
        raise ValueError("k must be >= 1")
    items: list[int] = []
    for _ in range(k):
        avg = np.zeros(obj.n_items)
        for x in states:
            avg += obj.marginal_benefits(x, items)
        items.append(int(np.argmax(avg)))
    return items


def brute_force_opt(
    obj: Objective, states: Sequence[State], k: int
) -> tuple[list[int], float]:
    """Exhaustive search over all ordered length-k lists (with repetition)."""
    if not states:
        raise ValueError("need at least one state")
    n_lists = obj.n_items**k
    if n_lists > BRUTE_FORCE_GUARD:
        raise ValueError(
            f"search space {obj.n_items}^{k} = {n_lists} exceeds guard {BRUTE_FORCE_GUARD}"
        )
    best_items: tuple[int, ...] | None = None
    best_value = -np.inf
    for cand in itertools.product(range(obj.n_items), repeat=k):
        value = empirical_f(obj, states, cand)
        if value > best_value:
            best_value = value
            best_items = cand
    assert best_items is not None
    return list(best_items), float(best_value)


# ---------------------------------------------------------------------------
# Monte Carlo evaluation and guarantee checks.

@dataclass
class MCEstimate:
    mean: float
    se: float
    n_mc: int


def _mc_values(
    obj: Objective,
    states: Sequence[State],
    prob_list: Sequence[np.ndarray],
    m: int,
    n_mc: int,
    rng: np.random.Generator,
) -> np.ndarray:
    vals = np.empty(n_mc)
    n_dists = len(prob_list)
    which = rng.integers(n_dists, size=n_mc) if n_dists > 1 else np.zeros(n_mc, dtype=int)
    for j in range(n_mc):
        items = rng.choice(obj.n_items, size=m, p=prob_list[which[j]])
        vals[j] = empirical_f(obj, states, items)
    return vals


def evaluate_distribution(
    obj: Objective,
    states: Sequence[State],
    probabilities: np.ndarray,
    m: int,
    n_mc: int,
    rng: np.random.Generator,
) -> MCEstimate:
    """Estimate E_{L ~ p^m}[mean_x f_x(L)] by sampling lists."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    vals = _mc_values(obj, states, [np.asarray(probabilities, dtype=float)], m, n_mc, rng)
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return MCEstimate(float(vals.mean()), se, n_mc)


def evaluate_mixture(
    obj: Objective,
    states: Sequence[State],
    snapshots: Sequence[tuple[int, np.ndarray]],
    m: int,
    n_mc: int,
    rng: np.random.Generator,
) -> MCEstimate:
    """Estimate the value of the uniform mixture over stored snapshots.

    The exact guarantee mixes over every round's distribution; snapshots
    subsample that sequence evenly, which is the documented approximation.
    """
    if not snapshots:
        raise ValueError("no snapshots stored")
    vals = _mc_values(obj, states, [p for _, p in snapshots], m, n_mc, rng)
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return MCEstimate(float(vals.mean()), se, n_mc)


@dataclass
class BoundReport:
    """One empirical inequality: achieved value vs a guaranteed floor."""

    name: str
    value: float
    bound: float
    passed: bool
    details: dict = field(default_factory=dict)

    def __str__(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"[{verdict}] {self.name}: value {self.value:.6f} vs bound {self.bound:.6f}"


def verify_sampling_ratio(
    obj: Objective,
    x: State,
    benchmark: ItemList,
    sample_len: int,
    n_mc: int,
    rng: np.random.Generator,
) -> BoundReport:
    """Sampling uniformly from a list keeps a (1-(1-1/|B|)^k) fraction of its value.

    Builds n_mc lists of ``sample_len`` items drawn uniformly (with
    replacement) from ``benchmark`` and checks the mean objective against
    the ratio bound minus 3 standard errors.
    """
    b = list(benchmark)
    if not b:
        raise ValueError("benchmark list must be non-empty")
    vals = np.empty(n_mc)
    for j in range(n_mc):
        picks = rng.integers(len(b), size=sample_len)
        vals[j] = obj.evaluate(x, [b[i] for i in picks])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    f_b = obj.evaluate(x, b)
    ratio = 1.0 - (1.0 - 1.0 / len(b)) ** sample_len
    bound = ratio * f_b - 3.0 * se
    return BoundReport(
        name=f"sampling guarantee (|B|={len(b)}, k={sample_len})",
        value=mean,
        bound=bound,
        passed=mean >= bound,
        details={"f_benchmark": f_b, "ratio": ratio, "se": se, "n_mc": n_mc},
    )


def average_regret_bound_check(
    run: ContextFreeRun, n_experts: int, delta_unused: float = 0.05
) -> BoundReport:
    """Average regret vs the 2*sqrt(ln(n)/T)*L_max envelope for tuned rates."""
    T = run.config.T
    if T < 1:
        raise ValueError("run has no rounds")
    l_max = loss_range(run.config.m, run.config.k)
    avg_regret = run.ledger.regret() / T
    bound = 2.0 * math.sqrt(math.log(n_experts) / T) * l_max
    return BoundReport(
        name="average regret envelope",
        value=avg_regret,
        bound=bound,
        passed=avg_regret <= bound,
        details={"regret": run.ledger.regret(), "T": T, "loss_range": l_max},
    )


def context_free_bound_check(
    run: ContextFreeRun,
    obj: Objective,
    states: Sequence[State],
    n_mc: int,
    rng: np.random.Generator,
    delta: float = 0.05,
    opt_value: float | None = None,
) -> BoundReport:
    """Mixture value vs the (1 - e^{-m/k}) guarantee with regret and deviation terms.

    ``opt_value`` is the empirical value of the best fixed length-k list; it
    is found by exhaustive search over ``states`` when not supplied. The
    deviation term uses the stated confidence level, so an individual run can
    legitimately land below the bound with probability up to delta.
    """
    cfg = run.config
    if cfg.T < 1:
        raise ValueError("run has no rounds")
    if opt_value is None:
        _, opt_value = brute_force_opt(obj, states, cfg.k)
    mix = evaluate_mixture(obj, states, run.snapshots, cfg.m, n_mc, rng)
    k_prime = loss_range(cfg.m, cfg.k)
    ratio = 1.0 - math.exp(-cfg.m / cfg.k)
    deviation = 3.0 * math.sqrt(2.0 * k_prime * math.log(2.0 / delta) / cfg.T)
    bound = ratio * opt_value - run.ledger.regret() / cfg.T - deviation
    return BoundReport(
        name=f"context-free guarantee (m={cfg.m}, k={cfg.k}, T={cfg.T})",
        value=mix.mean,
        bound=bound,
        passed=mix.mean >= bound,
        details={
            "mixture_se": mix.se,
            "opt_value": opt_value,
            "ratio": ratio,
            "avg_regret": run.ledger.regret() / cfg.T,
            "deviation_term": deviation,
            "delta": delta,
        },
    )
