"""Monotone submodular list objectives over a finite ground set.

Items are plain integer ids indexing a ground set of size ``n_items``.
Lists are ordered sequences of ids; duplicates are permitted (lists
generalize sets). Every objective evaluates to a value in [0, 1], is 0 on
the empty list, and is monotone submodular. Because these properties are
load-bearing for every downstream guarantee, this module also ships
statistical validators (`check_monotone`, `check_submodular`) that probe
them on random lists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

ItemList = Sequence[int]

VALIDATOR_TOL = 1e-12


@dataclass(frozen=True)
class State:
    """One draw from the environment's state distribution.

    ``payload`` carries environment-specific data (user context vector,
    document unigram table) and must not be mutated after construction.
    ``feature_dim`` is the length of the per-state context features, 0 for
    context-free instances.
    """

    id: int
    payload: Any = None
    feature_dim: int = 0


class Objective:
    """Reward function f_x(L) over item lists, evaluated per state.

    Subclasses set ``n_items`` and implement ``evaluate``. The contract:
    evaluate(x, []) == 0, values stay in [0, 1], appending items never
    decreases the value, and marginal gains shrink as the list grows.
    """

    n_items: int = 0

    def evaluate(self, state: State, items: ItemList) -> float:
        raise NotImplementedError

    def states(self) -> tuple[State, ...]:
        raise NotImplementedError

    def marginal_benefits(self, state: State, items: ItemList) -> np.ndarray:
        """Benefit of appending each ground-set item to ``items``.

        Generic fallback that calls ``evaluate`` once per item; subclasses
        override with vectorized versions. Both paths must agree, which the
        test suite checks against the two-evaluation definition.
        """
        base = self.evaluate(state, items)
        prefix = list(items)
        out = np.empty(self.n_items)
        for s in range(self.n_items):
            out[s] = self.evaluate(state, prefix + [s]) - base
        return out

    def item_length(self, item: int) -> float:
        raise TypeError(f"{type(self).__name__} has no item lengths (not budget-constrained)")

    def _check_items(self, items: ItemList) -> None:
        for s in items:
            if not 0 <= int(s) < self.n_items:
                raise ValueError(f"item id {s} outside ground set of size {self.n_items}")


class ProbabilisticCoverage(Objective):
    """Any-success coverage: f_x(L) = 1 - prod_{s in L} (1 - p_x(s)).

    ``success_prob`` is a (n_states, n_items) matrix with entries in [0, 1].
    Duplicate ids contribute once (set semantics over distinct ids), so the
    objective is monotone submodular by construction.
    """

    def __init__(self, success_prob: np.ndarray, state_payloads: Sequence[Any] | None = None):
        p = np.asarray(success_prob, dtype=float)
        if p.ndim != 2:
            raise ValueError("success_prob must be a (n_states, n_items) matrix")
        if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
            raise ValueError("success probabilities must lie in [0, 1]")
        self.success_prob = p
        self.success_prob.setflags(write=False)
        self.n_states, self.n_items = p.shape
        if state_payloads is not None and len(state_payloads) != self.n_states:
            raise ValueError("one payload per state required")
        self._payloads = state_payloads

    def states(self) -> tuple[State, ...]:
        if self._payloads is None:
            return tuple(State(id=i) for i in range(self.n_states))
        return tuple(
            State(id=i, payload=p, feature_dim=int(np.size(p)))
            for i, p in enumerate(self._payloads)
        )

    def evaluate(self, state: State, items: ItemList) -> float:
        self._check_items(items)
        if len(items) == 0:
            return 0.0
        distinct = np.unique(np.asarray(items, dtype=int))
        row = self.success_prob[state.id]
        return float(1.0 - np.prod(1.0 - row[distinct]))

    def evaluate_over_states(self, items: ItemList) -> np.ndarray:
        """f_x(L) for every state at once."""
        self._check_items(items)
        if len(items) == 0:
            return np.zeros(self.n_states)
        distinct = np.unique(np.asarray(items, dtype=int))
        return 1.0 - np.prod(1.0 - self.success_prob[:, distinct], axis=1)

    def marginal_benefits(self, state: State, items: ItemList) -> np.ndarray:
        self._check_items(items)
        row = self.success_prob[state.id]
        survival = 1.0
        if len(items):
            distinct = np.unique(np.asarray(items, dtype=int))
            survival = float(np.prod(1.0 - row[distinct]))
        out = survival * row.copy()
        if len(items):
            out[distinct] = 0.0
        return out


class UnigramCoverage(Objective):
    """Budgeted unigram-coverage: covered reference mass / total reference mass.

    ``reference_counts`` is a (n_states, vocab) table of reference unigram
    counts; ``item_unigrams`` a (n_items, vocab) table of per-item counts;
    ``item_lengths`` byte lengths. Items are taken in list order and an item
    that does not fit the remaining budget contributes zero benefit but stays
    in the list (it still consumes nothing). Duplicate ids add no coverage.
    A ``budget`` of None disables truncation.
    """

    def __init__(
        self,
        reference_counts: np.ndarray,
        item_unigrams: np.ndarray,
        item_lengths: np.ndarray,
        budget: float | None,
        state_payloads: Sequence[Any] | None = None,
    ):
        ref = np.asarray(reference_counts, dtype=float)
        uni = np.asarray(item_unigrams, dtype=float)
        lengths = np.asarray(item_lengths, dtype=float)
        if ref.ndim != 2 or uni.ndim != 2 or ref.shape[1] != uni.shape[1]:
            raise ValueError("reference_counts and item_unigrams must share a vocab axis")
        if np.any(ref < 0) or np.any(uni < 0):
            raise ValueError("unigram counts must be non-negative")
        if lengths.shape != (uni.shape[0],) or np.any(lengths <= 0):
            raise ValueError("item_lengths must be positive, one per item")
        totals = ref.sum(axis=1)
        if np.any(totals <= 0):
            raise ValueError("every state needs positive reference mass")
        self.reference_counts = ref
        self.item_unigrams = uni
        self.item_lengths = lengths
        self.budget = None if budget is None else float(budget)
        for arr in (self.reference_counts, self.item_unigrams, self.item_lengths):
            arr.setflags(write=False)
        self.n_states, self.vocab_size = ref.shape
        self.n_items = uni.shape[0]
        self._totals = totals
        self._payloads = state_payloads

    def states(self) -> tuple[State, ...]:
        if self._payloads is None:
            return tuple(State(id=i) for i in range(self.n_states))
        return tuple(
            State(id=i, payload=p, feature_dim=int(np.size(p)))
            for i, p in enumerate(self._payloads)
        )

    def item_length(self, item: int) -> float:
        self._check_items([item])
        return float(self.item_lengths[item])

    def _fitted(self, items: ItemList) -> tuple[set[int], float]:
        """Distinct ids that fit the budget in list order, and bytes used."""
        fitted: set[int] = set()
        used = 0.0
        for s in items:
            s = int(s)
            length = self.item_lengths[s]
            if self.budget is not None and used + length > self.budget:
                continue
            used += length
            fitted.add(s)
        return fitted, used

    def evaluate(self, state: State, items: ItemList) -> float:
        self._check_items(items)
        fitted, _ = self._fitted(items)
        if not fitted:
            return 0.0
        counts = self.item_unigrams[sorted(fitted)].sum(axis=0)
        ref = self.reference_counts[state.id]
        covered = np.minimum(ref, counts).sum()
        return float(covered / self._totals[state.id])

    def marginal_benefits(self, state: State, items: ItemList) -> np.ndarray:
        self._check_items(items)
        fitted, used = self._fitted(items)
        ref = self.reference_counts[state.id]
        counts = (
            self.item_unigrams[sorted(fitted)].sum(axis=0) if fitted else np.zeros(self.vocab_size)
        )
        covered = np.minimum(ref, counts).sum()
        gains = np.minimum(ref[None, :], counts[None, :] + self.item_unigrams).sum(axis=1) - covered
        out = gains / self._totals[state.id]
        if self.budget is not None:
            remaining = self.budget - used
            out[self.item_lengths > remaining] = 0.0
        if fitted:
            out[sorted(fitted)] = 0.0
        return out


def marginal_benefit(obj: Objective, x: State, items: ItemList, s: int) -> float:
    """b(s | L) = f_x(L + s) - f_x(L), computed from two evaluations.

    Deliberately does not use the objective's vectorized fast path, so it can
    serve as the independent side of consistency checks.
    """
    return obj.evaluate(x, [*items, s]) - obj.evaluate(x, items)


def normalized_benefit(obj: Objective, x: State, items: ItemList, s: int) -> float:
    """Marginal benefit per unit item length, b(s | L) / l(s).

    Only defined for budget-constrained objectives with positive lengths.
    """
    length = obj.item_length(s)
    if length <= 0:
        raise ValueError(f"item {s} has non-positive length {length}")
    return marginal_benefit(obj, x, items, s) / length


@dataclass
class ObjectiveCheckReport:
    """Outcome of a randomized validator run. Violations are reported, not raised."""

    property_name: str
    trials: int
    n_violations: int
    max_violation: float
    examples: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def __str__(self) -> str:
        status = "ok" if self.passed else f"{self.n_violations} violations (max {self.max_violation:.3g})"
        return f"{self.property_name}: {self.trials} trials, {status}"


def _random_list(rng: np.random.Generator, n_items: int, max_len: int) -> list[int]:
    length = int(rng.integers(0, max_len + 1))
    return rng.integers(0, n_items, size=length).tolist()


def check_monotone(obj: Objective, trials: int, rng_seed: int) -> ObjectiveCheckReport:
    """Sample (x, L1, L2) and test f(L1) <= f(L1 + L2) up to tolerance."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    states = obj.states()
    max_len = max(1, (3 * obj.n_items) // 2)
    n_violations = 0
    max_violation = 0.0
    examples: list[dict] = []
    for _ in range(trials):
        x = states[int(rng.integers(len(states)))]
        l1 = _random_list(rng, obj.n_items, max_len)
        l2 = _random_list(rng, obj.n_items, max_len)
        gap = obj.evaluate(x, l1) - obj.evaluate(x, l1 + l2)
        if gap > VALIDATOR_TOL:
            n_violations += 1
            max_violation = max(max_violation, gap)
            if len(examples) < 5:
                examples.append({"state": x.id, "l1": l1, "l2": l2, "gap": gap})
    return ObjectiveCheckReport("monotone", trials, n_violations, max_violation, examples)


def check_submodular(obj: Objective, trials: int, rng_seed: int) -> ObjectiveCheckReport:
    """Sample (x, L1, L2, s) and test b(s | L1) >= b(s | L1 + L2) up to tolerance."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng_seed)
    states = obj.states()
    max_len = max(1, (3 * obj.n_items) // 2)
    n_violations = 0
    max_violation = 0.0
    examples: list[dict] = []
    for _ in range(trials):
        x = states[int(rng.integers(len(states)))]
        l1 = _random_list(rng, obj.n_items, max_len)
        l2 = _random_list(rng, obj.n_items, max_len)
        s = int(rng.integers(obj.n_items))
        gap = marginal_benefit(obj, x, l1 + l2, s) - marginal_benefit(obj, x, l1, s)
        if gap > VALIDATOR_TOL:
            n_violations += 1
            max_violation = max(max_violation, gap)
            if len(examples) < 5:
                examples.append({"state": x.id, "l1": l1, "l2": l2, "s": s, "gap": gap})
    return ObjectiveCheckReport("submodular", trials, n_violations, max_violation, examples)


# ---------------------------------------------------------------------------
# Instance files. JSON with a "kind" tag; see README for the documented schema.

def _counts_to_dict(row: np.ndarray) -> dict[str, float]:
    return {str(i): float(c) for i, c in enumerate(row) if c != 0}


def _counts_from_dict(d: dict, vocab: int) -> np.ndarray:
    out = np.zeros(vocab)
    for key, val in d.items():
        out[int(key)] = float(val)
    return out


def instance_to_dict(obj: Objective) -> dict:
    if isinstance(obj, ProbabilisticCoverage):
        return {
            "kind": "probabilistic_coverage",
            "n_items": obj.n_items,
            "states": [
                {"id": i, "success_prob": row.tolist()}
                for i, row in enumerate(obj.success_prob)
            ],
        }
    if isinstance(obj, UnigramCoverage):
        return {
            "kind": "unigram_coverage",
            "n_items": obj.n_items,
            "vocab_size": obj.vocab_size,
            "budget": obj.budget,
            "items": [
                {"unigrams": _counts_to_dict(obj.item_unigrams[s]), "length": float(obj.item_lengths[s])}
                for s in range(obj.n_items)
            ],
            "states": [
                {"id": i, "reference_counts": _counts_to_dict(obj.reference_counts[i])}
                for i in range(obj.n_states)
            ],
        }
    raise TypeError(f"no file schema for objective type {type(obj).__name__}")


def instance_from_dict(data: dict) -> Objective:
    kind = data.get("kind")
    if kind == "probabilistic_coverage":
        matrix = np.array([s["success_prob"] for s in data["states"]], dtype=float)
        if matrix.shape[1] != data["n_items"]:
            raise ValueError("success_prob rows do not match n_items")
        return ProbabilisticCoverage(matrix)
    if kind == "unigram_coverage":
        vocab = int(data["vocab_size"])
        items = data["items"]
        uni = np.array([_counts_from_dict(it["unigrams"], vocab) for it in items])
        lengths = np.array([it["length"] for it in items], dtype=float)
        ref = np.array([_counts_from_dict(st["reference_counts"], vocab) for st in data["states"]])
        return UnigramCoverage(ref, uni, lengths, data.get("budget"))
    raise ValueError(f"unknown instance kind: {kind!r}")


def save_instance(obj: Objective, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(obj), fh, indent=1)


def load_instance(path) -> Objective:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_dict(json.load(fh))
