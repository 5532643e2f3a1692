"""Submodular list optimization driven by a single no-regret online learner.

The package implements two training loops over monotone submodular list
objectives: a context-free loop that learns one distribution over items
shared across every list slot, and a contextual loop that reduces list
construction to cost-sensitive classification over per-slot feature vectors.
Baselines (position-wise learners, clairvoyant greedy, exhaustive search)
and statistical validators for the claimed guarantees are included, along
with synthetic environments and a CLI (``scpolicy``).
"""

from .objectives import (
    Objective,
    ProbabilisticCoverage,
    State,
    UnigramCoverage,
    check_monotone,
    check_submodular,
    load_instance,
    marginal_benefit,
    normalized_benefit,
    save_instance,
)

__all__ = [
    "Objective",
    "ProbabilisticCoverage",
    "State",
    "UnigramCoverage",
    "check_monotone",
    "check_submodular",
    "load_instance",
    "marginal_benefit",
    "normalized_benefit",
    "save_instance",
]

__version__ = "0.1.0"
