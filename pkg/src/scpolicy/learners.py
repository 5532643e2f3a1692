"""No-regret learners over a finite expert set, plus regret accounting.

Two learners: randomized weighted majority for full-information loss
vectors, and EXP3 for partial feedback (only the chosen expert's loss is
observed). Both keep a positive weight per expert, update multiplicatively
in the loss direction, and work with raw losses in [0, loss_range]; the
scaling to [0, 1] happens inside the update. The multiplicative update is
invariant to adding a constant to all losses, so a loss defined as
(best benefit - benefit) traces the same distribution trajectory as feeding
negated benefits directly.
"""

from __future__ import annotations

import csv
import math

import numpy as np

WEIGHT_FLOOR = 1e-300


def optimal_eta(n_experts: int, horizon: int | float) -> float:
    """Fixed learning rate sqrt(8 ln(n) / T) for a known horizon."""
    if n_experts < 2:
        raise ValueError("need at least 2 experts for a meaningful learning rate")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return math.sqrt(8.0 * math.log(n_experts) / horizon)


def doubling_eta(n_experts: int, t: int) -> float:
    """Horizon-free schedule: the fixed-horizon rate with T = 2^floor(log2 t).

    Restarts the rate (not the weights) each time the round count doubles,
    so eta shrinks by sqrt(2) at rounds 2, 4, 8, ...
    """
    if t < 1:
        raise ValueError("rounds are 1-based")
    return optimal_eta(n_experts, 2 ** (t.bit_length() - 1))


def _resolve_eta(eta, n_experts: int):
    """Normalize the eta argument to a callable of the 1-based round index."""
    if eta == "doubling":
        return lambda t: doubling_eta(n_experts, t)
    if callable(eta):
        return eta
    rate = float(eta)
    if not rate > 0:
        raise ValueError(f"eta must be positive, got {rate}")
    return lambda t: rate


class WeightedMajority:
    """Randomized weighted majority over ``n_experts`` arms, loss form.

    ``eta`` is a positive float, a callable t -> rate (t is the 1-based
    index of the update being applied), or the string "doubling".
    ``loss_range`` declares the maximum loss the caller will feed in; losses
    are divided by it before the exponential update.
    """

    def __init__(self, n_experts: int, eta: float | str = "doubling", loss_range: float = 1.0):
        if n_experts < 1:
            raise ValueError("n_experts must be >= 1")
        if loss_range <= 0:
            raise ValueError("loss_range must be positive")
        self.n_experts = n_experts
        self.loss_range = float(loss_range)
        self._eta = _resolve_eta(eta, n_experts) if n_experts > 1 else (lambda t: 0.0)
        self.weights = np.full(n_experts, 1.0 / n_experts)
        self.t = 0

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def sample(self, rng: np.random.Generator, n_samples: int = 1) -> np.ndarray:
        """Draw expert indices i.i.d. from the current distribution."""
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        return rng.choice(self.n_experts, size=n_samples, p=self.probabilities)

    def expected_loss(self, losses: np.ndarray) -> float:
        return float(self.probabilities @ np.asarray(losses, dtype=float))

    def _validated(self, losses) -> np.ndarray:
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.n_experts,):
            raise ValueError(f"expected {self.n_experts} losses, got shape {losses.shape}")
        if not np.all(np.isfinite(losses)):
            raise ValueError("losses must be finite")
        slack = 1e-9 * max(1.0, self.loss_range)
        if losses.min() < -slack or losses.max() > self.loss_range + slack:
            raise ValueError(
                f"losses outside declared range [0, {self.loss_range}]: "
                f"min {losses.min()}, max {losses.max()}"
            )
        return np.clip(losses, 0.0, self.loss_range)

    def update(self, losses) -> np.ndarray:
        """Apply one full-information loss vector; returns the new probabilities."""
        losses = self._validated(losses)
        self.t += 1
        rate = self._eta(self.t)
        self.weights *= np.exp(-rate * losses / self.loss_range)
        self.weights = np.maximum(self.weights, WEIGHT_FLOOR)
        self.weights /= self.weights.sum()
        return self.probabilities


class Exp3:
    """EXP3: weighted majority fed importance-weighted losses, plus exploration.

    The sampling distribution mixes the weight distribution with a uniform
    component of mass ``gamma``. After playing expert ``chosen`` and seeing
    its loss alone, the estimate loss/p_chosen is applied to that expert.
    """

    def __init__(
        self,
        n_experts: int,
        eta: float | str = "doubling",
        gamma: float = 0.05,
        loss_range: float = 1.0,
    ):
        if n_experts < 1:
            raise ValueError("n_experts must be >= 1")
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if loss_range <= 0:
            raise ValueError("loss_range must be positive")
        self.n_experts = n_experts
        self.gamma = float(gamma)
        self.loss_range = float(loss_range)
        self._eta = _resolve_eta(eta, n_experts) if n_experts > 1 else (lambda t: 0.0)
        self.weights = np.full(n_experts, 1.0 / n_experts)
        self.t = 0

    @property
    def probabilities(self) -> np.ndarray:
        base = self.weights / self.weights.sum()
        return (1.0 - self.gamma) * base + self.gamma / self.n_experts

    def sample(self, rng: np.random.Generator, n_samples: int = 1) -> np.ndarray:
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        return rng.choice(self.n_experts, size=n_samples, p=self.probabilities)

    def expected_loss(self, losses: np.ndarray) -> float:
        """Expected loss of the sampling distribution against a full vector.

        Bookkeeping helper for simulations where all losses are computable;
        the update itself never sees more than the chosen entry.
        """
        return float(self.probabilities @ np.asarray(losses, dtype=float))

    def estimated_losses(self, chosen: int, observed_loss: float) -> np.ndarray:
        """Unbiased full-information loss estimate from one observation."""
        p = self.probabilities[chosen]
        if p <= 0:
            raise ValueError("chosen expert has zero probability")
        est = np.zeros(self.n_experts)
        est[chosen] = observed_loss / p
        return est

    def update(self, chosen: int, observed_loss: float) -> np.ndarray:
        if not 0 <= chosen < self.n_experts:
            raise ValueError(f"chosen expert {chosen} out of range")
        if not math.isfinite(observed_loss):
            raise ValueError("observed loss must be finite")
        slack = 1e-9 * max(1.0, self.loss_range)
        if observed_loss < -slack or observed_loss > self.loss_range + slack:
            raise ValueError(f"observed loss {observed_loss} outside [0, {self.loss_range}]")
        est = self.estimated_losses(chosen, float(np.clip(observed_loss, 0.0, self.loss_range)))
        self.t += 1
        rate = self._eta(self.t)
        self.weights *= np.exp(-rate * est / self.loss_range)
        self.weights = np.maximum(self.weights, WEIGHT_FLOOR)
        self.weights /= self.weights.sum()
        return self.probabilities


class RegretLedger:
    """Append-only record of per-round losses; regret recomputable exactly.

    Stores the learner's expected loss and the full loss vector each round,
    so regret(T) = sum_t E[loss_t] - min_s sum_t loss_t(s) can be evaluated
    at any prefix.
    """

    def __init__(self, n_experts: int):
        self.n_experts = n_experts
        self.expected_losses: list[float] = []
        self._cum_expert = np.zeros(n_experts)
        self._rows: list[tuple[int, float, float, float]] = []

    @property
    def n_rounds(self) -> int:
        return len(self.expected_losses)

    def append(self, expected_loss: float, losses) -> None:
        losses = np.asarray(losses, dtype=float)
        if losses.shape != (self.n_experts,):
            raise ValueError(f"expected {self.n_experts} losses, got shape {losses.shape}")
        self.expected_losses.append(float(expected_loss))
        self._cum_expert += losses
        best = float(self._cum_expert.min())
        cum_expected = (self._rows[-1][1] + expected_loss) if self._rows else float(expected_loss)
        # row layout: round, cumulative expected loss, best fixed cumloss, regret
        self._rows.append((len(self.expected_losses), cum_expected, best, cum_expected - best))

    def regret(self, t: int | None = None) -> float:
        if not self._rows:
            return 0.0
        t = len(self._rows) if t is None else t
        if not 1 <= t <= len(self._rows):
            raise ValueError(f"round {t} outside [1, {len(self._rows)}]")
        return self._rows[t - 1][3]

    def best_fixed_cumloss(self, t: int | None = None) -> float:
        if not self._rows:
            return 0.0
        t = len(self._rows) if t is None else t
        return self._rows[t - 1][2]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "expected_loss", "best_fixed_cumloss", "regret"])
            for (rnd, _, best, reg), exp_loss in zip(self._rows, self.expected_losses):
                writer.writerow([rnd, f"{exp_loss:.12g}", f"{best:.12g}", f"{reg:.12g}"])
