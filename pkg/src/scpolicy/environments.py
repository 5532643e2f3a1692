"""Synthetic state distributions for the two application-style benchmarks.

``generate_news_env`` builds a clustered population of users with linear
click preferences over topic-structured articles; the objective is the
probability that a user clicks at least one recommended article. The
user's observable context is a noise-corrupted soft cluster membership, so
contextual policies have a real (but imperfect) signal to exploit.

``generate_unigram_env`` builds a budgeted sentence-selection instance with
a planted structure per cluster: short "tile" sentences that jointly cover
most of the reference mass, one long redundant sentence whose raw benefit
beats any tile but whose benefit per byte is worse, and zero-coverage
distractors. The plant makes greedy/learned behavior distinguishable from
random and provides closed-form expected coverage for tests.

Both generators are pure functions of their seed and size arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .objectives import ProbabilisticCoverage, State, UnigramCoverage


def random_coverage_instance(
    n_states: int, n_items: int, seed: int, density: float = 0.6, max_prob: float = 0.85
) -> ProbabilisticCoverage:
    """Random any-success coverage instance for property and baseline tests."""
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.0, max_prob, size=(n_states, n_items))
    p *= rng.random(size=p.shape) < density
    return ProbabilisticCoverage(p)


@dataclass
class NewsEnv:
    """Stochastic user population with clamp(prefs . features) click model."""

    click_prob: np.ndarray
    contexts: np.ndarray
    article_features: np.ndarray
    user_prefs: np.ndarray
    user_cluster: np.ndarray
    train_users: np.ndarray
    val_users: np.ndarray
    test_users: np.ndarray
    noise: float
    seed: int

    @property
    def n_users(self) -> int:
        return self.click_prob.shape[0]

    @property
    def n_articles(self) -> int:
        return self.click_prob.shape[1]

    def objective(self) -> ProbabilisticCoverage:
        return ProbabilisticCoverage(self.click_prob, state_payloads=list(self.contexts))

    def states(self, which: str = "all") -> tuple[State, ...]:
        all_states = self.objective().states()
        if which == "all":
            return all_states
        ids = {"train": self.train_users, "val": self.val_users, "test": self.test_users}[which]
        return tuple(all_states[i] for i in ids)

    def base_features(self, x: State, s: int) -> np.ndarray:
        """Per-(user, article) block: outer product of context and article features."""
        return np.outer(x.payload, self.article_features[s]).ravel()

    @property
    def base_feature_dim(self) -> int:
        return self.contexts.shape[1] * self.article_features.shape[1]


def _split_users(n_users: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # 40/20/15 at the reference population size, proportional otherwise
    order = rng.permutation(n_users)
    n_train = int(round(n_users * 40 / 75))
    n_val = int(round(n_users * 20 / 75))
    n_train = min(n_train, n_users)
    n_val = min(n_val, n_users - n_train)
    return (
        np.sort(order[:n_train]),
        np.sort(order[n_train : n_train + n_val]),
        np.sort(order[n_train + n_val :]),
    )


def generate_news_env(
    n_users: int = 75,
    n_articles: int = 30,
    d_base: int = 5,
    seed: int = 0,
    n_clusters: int = 5,
    noise: float = 0.1,
) -> NewsEnv:
    """Deterministic synthetic news population.

    Users belong to clusters; each cluster prefers one article topic.
    Articles carry mostly-one-topic features in [0, 1]. Click probability is
    the clamped inner product of user preference weights and article
    features. Contexts are cluster memberships corrupted by Gaussian noise
    and renormalized to the simplex.
    """
    if min(n_users, n_articles, d_base, n_clusters) < 1:
        raise ValueError("all sizes must be >= 1")
    rng = np.random.default_rng(seed)

    topic_of_article = rng.integers(d_base, size=n_articles)
    article_features = 0.15 * rng.uniform(0.0, 1.0, size=(n_articles, d_base))
    article_features[np.arange(n_articles), topic_of_article] = rng.uniform(
        0.7, 1.0, size=n_articles
    )

    user_cluster = rng.integers(n_clusters, size=n_users)
    topic_of_cluster = np.arange(n_clusters) % d_base
    user_prefs = rng.uniform(0.0, 0.08, size=(n_users, d_base))
    user_prefs[np.arange(n_users), topic_of_cluster[user_cluster]] = rng.uniform(
        0.75, 0.95, size=n_users
    )

    click_prob = np.clip(user_prefs @ article_features.T, 0.0, 1.0)

    memberships = np.zeros((n_users, n_clusters))
    memberships[np.arange(n_users), user_cluster] = 1.0
    contexts = memberships + noise * rng.standard_normal((n_users, n_clusters))
    contexts = np.clip(contexts, 0.0, None)
    flat = contexts.sum(axis=1) <= 0
    contexts[flat] = 1.0 / n_clusters
    contexts /= contexts.sum(axis=1, keepdims=True)

    train, val, test = _split_users(n_users, rng)
    return NewsEnv(
        click_prob=click_prob,
        contexts=contexts,
        article_features=article_features,
        user_prefs=user_prefs,
        user_cluster=user_cluster,
        train_users=train,
        val_users=val,
        test_users=test,
        noise=noise,
        seed=seed,
    )


def failure_probability(env: NewsEnv, user_ids: Sequence[int], lists) -> float:
    """Mean over users of the probability that no listed article is clicked.

    ``lists`` is either one list shared by all users or one list per user.
    Duplicate articles count once. Equals 1 minus the coverage objective.
    """
    user_ids = list(user_ids)
    if len(user_ids) == 0:
        raise ValueError("need at least one user")
    shared = len(lists) == 0 or np.isscalar(lists[0]) or isinstance(lists[0], (int, np.integer))
    per_user = [lists] * len(user_ids) if shared else list(lists)
    if len(per_user) != len(user_ids):
        raise ValueError("need one list per user")
    total = 0.0
    for u, items in zip(user_ids, per_user):
        if len(items) == 0:
            total += 1.0
            continue
        distinct = np.unique(np.asarray(items, dtype=int))
        total += float(np.prod(1.0 - env.click_prob[u, distinct]))
    return total / len(user_ids)


@dataclass
class UnigramEnv:
    """Budgeted sentence-coverage instance with a known planted structure."""

    objective_budgeted: UnigramCoverage
    objective_unbudgeted: UnigramCoverage
    sentence_positions: np.ndarray
    tile_ids: list[list[int]]
    long_ids: list[int]
    planted_coverage_fraction: float
    budget: float
    seed: int

    def objective(self, ignore_budget: bool = False) -> UnigramCoverage:
        return self.objective_unbudgeted if ignore_budget else self.objective_budgeted

    @property
    def n_sentences(self) -> int:
        return self.objective_budgeted.n_items

    def states(self) -> tuple[State, ...]:
        return self.objective_budgeted.states()

    def base_features(self, x: State, s: int) -> np.ndarray:
        """Quality block: coverage mass against the state's reference, length, position."""
        obj = self.objective_budgeted
        ref = obj.reference_counts[x.id]
        mass = float(np.minimum(ref, obj.item_unigrams[s]).sum() / ref.sum())
        length = float(obj.item_lengths[s] / obj.item_lengths.max())
        return np.array([mass, length, float(self.sentence_positions[s])])

    @property
    def base_feature_dim(self) -> int:
        return 3


def generate_unigram_env(
    n_clusters: int = 3,
    n_sentences: int = 36,
    vocab: int = 256,
    budget: float = 665.0,
    seed: int = 0,
) -> UnigramEnv:
    """Deterministic planted unigram-coverage environment.

    Each cluster owns a disjoint word region. Roughly 80% of the region is
    tiled by short sentences (one chunk each); one long sentence redundantly
    covers half the region at 8x the byte cost per covered word; remaining
    sentences are distractors over a reserved region no reference touches.
    The long sentence's words are a subset of the tiled words, so the
    unbudgeted coverage of all sentences together is exactly the tiled
    fraction, recorded as ``planted_coverage_fraction``.
    """
    if min(n_clusters, n_sentences, vocab) < 1 or budget <= 0:
        raise ValueError("sizes must be >= 1 and budget positive")
    region = vocab // (n_clusters + 1)
    if region < 10:
        raise ValueError("vocab too small for the planted structure")
    words_per_tile = max(2, region // 8)
    n_tiled = 8 * (region // 10)  # 80% of the region, rounded to whole tiles
    n_tiled = (n_tiled // words_per_tile) * words_per_tile
    tiles_per_cluster = n_tiled // words_per_tile
    if n_sentences < n_clusters * (tiles_per_cluster + 1):
        raise ValueError(
            f"need at least {n_clusters * (tiles_per_cluster + 1)} sentences for the plant"
        )
    rng = np.random.default_rng(seed)

    ref = np.zeros((n_clusters, vocab))
    sentences: list[np.ndarray] = []
    lengths: list[float] = []
    tile_ids: list[list[int]] = []
    long_ids: list[int] = []

    tile_len = 5.0 * words_per_tile
    long_len = 40.0 * words_per_tile
    for c in range(n_clusters):
        start = c * region
        ref[c, start : start + region] = 1.0
        cluster_tiles = []
        for j in range(tiles_per_cluster):
            counts = np.zeros(vocab)
            lo = start + j * words_per_tile
            counts[lo : lo + words_per_tile] = 1.0
            cluster_tiles.append(len(sentences))
            sentences.append(counts)
            lengths.append(tile_len)
        counts = np.zeros(vocab)
        counts[start : start + region // 2] = 1.0
        long_ids.append(len(sentences))
        sentences.append(counts)
        lengths.append(long_len)
        tile_ids.append(cluster_tiles)

    distractor_start = n_clusters * region
    while len(sentences) < n_sentences:
        counts = np.zeros(vocab)
        picks = distractor_start + rng.integers(vocab - distractor_start, size=words_per_tile)
        counts[picks] += 1.0
        sentences.append(counts)
        lengths.append(float(rng.integers(30, 80)))

    item_unigrams = np.array(sentences)
    item_lengths = np.array(lengths)
    # shuffle so planted ids are not position-correlated
    perm = rng.permutation(len(sentences))
    inv = np.argsort(perm)
    item_unigrams = item_unigrams[perm]
    item_lengths = item_lengths[perm]
    tile_ids = [[int(inv[i]) for i in tiles] for tiles in tile_ids]
    long_ids = [int(inv[i]) for i in long_ids]
    positions = rng.uniform(0.0, 1.0, size=len(sentences))

    budgeted = UnigramCoverage(ref, item_unigrams, item_lengths, budget)
    unbudgeted = UnigramCoverage(ref, item_unigrams, item_lengths, None)
    return UnigramEnv(
        objective_budgeted=budgeted,
        objective_unbudgeted=unbudgeted,
        sentence_positions=positions,
        tile_ids=tile_ids,
        long_ids=long_ids,
        planted_coverage_fraction=n_tiled / region,
        budget=float(budget),
        seed=seed,
    )


def env_base_features(env) -> Callable[[State, int], np.ndarray]:
    """The (state, item) -> base feature block callable for either env type."""
    return env.base_features


# ---------------------------------------------------------------------------
# Environment files. Instance files carry only the objective; these carry
# everything needed to rebuild the env (contexts, features, splits, plants).

def env_to_dict(env) -> dict:
    if isinstance(env, NewsEnv):
        return {
            "kind": "news_env",
            "click_prob": env.click_prob.tolist(),
            "contexts": env.contexts.tolist(),
            "article_features": env.article_features.tolist(),
            "user_prefs": env.user_prefs.tolist(),
            "user_cluster": env.user_cluster.tolist(),
            "train_users": env.train_users.tolist(),
            "val_users": env.val_users.tolist(),
            "test_users": env.test_users.tolist(),
            "noise": env.noise,
            "seed": env.seed,
        }
    if isinstance(env, UnigramEnv):
        obj = env.objective_budgeted
        return {
            "kind": "unigram_env",
            "reference_counts": obj.reference_counts.tolist(),
            "item_unigrams": obj.item_unigrams.tolist(),
            "item_lengths": obj.item_lengths.tolist(),
            "budget": env.budget,
            "sentence_positions": env.sentence_positions.tolist(),
            "tile_ids": env.tile_ids,
            "long_ids": env.long_ids,
            "planted_coverage_fraction": env.planted_coverage_fraction,
            "seed": env.seed,
        }
    raise TypeError(f"no file schema for env type {type(env).__name__}")


def env_from_dict(data: dict):
    kind = data.get("kind")
    if kind == "news_env":
        return NewsEnv(
            click_prob=np.array(data["click_prob"], dtype=float),
            contexts=np.array(data["contexts"], dtype=float),
            article_features=np.array(data["article_features"], dtype=float),
            user_prefs=np.array(data["user_prefs"], dtype=float),
            user_cluster=np.array(data["user_cluster"], dtype=int),
            train_users=np.array(data["train_users"], dtype=int),
            val_users=np.array(data["val_users"], dtype=int),
            test_users=np.array(data["test_users"], dtype=int),
            noise=float(data["noise"]),
            seed=int(data["seed"]),
        )
    if kind == "unigram_env":
        ref = np.array(data["reference_counts"], dtype=float)
        uni = np.array(data["item_unigrams"], dtype=float)
        lengths = np.array(data["item_lengths"], dtype=float)
        budget = float(data["budget"])
        return UnigramEnv(
            objective_budgeted=UnigramCoverage(ref, uni, lengths, budget),
            objective_unbudgeted=UnigramCoverage(ref, uni, lengths, None),
            sentence_positions=np.array(data["sentence_positions"], dtype=float),
            tile_ids=[[int(i) for i in tiles] for tiles in data["tile_ids"]],
            long_ids=[int(i) for i in data["long_ids"]],
            planted_coverage_fraction=float(data["planted_coverage_fraction"]),
            budget=budget,
            seed=int(data["seed"]),
        )
    raise ValueError(f"unknown env kind: {kind!r}")
