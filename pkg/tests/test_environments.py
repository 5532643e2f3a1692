"""Synthetic environments: structure, determinism, file roundtrips."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from scpolicy.environments import (
    NewsEnv,
    UnigramEnv,
    env_from_dict,
    env_to_dict,
    failure_probability,
    generate_news_env,
    generate_unigram_env,
    random_coverage_instance,
)
from scpolicy.objectives import check_monotone, check_submodular


class TestRandomCoverageInstance:
    def test_shape_and_range(self):
        obj = random_coverage_instance(5, 9, seed=0, max_prob=0.85)
        assert obj.success_prob.shape == (5, 9)
        assert obj.success_prob.max() <= 0.85
        assert obj.success_prob.min() >= 0.0

    def test_density_controls_zeros(self):
        dense = random_coverage_instance(20, 20, seed=1, density=1.0)
        sparse = random_coverage_instance(20, 20, seed=1, density=0.2)
        assert (sparse.success_prob == 0).mean() > (dense.success_prob == 0).mean()

    def test_deterministic(self):
        a = random_coverage_instance(4, 6, seed=7)
        b = random_coverage_instance(4, 6, seed=7)
        assert_allclose(a.success_prob, b.success_prob)


class TestNewsEnv:
    def setup_method(self):
        self.env = generate_news_env(seed=0)

    def test_default_split_sizes(self):
        assert len(self.env.train_users) == 40
        assert len(self.env.val_users) == 20
        assert len(self.env.test_users) == 15
        all_ids = np.concatenate(
            [self.env.train_users, self.env.val_users, self.env.test_users]
        )
        assert sorted(all_ids.tolist()) == list(range(75))

    def test_click_probabilities_in_range(self):
        assert self.env.click_prob.min() >= 0.0
        assert self.env.click_prob.max() <= 1.0

    def test_contexts_on_simplex(self):
        assert np.all(self.env.contexts >= 0.0)
        assert_allclose(self.env.contexts.sum(axis=1), 1.0)

    def test_cluster_topic_preference_shows_in_clicks(self):
        # a user's preferred-topic articles should click far better on average
        env = self.env
        topic = np.argmax(env.article_features, axis=1)
        pref_topic = np.argmax(env.user_prefs, axis=1)
        on = np.mean([
            env.click_prob[u, topic == pref_topic[u]].mean() for u in range(env.n_users)
        ])
        off = np.mean([
            env.click_prob[u, topic != pref_topic[u]].mean() for u in range(env.n_users)
        ])
        assert on > 3.0 * off

    def test_base_features_are_context_article_outer_product(self):
        x = self.env.states("train")[0]
        got = self.env.base_features(x, 4)
        expect = np.outer(x.payload, self.env.article_features[4]).ravel()
        assert_allclose(got, expect)
        assert got.shape == (self.env.base_feature_dim,)
        assert self.env.base_feature_dim == 25

    def test_objective_passes_validators(self):
        obj = generate_news_env(n_users=12, n_articles=8, seed=3).objective()
        assert check_monotone(obj, 400, rng_seed=0).passed
        assert check_submodular(obj, 400, rng_seed=0).passed

    def test_regeneration_is_identical(self):
        again = generate_news_env(seed=0)
        assert env_to_dict(self.env) == env_to_dict(again)
        other = generate_news_env(seed=1)
        assert not np.allclose(other.click_prob, self.env.click_prob)

    def test_states_carry_context_payloads(self):
        x = self.env.states("test")[2]
        assert_allclose(x.payload, self.env.contexts[x.id])


class TestFailureProbability:
    def setup_method(self):
        self.env = generate_news_env(n_users=10, n_articles=6, seed=2)
        self.obj = self.env.objective()

    def test_complements_coverage_objective(self):
        states = self.obj.states()
        for u in (0, 3, 7):
            for items in ([0], [1, 4], [2, 2, 5]):
                fail = failure_probability(self.env, [u], [items])
                assert_allclose(fail, 1.0 - self.obj.evaluate(states[u], items))

    def test_shared_list_broadcasts(self):
        users = [0, 1, 2]
        shared = failure_probability(self.env, users, [3, 4])
        per_user = failure_probability(self.env, users, [[3, 4]] * 3)
        assert_allclose(shared, per_user)

    def test_empty_list_always_fails(self):
        assert failure_probability(self.env, [0, 1], []) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            failure_probability(self.env, [], [0])
        with pytest.raises(ValueError):
            failure_probability(self.env, [0, 1], [[0], [1], [2]])


class TestUnigramEnv:
    def setup_method(self):
        self.env = generate_unigram_env(seed=0)

    def test_planted_fraction_is_exact(self):
        # region 64, tiles of 8 words, 48 tiled words -> 0.75
        assert self.env.planted_coverage_fraction == 0.75
        obj = self.env.objective(ignore_budget=True)
        everything = list(range(obj.n_items))
        for x in obj.states():
            assert_allclose(obj.evaluate(x, everything), 0.75)

    def test_tiles_partition_their_region(self):
        obj = self.env.objective(ignore_budget=True)
        for c, tiles in enumerate(self.env.tile_ids):
            covered = obj.item_unigrams[tiles].sum(axis=0)
            assert covered.max() == 1.0  # tiles are disjoint
            ref = obj.reference_counts[c]
            overlap = np.minimum(ref, covered).sum()
            assert_allclose(overlap / ref.sum(), self.env.planted_coverage_fraction)

    def test_long_sentence_is_redundant_with_tiles(self):
        obj = self.env.objective(ignore_budget=True)
        for c, long_id in enumerate(self.env.long_ids):
            tiles_cover = obj.item_unigrams[self.env.tile_ids[c]].sum(axis=0) > 0
            long_cover = obj.item_unigrams[long_id] > 0
            assert np.all(tiles_cover[long_cover])  # subset of the tiled words
            # and far worse per byte: 8x the cost of tiling the same words
            tile_len = obj.item_lengths[self.env.tile_ids[c][0]]
            assert obj.item_lengths[long_id] == 8.0 * tile_len

    def test_distractors_cover_no_reference_mass(self):
        obj = self.env.objective(ignore_budget=True)
        planted = {i for tiles in self.env.tile_ids for i in tiles}
        planted |= set(self.env.long_ids)
        for s in range(obj.n_items):
            if s in planted:
                continue
            gain = np.minimum(obj.reference_counts, obj.item_unigrams[s][None, :]).sum()
            assert gain == 0.0

    def test_budget_forces_tradeoffs(self):
        # one cluster's full tiling fits, the union of all three does not
        obj = self.env.objective()
        tile_len = obj.item_lengths[self.env.tile_ids[0][0]]
        per_cluster = len(self.env.tile_ids[0]) * tile_len
        assert per_cluster <= self.env.budget
        assert 3 * per_cluster > self.env.budget

    def test_base_features_layout(self):
        obj = self.env.objective()
        x = obj.states()[1]
        s = self.env.tile_ids[1][0]
        feats = self.env.base_features(x, s)
        ref = obj.reference_counts[x.id]
        mass = np.minimum(ref, obj.item_unigrams[s]).sum() / ref.sum()
        assert_allclose(feats[0], mass)
        assert_allclose(feats[1], obj.item_lengths[s] / obj.item_lengths.max())
        assert feats.shape == (3,)

    def test_objective_passes_validators(self):
        for ignore in (False, True):
            obj = self.env.objective(ignore_budget=ignore)
            assert check_monotone(obj, 300, rng_seed=1).passed
            assert check_submodular(obj, 300, rng_seed=1).passed

    def test_construction_guards(self):
        with pytest.raises(ValueError):
            generate_unigram_env(vocab=20)
        with pytest.raises(ValueError):
            generate_unigram_env(n_sentences=5)
        with pytest.raises(ValueError):
            generate_unigram_env(budget=0.0)


class TestEnvFiles:
    def test_news_roundtrip(self):
        env = generate_news_env(n_users=12, n_articles=8, seed=5)
        back = env_from_dict(env_to_dict(env))
        assert isinstance(back, NewsEnv)
        assert_allclose(back.click_prob, env.click_prob)
        assert_allclose(back.contexts, env.contexts)
        assert np.array_equal(back.test_users, env.test_users)
        x, y = env.states("train")[0], back.states("train")[0]
        assert_allclose(
            back.objective().evaluate(y, [0, 3]), env.objective().evaluate(x, [0, 3])
        )

    def test_unigram_roundtrip(self):
        env = generate_unigram_env(seed=4)
        back = env_from_dict(env_to_dict(env))
        assert isinstance(back, UnigramEnv)
        assert back.planted_coverage_fraction == env.planted_coverage_fraction
        assert back.tile_ids == env.tile_ids
        a = env.objective().evaluate(env.states()[0], [0, 1, 2])
        b = back.objective().evaluate(back.states()[0], [0, 1, 2])
        assert_allclose(a, b)
        # feature parity matters because policies are trained on these
        assert_allclose(
            back.base_features(back.states()[1], 3),
            env.base_features(env.states()[1], 3),
        )

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            env_from_dict({"kind": "weather"})
        with pytest.raises(TypeError):
            env_to_dict(object())
