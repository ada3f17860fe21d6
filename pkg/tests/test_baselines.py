import numpy as np
import pytest

import allg
from allg.baselines import kmeans_fit, rank_candidates
from allg.errors import ConfigError
from oracles import gram_leverage_scores


class TestSelectRandom:
    def test_full_budget_is_permutation(self):
        out = allg.select_random(5, 5, seed=3)
        assert sorted(out) == [0, 1, 2, 3, 4]

    def test_deterministic(self):
        assert allg.select_random(40, 10, seed=9) == allg.select_random(40, 10, seed=9)

    def test_distinct_at_scale(self):
        out = allg.select_random(1000, 25, seed=0)
        assert len(out) == 25 and len(set(out)) == 25

    def test_budget_too_large(self):
        with pytest.raises(ConfigError):
            allg.select_random(3, 4, seed=0)


class TestSelectKmeans:
    def test_two_separated_pairs(self):
        # brute-force obvious answer: one point from each far-apart pair
        x = np.array([[0.0, 0.1, 10.0, 10.1],
                      [0.0, 0.0, 0.0, 0.0]])
        out = allg.select_kmeans(x, 2, k=2, seed=0)
        assert {out[0], out[1]} in ({0, 2}, {0, 3}, {1, 2}, {1, 3})
        sides = {0 if i < 2 else 1 for i in out}
        assert sides == {0, 1}

    def test_single_centroid_orders_by_distance_to_mean(self, rng):
        x = rng.normal(size=(3, 12))
        out = allg.select_kmeans(x, 12, k=1, seed=4)
        mean = x.mean(axis=1, keepdims=True)
        dist = np.linalg.norm(x - mean, axis=0)
        expect = sorted(range(12), key=lambda i: (dist[i], i))
        assert out == expect

    def test_deterministic(self, rng):
        x = rng.normal(size=(4, 30))
        assert allg.select_kmeans(x, 10, k=3, seed=2) == allg.select_kmeans(x, 10, k=3, seed=2)

    def test_round_robin_spreads_over_clusters(self):
        ds = allg.make_blobs(10, 3, d=2, spread=0.2, seed=8)
        out = allg.select_kmeans(ds.features, 3, k=3, seed=1)
        assert len({ds.labels[i] for i in out}) == 3

    def test_wcss_non_increasing(self, rng):
        x = rng.normal(size=(5, 60))
        _, _, history = kmeans_fit(x, 4, seed=5)
        diffs = np.diff(history)
        assert (diffs <= 1e-9).all()

    def test_k_exceeds_n(self, rng):
        with pytest.raises(ConfigError):
            allg.select_kmeans(rng.normal(size=(2, 3)), 2, k=4, seed=0)


class TestSelectDcs:
    def test_dominant_singular_direction(self):
        x = np.diag([3.0, 2.0, 1.0])
        assert allg.select_dcs(x, 1, rank=1) == [0]

    def test_duplicate_columns_tie_to_lower_index(self):
        x = np.array([[3.0, 3.0, 1.0], [0.5, 0.5, 2.0]])
        out = allg.select_dcs(x, 1, rank=1)
        assert out == [0]

    def test_matches_gram_eigh_oracle(self, rng):
        x = rng.normal(size=(5, 8))
        out = allg.select_dcs(x, 8, rank=2)
        scores = gram_leverage_scores(x, 2)
        expect = sorted(range(8), key=lambda j: (-scores[j], j))
        assert out == expect

    def test_invariant_to_orthogonal_left_multiplication(self, rng):
        x = rng.normal(size=(6, 9))
        q, _ = np.linalg.qr(rng.normal(size=(6, 6)))
        assert allg.select_dcs(x, 9, rank=3) == allg.select_dcs(q @ x, 9, rank=3)

    def test_rank_out_of_range(self, rng):
        with pytest.raises(ConfigError):
            allg.select_dcs(rng.normal(size=(3, 5)), 2, rank=4)


class TestRegistry:
    def test_all_kinds_give_full_rankings(self, rng):
        x = rng.normal(size=(4, 12))
        for kind in ("random", "kmeans", "dcs"):
            spec = allg.SelectorSpec(kind, params={"K": 3, "rank": 2}, seed=5)
            ranking = rank_candidates(x, spec)
            assert sorted(ranking) == list(range(12)), kind

    def test_unknown_kind(self, rng):
        with pytest.raises(ConfigError, match="unknown selector"):
            rank_candidates(rng.normal(size=(2, 4)), allg.SelectorSpec("mystery"))

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            allg.SelectorSpec("kmeans", params={"K": 0})
        with pytest.raises(ConfigError):
            allg.SelectorSpec("dcs", params={"rank": 0})

    def test_allg_kind_registered_via_evaluate(self, blobs_std):
        import allg.evaluate  # noqa: F401  (registers the "allg" ranker)
        spec = allg.SelectorSpec("allg", params={
            "encoder_dims": (4, 4, 3), "pretrain_epochs": 10, "train_epochs": 10,
            "knn_k": 3})
        ranking = rank_candidates(blobs_std.features, spec, seed=1)
        assert sorted(ranking) == list(range(blobs_std.n_samples))
