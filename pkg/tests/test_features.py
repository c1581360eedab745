"""Rating-behaviour and item-distribution attributes plus the normalizer."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracle
from conftest import HAND_RATINGS
from shillguard.attacks import AttackSpec, generate_profiles
from shillguard.dataset import RatingDataset, compute_item_stats
from shillguard.features import (
    ITEM_ATTRIBUTES,
    RATING_ATTRIBUTES,
    Normalizer,
    apply_normalizer,
    extract_features,
    fit_normalizer,
    item_attributes,
    rating_attributes,
)
from shillguard import synth

# frozen outputs of the independent loop-based reference on the hand dataset
HAND_RATING_NUKE = {
    1: [0.125, 0.03125, 0.5, 0.5, 1.25, 0.34375, 0.0, 0.0, 0.076923076923, 2.0, 0.882257546513, 0.959595959596],
    2: [0.247685185185, 0.077353395062, 0.743055555556, 0.805555555556, 1.555555555556, 1.030092592593, 0.0, 0.0, 0.115384615385, 1.584962500721, 0.633631592007, 0.910112359551],
    3: [0.326388888889, 0.093171296296, 1.305555555556, 1.166666666667, 1.229166666667, 1.002314814815, 3.0, 0.25, 0.076923076923, 2.0, 0.648674973141, 0.967963386728],
    4: [0.46875, 0.1171875, 0.9375, 1.875, 4.0, 5.0625, 4.0, 0.25, 0.307692307692, 1.0, 1.0, 1.098765432099],
    5: [0.347222222222, 0.105324074074, 1.736111111111, 1.166666666667, 0.99, 0.96875, 2.75, 0.333333333333, 0.269230769231, 1.921928094887, 0.214222042998, 0.985692995529],
}
HAND_RATING_PUSH = {
    1: [0.125, 0.03125, 0.5, 0.5, 0.916666666667, 0.270833333333, 2.0, 0.5, 0.076923076923, 2.0, 0.882257546513, 0.959595959596],
    4: [0.46875, 0.1171875, 0.9375, 1.875, 4.0, 2.25, 4.0, 0.25, 0.307692307692, 1.0, 1.0, 1.098765432099],
}
HAND_ITEM_3_3 = {
    1: [0.8, 1.0, 0.75, 0.5, 0.25, 0.2, 0.0, 0.2],
    2: [0.6, 0.666666666667, 0.666666666667, 0.5, 0.333333333333, 0.2, 0.0, 0.0],
    3: [0.8, 0.666666666667, 0.5, 1.0, 0.5, 0.2, 0.2, 0.2],
    4: [0.4, 0.666666666667, 1.0, 0.0, 0.0, 0.2, 0.2, 0.0],
    5: [1.0, 1.0, 0.6, 1.0, 0.4, 0.2, 0.2, 0.4],
}


class TestRatingAttributes:
    def test_hand_values_nuke(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "nuke")
        for u, expected in HAND_RATING_NUKE.items():
            got = rating_attributes(hand_ds.user_items(u), st_, "nuke")
            np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-11)

    def test_hand_values_push(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "push")
        for u, expected in HAND_RATING_PUSH.items():
            got = rating_attributes(hand_ds.user_items(u), st_, "push")
            np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-11)

    def test_zero_deviation_user(self):
        # every item rated identically by its raters -> all deviations zero
        ratings = {
            1: {10: 4, 11: 2, 12: 3},
            2: {10: 4, 11: 2},
            3: {11: 2, 12: 3},
        }
        ds = RatingDataset.from_ratings(ratings, (1, 5))
        st_ = compute_item_stats(ds, 10, 0, "push")
        v = rating_attributes(ds.user_items(1), st_, "push")
        names = dict(zip(RATING_ATTRIBUTES, v))
        for key in ("RDMA", "WDMA", "WDA", "FMD", "FMV"):
            assert names[key] == 0.0

    def test_entropy_extremes(self):
        same = RatingDataset.from_ratings({1: {i: 4 for i in range(10)}, 2: {1: 2}}, (1, 5))
        st_ = compute_item_stats(same, 10, 0, "push")
        v = dict(zip(RATING_ATTRIBUTES, rating_attributes(same.user_items(1), st_, "push")))
        assert v["Entropy"] == 0.0
        spread = RatingDataset.from_ratings(
            {1: {i + 10 * r: r for r in range(1, 6) for i in range(2)}, 2: {11: 3}}, (1, 5)
        )
        st2 = compute_item_stats(spread, 10, 0, "push")
        v2 = dict(zip(RATING_ATTRIBUTES, rating_attributes(spread.user_items(1), st2, "push")))
        assert v2["Entropy"] == pytest.approx(math.log2(5))

    def test_intent_mismatch_rejected(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "push")
        with pytest.raises(ValueError, match="intent"):
            rating_attributes(hand_ds.user_items(1), st_, "nuke")


class TestItemAttributes:
    def test_hand_values(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "push")
        for u, expected in HAND_ITEM_3_3.items():
            got = item_attributes(hand_ds.user_items(u), st_)
            np.testing.assert_allclose(got, expected, rtol=1e-9, atol=1e-11)

    def test_user_rating_everything(self):
        ratings = {1: {i: 3 for i in range(1, 11)}, 2: {1: 5}}
        ds = RatingDataset.from_ratings(ratings, (1, 5))
        st_ = compute_item_stats(ds, 5, 1, "push")
        v = dict(zip(ITEM_ATTRIBUTES, item_attributes(ds.user_items(1), st_)))
        assert v["FSTI"] == 1.0
        assert v["FSPII"] + v["FSUII"] <= 1.0
        assert v["FSMAXRTI"] == 0.0

    def test_counting_example(self):
        # 10 items; 3 popular (>2 raters); the user rates two of them
        ratings = {
            1: {1: 3, 2: 4},
            2: {1: 3, 2: 4, 3: 2, 4: 1},
            3: {1: 3, 2: 4, 3: 2, 5: 5, 6: 1, 7: 2, 8: 3, 9: 4, 10: 5},
        }
        ds = RatingDataset.from_ratings(ratings, (1, 5))
        st_ = compute_item_stats(ds, 2, 1, "push")
        assert st_.popular == {1, 2}
        st_ = compute_item_stats(ds, 1, 1, "push")
        assert st_.popular == {1, 2, 3}
        v = dict(zip(ITEM_ATTRIBUTES, item_attributes(ds.user_items(1), st_)))
        assert v["FSPI"] == pytest.approx(2 / 3)
        assert v["FSPII"] == pytest.approx(2 / 2)

    def test_empty_strata_fallback(self):
        ds = RatingDataset.from_ratings({1: {1: 3, 2: 4}, 2: {1: 2, 2: 5}}, (1, 5))
        st_ = compute_item_stats(ds, 10, 0, "push")
        v = dict(zip(ITEM_ATTRIBUTES, item_attributes(ds.user_items(1), st_)))
        assert v["FSPI"] == 0.0 and v["FSUI"] == 0.0

    def test_r_mid_override(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "push")
        v4 = dict(zip(ITEM_ATTRIBUTES, item_attributes(hand_ds.user_items(1), st_, r_mid=4)))
        assert v4["FSARTI"] == pytest.approx(1 / 5)


class TestOracleEquivalence:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        ds = oracle.random_dataset(rng, max_users=30)
        st_ = compute_item_stats(ds, 3, 1, "nuke")
        table = extract_features(ds, st_, "nuke")
        for k, u in enumerate(table.users):
            np.testing.assert_allclose(
                table.rating_mat[k], oracle.rating_attributes(ds, u, "nuke"),
                rtol=1e-10, atol=1e-10,
            )
            np.testing.assert_allclose(
                table.item_mat[k], oracle.item_attributes(ds, u, 3, 1),
                rtol=1e-10, atol=1e-10,
            )

    def test_extract_matches_per_user_api(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "nuke")
        table = extract_features(hand_ds, st_, "nuke")
        for k, u in enumerate(table.users):
            np.testing.assert_allclose(
                table.rating_mat[k], rating_attributes(hand_ds.user_items(u), st_, "nuke")
            )
            np.testing.assert_allclose(
                table.item_mat[k], item_attributes(hand_ds.user_items(u), st_)
            )

    def test_extract_user_subset(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "nuke")
        table = extract_features(hand_ds, st_, "nuke", users=(2, 5))
        assert table.users == (2, 5)
        assert table.rating_mat.shape == (2, 12)


class TestFeatureProperties:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_finite_and_bounded(self, seed):
        ds = oracle.random_dataset(np.random.default_rng(seed), max_users=25)
        st_ = compute_item_stats(ds, 4, 1, "push")
        table = extract_features(ds, st_, "push")
        assert np.isfinite(table.rating_mat).all()
        assert np.isfinite(table.item_mat).all()
        assert (table.item_mat >= 0).all() and (table.item_mat <= 1).all()
        k = RATING_ATTRIBUTES.index("Entropy")
        levels = ds.scale.r_max - ds.scale.r_min + 1
        assert (table.rating_mat[:, k] <= math.log2(levels) + 1e-12).all()

    def test_segment_push_min_rating_share(self):
        ds = synth.make_tiny(n_users=50, n_items=100, n_ratings=1500, seed=9)
        st_ = compute_item_stats(ds, 10, 2, "push")
        spec = AttackSpec(model="Segment", intent="push", attack_size=0.2,
                          filler_size=0.1, selected_count=5, seed=1)
        profiles = generate_profiles(spec, st_, ds)
        k = ITEM_ATTRIBUTES.index("FSMINRTI")
        for prof in profiles:
            v = item_attributes(prof.all_ratings(), st_)
            assert v[k] >= (len(prof.fillers) - 1) / ds.n_items


class TestNormalizer:
    def test_endpoints_and_midpoint(self):
        x = np.array([[0.0, 5.0], [10.0, 15.0]])
        norm = fit_normalizer(x)
        np.testing.assert_allclose(norm.transform(np.array([0.0, 5.0])), [-1.0, -1.0])
        np.testing.assert_allclose(norm.transform(np.array([10.0, 15.0])), [1.0, 1.0])
        np.testing.assert_allclose(norm.transform(np.array([5.0, 10.0])), [0.0, 0.0])

    def test_zero_range_maps_to_zero(self):
        x = np.array([[2.0, 1.0], [2.0, 3.0]])
        norm = fit_normalizer(x)
        out = apply_normalizer(norm, np.array([[2.0, 2.0], [7.0, 1.0]]))
        assert out[0, 0] == 0.0 and out[1, 0] == 0.0
        assert out[1, 1] == -1.0

    def test_outside_training_range_not_clipped(self):
        norm = fit_normalizer(np.array([[0.0], [10.0]]))
        assert apply_normalizer(norm, np.array([20.0]))[0] == pytest.approx(3.0)

    def test_refit_identical(self, rng):
        x = rng.normal(size=(40, 6))
        a, b = fit_normalizer(x), fit_normalizer(x)
        np.testing.assert_array_equal(a.lo, b.lo)
        np.testing.assert_array_equal(a.hi, b.hi)

    def test_requires_two_rows(self):
        with pytest.raises(ValueError):
            fit_normalizer(np.ones((1, 3)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_min_max_rows_hit_endpoints(self, seed):
        x = np.random.default_rng(seed).normal(size=(12, 5))
        norm = fit_normalizer(x)
        out = norm.transform(x)
        np.testing.assert_allclose(out.min(axis=0), -1.0, atol=1e-12)
        np.testing.assert_allclose(out.max(axis=0), 1.0, atol=1e-12)
