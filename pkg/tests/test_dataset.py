"""Loaders, containers, item statistics and splitting."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracle
from shillguard.dataset import (
    ATTACKER,
    DataFormatError,
    GENUINE,
    RatingDataset,
    Scale,
    compute_item_stats,
    dump_csv,
    load_movielens_csv,
    load_movielens_tab,
    split_half,
    with_partition,
)


def write(path, text):
    path.write_text(text)
    return str(path)


class TestScale:
    def test_extremes(self):
        s = Scale(1, 5)
        assert s.extreme("push") == 5
        assert s.extreme("nuke") == 1
        assert s.opposite("push") == 1
        assert s.opposite("nuke") == 5
        assert s.mid() == 3
        assert Scale(1, 10).mid() == 5

    def test_bad_intent(self):
        with pytest.raises(ValueError):
            Scale(1, 5).extreme("sideways")


class TestFromRatings:
    def test_basic(self, hand_ds):
        assert hand_ds.n_users == 5
        assert hand_ds.n_items == 5
        assert hand_ds.n_ratings == 18
        assert hand_ds.users == (1, 2, 3, 4, 5)
        assert hand_ds.items == (10, 11, 12, 13, 14)
        assert all(lab == GENUINE for lab in hand_ds.labels.values())

    def test_out_of_scale_rejected(self):
        with pytest.raises(ValueError, match="outside scale"):
            RatingDataset.from_ratings({1: {10: 6}}, (1, 5))

    def test_empty_user_rejected(self):
        with pytest.raises(ValueError, match="no ratings"):
            RatingDataset.from_ratings({1: {10: 3}, 2: {}}, (1, 5))

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError, match="no ratings"):
            RatingDataset.from_ratings({}, (1, 5))

    def test_bad_label_rejected(self):
        with pytest.raises(ValueError, match="unknown label"):
            RatingDataset.from_ratings({1: {10: 3}}, (1, 5), {1: "bot"})


class TestTabLoader:
    def test_loads_counts(self, tmp_path):
        p = write(tmp_path / "u.data", "1\t10\t5\t100\n1\t11\t3\t101\n2\t10\t4\t102\n")
        ds = load_movielens_tab(p)
        assert (ds.n_users, ds.n_items, ds.n_ratings) == (2, 2, 3)
        assert ds.ratings[1][10] == 5

    def test_empty_file(self, tmp_path):
        p = write(tmp_path / "u.data", "")
        with pytest.raises(DataFormatError, match="no ratings"):
            load_movielens_tab(p)

    def test_duplicate_named_with_line(self, tmp_path):
        p = write(tmp_path / "u.data", "1\t10\t5\t1\n2\t10\t4\t2\n1\t10\t3\t3\n")
        with pytest.raises(DataFormatError, match=r":3: duplicate rating for user 1, item 10"):
            load_movielens_tab(p)

    def test_wrong_field_count(self, tmp_path):
        p = write(tmp_path / "u.data", "1\t10\t5\n")
        with pytest.raises(DataFormatError, match=r":1: expected 4"):
            load_movielens_tab(p)

    def test_non_integer_rating(self, tmp_path):
        p = write(tmp_path / "u.data", "1\t10\tfive\t100\n")
        with pytest.raises(DataFormatError, match=r":1"):
            load_movielens_tab(p)

    def test_out_of_scale_with_line(self, tmp_path):
        p = write(tmp_path / "u.data", "1\t10\t5\t100\n1\t11\t9\t100\n")
        with pytest.raises(DataFormatError, match=r":2: rating 9 outside"):
            load_movielens_tab(p)


class TestCsvLoader:
    def test_loads(self, tmp_path):
        p = write(
            tmp_path / "r.csv",
            "userId,movieId,rating,timestamp\n1,10,5,100\n2,10,3,101\n",
        )
        ds = load_movielens_csv(p)
        assert (ds.n_users, ds.n_ratings) == (2, 2)

    def test_header_only(self, tmp_path):
        p = write(tmp_path / "r.csv", "userId,movieId,rating,timestamp\n")
        with pytest.raises(DataFormatError, match="no ratings"):
            load_movielens_csv(p)

    def test_missing_header(self, tmp_path):
        p = write(tmp_path / "r.csv", "1,10,5,100\n")
        with pytest.raises(DataFormatError, match="expected header"):
            load_movielens_csv(p)

    def test_out_of_scale_row_number(self, tmp_path):
        p = write(tmp_path / "r.csv", "userId,movieId,rating,timestamp\n1,10,7,100\n")
        with pytest.raises(DataFormatError, match=r":2: rating 7 outside"):
            load_movielens_csv(p)

    def test_half_star_doubles(self, tmp_path):
        p = write(
            tmp_path / "r.csv",
            "userId,movieId,rating,timestamp\n1,10,4.5,100\n1,11,0.5,101\n",
        )
        ds = load_movielens_csv(p, scale=(1, 10), half_star=True)
        assert ds.ratings[1] == {10: 9, 11: 1}

    def test_half_star_rejected_on_integer_scale(self, tmp_path):
        p = write(tmp_path / "r.csv", "userId,movieId,rating,timestamp\n1,10,4.5,100\n")
        with pytest.raises(DataFormatError, match="not on the declared scale"):
            load_movielens_csv(p)

    def test_quarter_star_rejected_even_doubled(self, tmp_path):
        p = write(tmp_path / "r.csv", "userId,movieId,rating,timestamp\n1,10,4.7,100\n")
        with pytest.raises(DataFormatError):
            load_movielens_csv(p, scale=(1, 10), half_star=True)


class TestRoundTrip:
    def test_dump_then_load_is_identity(self, tmp_path, hand_ds):
        labels = dict(hand_ds.labels)
        labels[4] = ATTACKER
        ds = RatingDataset.from_ratings(hand_ds.ratings, hand_ds.scale, labels)
        out = tmp_path / "dump.csv"
        dump_csv(ds, out)
        back = load_movielens_csv(out, ds.scale)
        assert back.ratings == ds.ratings
        assert back.labels == ds.labels
        assert back.items == ds.items

    def test_dump_deterministic(self, tmp_path, hand_ds):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        dump_csv(hand_ds, a)
        dump_csv(hand_ds, b)
        assert a.read_bytes() == b.read_bytes()


class TestItemStats:
    def test_hand_counts_and_means(self, hand_ds):
        st_ = compute_item_stats(hand_ds, 3, 3, "push")
        counts, means, system_mean = oracle.item_aggregates(hand_ds)
        assert st_.count == counts
        assert st_.mean == pytest.approx(means)
        assert st_.system_mean == pytest.approx(system_mean)
        assert st_.popular == {10, 11, 13}
        assert st_.unpopular == {12, 14}

    def test_extreme_fraction_push_nuke(self, hand_ds):
        push = compute_item_stats(hand_ds, 3, 3, "push")
        nuke = compute_item_stats(hand_ds, 3, 3, "nuke")
        assert push.extreme_fraction == pytest.approx(oracle.extreme_fraction(hand_ds, "push"))
        assert nuke.extreme_fraction == pytest.approx(oracle.extreme_fraction(hand_ds, "nuke"))

    def test_constant_threes(self):
        ds = RatingDataset.from_ratings({u: {u + 10: 3} for u in range(1, 6)}, (1, 5))
        st_ = compute_item_stats(ds, 200, 0, "push")
        assert all(m == 3.0 for m in st_.mean.values())
        assert st_.system_mean == 3.0
        assert all(f == 0.0 for f in st_.extreme_fraction.values())

    def test_overlapping_thresholds_rejected(self, hand_ds):
        with pytest.raises(ValueError, match="overlap"):
            compute_item_stats(hand_ds, pop_threshold=2, unpop_threshold=3)

    def test_relative_mode(self, ml100k_like):
        st_ = compute_item_stats(ml100k_like, intent="push", relative=True)
        assert st_.popular and st_.unpopular
        assert not (st_.popular & st_.unpopular)

    @given(st.integers(0, 10_000))
    def test_matches_brute_force_on_random_data(self, seed):
        ds = oracle.random_dataset(np.random.default_rng(seed), max_users=20)
        st_ = compute_item_stats(ds, 3, 1, "nuke")
        counts, means, system_mean = oracle.item_aggregates(ds)
        assert st_.count == counts
        assert st_.mean == pytest.approx(means)
        assert st_.system_mean == pytest.approx(system_mean)
        assert st_.extreme_fraction == pytest.approx(oracle.extreme_fraction(ds, "nuke"))
        lengths = [len(ds.ratings[u]) for u in ds.users]
        n_bar = sum(lengths) / len(lengths)
        assert st_.mean_profile_len == pytest.approx(n_bar)
        assert st_.profile_len_sq_dev == pytest.approx(sum((n - n_bar) ** 2 for n in lengths))

    def test_paper_scale_stats(self, ml100k_like):
        st_ = compute_item_stats(ml100k_like, 200, 5, "nuke")
        assert abs(st_.system_mean - 3.53) < 0.08
        assert abs(ml100k_like.sparsity() - 0.937) < 0.002
        assert len(st_.popular) >= 10

    def test_with_partition_override(self, hand_ds):
        full = compute_item_stats(hand_ds, 3, 3, "push")
        part = compute_item_stats(hand_ds, 2, 1, "push")
        merged = with_partition(part, full)
        assert merged.popular == full.popular
        assert merged.unpopular == full.unpopular
        assert merged.count == part.count


class TestSplitHalf:
    def test_sizes_943(self, ml100k_like):
        tr, te = split_half(ml100k_like, seed=0)
        assert (tr.n_users, te.n_users) == (472, 471)
        assert not set(tr.users) & set(te.users)

    def test_deterministic(self, tiny_ds):
        a = split_half(tiny_ds, 7)
        b = split_half(tiny_ds, 7)
        assert a[0].users == b[0].users and a[1].users == b[1].users

    @given(st.integers(0, 1000))
    def test_partition_property(self, seed):
        ds = oracle.random_dataset(np.random.default_rng(99), max_users=15)
        tr, te = split_half(ds, seed)
        assert set(tr.users) | set(te.users) == set(ds.users)
        assert not set(tr.users) & set(te.users)
        assert tr.n_users == math.ceil(ds.n_users / 2)

    def test_balanced_rating_mass(self, ml100k_like):
        tr, te = split_half(ml100k_like, seed=3)
        assert abs(tr.n_ratings - te.n_ratings) < 0.05 * ml100k_like.n_ratings

    def test_too_few_users(self):
        ds = RatingDataset.from_ratings({1: {10: 3}}, (1, 5))
        with pytest.raises(ValueError):
            split_half(ds, 0)


class TestWithNewUsers:
    def test_appends_and_preserves(self, hand_ds):
        ds2 = hand_ds.with_new_users({6: {10: 1, 14: 5}}, ATTACKER)
        assert ds2.n_users == 6
        assert ds2.labels[6] == ATTACKER
        assert ds2.ratings[1] == hand_ds.ratings[1]
        assert ds2.items == hand_ds.items

    def test_unknown_item_rejected(self, hand_ds):
        with pytest.raises(KeyError):
            hand_ds.with_new_users({6: {999: 3}}, ATTACKER)

    def test_colliding_id_rejected(self, hand_ds):
        with pytest.raises(ValueError, match="collides"):
            hand_ds.with_new_users({3: {10: 3}}, ATTACKER)

    def test_flat_view_consistent(self, hand_ds):
        ds2 = hand_ds.with_new_users({6: {10: 1}}, ATTACKER)
        rebuilt = RatingDataset.from_ratings(ds2.ratings, ds2.scale, ds2.labels)
        a, b = ds2.flat(), rebuilt.flat()
        assert np.array_equal(a.item_idx, b.item_idx)
        assert np.array_equal(a.ratings, b.ratings)
        assert a.user_slices == b.user_slices
