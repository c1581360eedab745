"""Sparse rating-matrix containers, MovieLens-format loaders and item statistics.

All downstream stages (attack synthesis, feature extraction, training,
evaluation) consume the two containers defined here: :class:`RatingDataset`
holds the sparse user x item integer ratings with per-user ground-truth
labels, and :class:`ItemStats` holds the global per-item aggregates computed
once per rating matrix. Both are treated as immutable after construction and
are safe to share across workers.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

import numpy as np

GENUINE = "genuine"
ATTACKER = "attacker"
UNKNOWN = "unknown"
LABEL_VALUES = (GENUINE, ATTACKER, UNKNOWN)

PUSH = "push"
NUKE = "nuke"
INTENTS = (PUSH, NUKE)

MOVIELENS_CSV_HEADER = ("userId", "movieId", "rating", "timestamp")
CANONICAL_CSV_HEADER = MOVIELENS_CSV_HEADER + ("label",)


class Scale(NamedTuple):
    """Inclusive integer rating scale."""

    r_min: int
    r_max: int

    def extreme(self, intent: str) -> int:
        """Rating an attacker gives the target: r_max to push, r_min to nuke."""
        _check_intent(intent)
        return self.r_max if intent == PUSH else self.r_min

    def opposite(self, intent: str) -> int:
        """Rating opposite to the attack intent (segment/love-hate fillers)."""
        _check_intent(intent)
        return self.r_min if intent == PUSH else self.r_max

    def mid(self) -> int:
        return (self.r_min + self.r_max) // 2

    def contains(self, r: int) -> bool:
        return self.r_min <= r <= self.r_max


class DataFormatError(ValueError):
    """Raised when an input rating file violates the expected format."""


def _check_intent(intent: str) -> None:
    if intent not in INTENTS:
        raise ValueError(f"intent must be one of {INTENTS}, got {intent!r}")


class _FlatView(NamedTuple):
    """Row-per-rating arrays sorted by (user, item), cached per dataset."""

    item_idx: np.ndarray      # int32 index into RatingDataset.items
    ratings: np.ndarray       # int16 rating values
    user_slices: dict[int, tuple[int, int]]  # user id -> [start, stop) rows


@dataclass
class RatingDataset:
    """Sparse integer ratings with per-user genuine/attacker labels.

    ``users`` and ``items`` are sorted ascending; ``items`` contains exactly
    the ids that appear in at least one rating. Every user has at least one
    rating and each (user, item) pair appears at most once.
    """

    users: tuple[int, ...]
    items: tuple[int, ...]
    ratings: dict[int, dict[int, int]]
    scale: Scale
    labels: dict[int, str]
    _flat: _FlatView | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_ratings(
        cls,
        ratings: Mapping[int, Mapping[int, int]],
        scale: tuple[int, int],
        labels: Mapping[int, str] | None = None,
    ) -> "RatingDataset":
        scale = Scale(*scale)
        if scale.r_min > scale.r_max:
            raise ValueError(f"invalid scale {scale}")
        if not ratings:
            raise ValueError("no ratings")
        clean: dict[int, dict[int, int]] = {}
        item_set: set[int] = set()
        for u, profile in ratings.items():
            if not profile:
                raise ValueError(f"user {u} has no ratings")
            for i, r in profile.items():
                if not scale.contains(r):
                    raise ValueError(
                        f"rating {r} by user {u} on item {i} outside scale {scale}"
                    )
            clean[int(u)] = {int(i): int(r) for i, r in sorted(profile.items())}
            item_set.update(profile)
        users = tuple(sorted(clean))
        clean = {u: clean[u] for u in users}
        full_labels = {u: GENUINE for u in users}
        if labels:
            for u, lab in labels.items():
                if lab not in LABEL_VALUES:
                    raise ValueError(f"unknown label {lab!r} for user {u}")
                if int(u) in full_labels:
                    full_labels[int(u)] = lab
        return cls(
            users=users,
            items=tuple(sorted(item_set)),
            ratings=clean,
            scale=scale,
            labels=full_labels,
        )

    # -- basic accessors ---------------------------------------------------

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_ratings(self) -> int:
        return sum(len(p) for p in self.ratings.values())

    def user_items(self, user: int) -> dict[int, int]:
        """The user's item -> rating map (treat as read-only)."""
        return self.ratings[user]

    def users_with_label(self, label: str) -> list[int]:
        return [u for u in self.users if self.labels[u] == label]

    @property
    def genuine_users(self) -> list[int]:
        return self.users_with_label(GENUINE)

    @property
    def attacker_users(self) -> list[int]:
        return self.users_with_label(ATTACKER)

    def sparsity(self) -> float:
        """Fraction of the user x item matrix that is empty."""
        return 1.0 - self.n_ratings / (self.n_users * self.n_items)

    # -- derived views -----------------------------------------------------

    def item_index(self) -> dict[int, int]:
        return {i: k for k, i in enumerate(self.items)}

    def flat(self) -> _FlatView:
        """Cached (user, item)-sorted arrays for vectorised passes."""
        if self._flat is None:
            index = self.item_index()
            n = self.n_ratings
            item_idx = np.empty(n, dtype=np.int32)
            vals = np.empty(n, dtype=np.int16)
            slices: dict[int, tuple[int, int]] = {}
            pos = 0
            for u in self.users:
                profile = self.ratings[u]
                start = pos
                for i, r in profile.items():
                    item_idx[pos] = index[i]
                    vals[pos] = r
                    pos += 1
                slices[u] = (start, pos)
            object.__setattr__(self, "_flat", _FlatView(item_idx, vals, slices))
        return self._flat

    # -- construction of derived datasets -----------------------------------

    def subset(self, users: Iterable[int]) -> "RatingDataset":
        """New dataset restricted to the given users (items recomputed)."""
        keep = sorted(set(users))
        missing = [u for u in keep if u not in self.ratings]
        if missing:
            raise KeyError(f"users not in dataset: {missing[:5]}")
        ratings = {u: self.ratings[u] for u in keep}
        labels = {u: self.labels[u] for u in keep}
        return RatingDataset.from_ratings(ratings, self.scale, labels)

    def with_new_users(
        self, new_profiles: Mapping[int, Mapping[int, int]], label: str
    ) -> "RatingDataset":
        """Append users whose ids exceed all existing ids and whose items
        already exist; reuses the cached flat view instead of rebuilding it."""
        if not new_profiles:
            return self
        max_uid = self.users[-1]
        index = self.item_index()
        ratings = dict(self.ratings)
        labels = dict(self.labels)
        base = self.flat()
        chunks_idx = [base.item_idx]
        chunks_val = [base.ratings]
        slices = dict(base.user_slices)
        pos = len(base.ratings)
        for u in sorted(new_profiles):
            profile = new_profiles[u]
            if u <= max_uid:
                raise ValueError(f"new user id {u} collides with existing ids")
            if not profile:
                raise ValueError(f"user {u} has no ratings")
            items = sorted(profile)
            vals = [profile[i] for i in items]
            for i, r in zip(items, vals):
                if i not in index:
                    raise KeyError(f"item {i} not present in dataset")
                if not self.scale.contains(r):
                    raise ValueError(f"rating {r} outside scale {self.scale}")
            ratings[u] = dict(zip(items, vals))
            labels[u] = label
            chunks_idx.append(np.array([index[i] for i in items], dtype=np.int32))
            chunks_val.append(np.array(vals, dtype=np.int16))
            slices[u] = (pos, pos + len(items))
            pos += len(items)
        flat = _FlatView(np.concatenate(chunks_idx), np.concatenate(chunks_val), slices)
        return RatingDataset(
            users=tuple(sorted(ratings)),
            items=self.items,
            ratings=ratings,
            scale=self.scale,
            labels=labels,
            _flat=flat,
        )


@dataclass(frozen=True)
class ItemStats:
    """Global per-item aggregates for one rating matrix.

    ``extreme_fraction`` maps item -> fraction of its raters who gave the
    extreme rating for ``intent`` (r_max for push, r_min for nuke); the
    popular/unpopular sets use strict ``count > pop_threshold`` and
    ``count <= unpop_threshold``.
    """

    count: dict[int, int]
    mean: dict[int, float]
    std: dict[int, float]
    extreme_fraction: dict[int, float]
    system_mean: float
    system_std: float
    mean_profile_len: float
    profile_len_sq_dev: float
    popular: frozenset[int]
    unpopular: frozenset[int]
    intent: str
    n_items: int
    pop_threshold: int
    unpop_threshold: int
    scale: Scale


def compute_item_stats(
    ds: RatingDataset,
    pop_threshold: int = 200,
    unpop_threshold: int = 5,
    intent: str = PUSH,
    relative: bool = False,
) -> ItemStats:
    """Exact per-item counts/means/stds plus popularity partition for ``ds``.

    With ``relative=True`` the thresholds are replaced by the top/bottom
    decile of the per-item rating-count distribution, for datasets where the
    absolute defaults make no sense. Items with one rating get std 1.0 so
    that mean-centred normal draws stay usable.
    """
    _check_intent(intent)
    flat = ds.flat()
    n_items = ds.n_items
    counts = np.bincount(flat.item_idx, minlength=n_items)
    sums = np.bincount(flat.item_idx, weights=flat.ratings, minlength=n_items)
    sq = np.bincount(
        flat.item_idx, weights=flat.ratings.astype(np.float64) ** 2, minlength=n_items
    )
    means = sums / counts
    var = np.zeros(n_items)
    multi = counts > 1
    var[multi] = (sq[multi] - counts[multi] * means[multi] ** 2) / (counts[multi] - 1)
    stds = np.sqrt(np.maximum(var, 0.0))
    stds[~multi] = 1.0

    extreme = ds.scale.extreme(intent)
    ext_counts = np.bincount(
        flat.item_idx[flat.ratings == extreme], minlength=n_items
    )
    fj = ext_counts / counts

    if relative:
        deciles = np.quantile(counts, [0.1, 0.9])
        unpop_threshold = int(deciles[0])
        pop_threshold = int(deciles[1])
    if unpop_threshold > pop_threshold:
        raise ValueError(
            f"unpop_threshold {unpop_threshold} > pop_threshold {pop_threshold} "
            "would make the popular and unpopular sets overlap"
        )
    item_arr = np.asarray(ds.items)
    popular = frozenset(item_arr[counts > pop_threshold].tolist())
    unpopular = frozenset(item_arr[counts <= unpop_threshold].tolist())

    all_ratings = flat.ratings.astype(np.float64)
    system_mean = float(all_ratings.mean())
    system_std = float(all_ratings.std(ddof=1)) if len(all_ratings) > 1 else 1.0
    lengths = np.array([len(ds.ratings[u]) for u in ds.users], dtype=np.float64)
    n_bar = float(lengths.mean())

    return ItemStats(
        count=dict(zip(ds.items, counts.tolist())),
        mean=dict(zip(ds.items, means.tolist())),
        std=dict(zip(ds.items, stds.tolist())),
        extreme_fraction=dict(zip(ds.items, fj.tolist())),
        system_mean=system_mean,
        system_std=system_std,
        mean_profile_len=n_bar,
        profile_len_sq_dev=float(((lengths - n_bar) ** 2).sum()),
        popular=popular,
        unpopular=unpopular,
        intent=intent,
        n_items=n_items,
        pop_threshold=int(pop_threshold),
        unpop_threshold=int(unpop_threshold),
        scale=ds.scale,
    )


def with_partition(stats: ItemStats, source: ItemStats) -> ItemStats:
    """Copy of ``stats`` using ``source``'s popular/unpopular partition.

    Popularity is a property of the whole system; when featurising a user
    half (or an injected copy of it) the stratum membership and set sizes
    must stay those of the full dataset, or the stratum ratios of otherwise
    identical users drift between matrices.
    """
    return dataclasses.replace(
        stats,
        popular=source.popular,
        unpopular=source.unpopular,
        pop_threshold=source.pop_threshold,
        unpop_threshold=source.unpop_threshold,
    )


def split_half(ds: RatingDataset, seed: int) -> tuple[RatingDataset, RatingDataset]:
    """User-disjoint halves; train gets ceil(N/2) users, deterministic in seed.

    Users are paired by profile length and each pair is split at random, so
    both halves carry comparable rating mass; with a heavy-tailed activity
    distribution a uniform split routinely gives one half several thousand
    ratings more, which skews every count-weighted feature between halves.
    """
    if ds.n_users < 2:
        raise ValueError("need at least 2 users to split")
    rng = np.random.default_rng(seed)
    by_len = sorted(ds.users, key=lambda u: (-len(ds.ratings[u]), u))
    train: list[int] = []
    test: list[int] = []
    for k in range(0, len(by_len) - 1, 2):
        a, b = by_len[k], by_len[k + 1]
        if rng.integers(2):
            a, b = b, a
        train.append(a)
        test.append(b)
    if len(by_len) % 2:
        train.append(by_len[-1])
    if len(train) != math.ceil(ds.n_users / 2):
        raise AssertionError("split size bookkeeping broke")
    return ds.subset(train), ds.subset(test)


# -- file formats -----------------------------------------------------------


def load_movielens_tab(path: str | os.PathLike, scale: tuple[int, int] = (1, 5)) -> RatingDataset:
    """Load a MovieLens u.data style file: ``user \\t item \\t rating \\t timestamp``.

    Timestamps are parsed and discarded. All users are labelled genuine.
    """
    scale = Scale(*scale)
    ratings: dict[int, dict[int, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataFormatError(
                    f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}"
                )
            try:
                u, i, r = int(parts[0]), int(parts[1]), int(parts[2])
                int(parts[3])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: non-integer field ({exc})") from None
            if not scale.contains(r):
                raise DataFormatError(
                    f"{path}:{lineno}: rating {r} outside scale {tuple(scale)}"
                )
            profile = ratings.setdefault(u, {})
            if i in profile:
                raise DataFormatError(
                    f"{path}:{lineno}: duplicate rating for user {u}, item {i}"
                )
            profile[i] = r
    if not ratings:
        raise DataFormatError(f"{path}: no ratings")
    return RatingDataset.from_ratings(ratings, scale)


def load_movielens_csv(
    path: str | os.PathLike,
    scale: tuple[int, int] = (1, 5),
    half_star: bool = False,
) -> RatingDataset:
    """Load a ratings.csv style file with header ``userId,movieId,rating,timestamp``.

    An optional trailing ``label`` column (the canonical dump format) is
    honoured. With ``half_star=True`` ratings are doubled before integer
    validation, turning a 0.5..5.0 half-star file into an integer 1..10
    dataset; the declared ``scale`` must be the doubled one.
    """
    scale = Scale(*scale)
    ratings: dict[int, dict[int, int]] = {}
    labels: dict[int, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = fh.readline().rstrip("\n").rstrip("\r")
        cols = tuple(header.split(","))
        if cols == MOVIELENS_CSV_HEADER:
            has_label = False
        elif cols == CANONICAL_CSV_HEADER:
            has_label = True
        else:
            raise DataFormatError(
                f"{path}:1: expected header {','.join(MOVIELENS_CSV_HEADER)}"
                f" (optionally +label), got {header!r}"
            )
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(cols):
                raise DataFormatError(
                    f"{path}:{lineno}: expected {len(cols)} fields, got {len(parts)}"
                )
            try:
                u, i = int(parts[0]), int(parts[1])
                raw = float(parts[2])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: bad field ({exc})") from None
            r = raw * 2 if half_star else raw
            if r != int(r):
                raise DataFormatError(
                    f"{path}:{lineno}: rating {parts[2]} is not on the declared scale"
                )
            r = int(r)
            if not scale.contains(r):
                raise DataFormatError(
                    f"{path}:{lineno}: rating {parts[2]} outside scale {tuple(scale)}"
                )
            profile = ratings.setdefault(u, {})
            if i in profile:
                raise DataFormatError(
                    f"{path}:{lineno}: duplicate rating for user {u}, item {i}"
                )
            profile[i] = r
            if has_label:
                lab = parts[4]
                if lab not in LABEL_VALUES:
                    raise DataFormatError(f"{path}:{lineno}: unknown label {lab!r}")
                labels[u] = lab
    if not ratings:
        raise DataFormatError(f"{path}: no ratings")
    return RatingDataset.from_ratings(ratings, scale, labels or None)


def dump_csv(ds: RatingDataset, path: str | os.PathLike) -> None:
    """Write the canonical CSV dump (loadable by :func:`load_movielens_csv`).

    Timestamps are written as 0; row order is (user, item) ascending so the
    dump is byte-deterministic.
    """
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(",".join(CANONICAL_CSV_HEADER) + "\n")
        for u in ds.users:
            lab = ds.labels[u]
            for i, r in ds.ratings[u].items():
                fh.write(f"{u},{i},{r},0,{lab}\n")
    os.replace(tmp, path)
