"""Per-user feature vectors: 12 rating-behaviour and 8 item-distribution attributes.

The rating-behaviour vector measures how a user's ratings deviate from the
item consensus (RDMA/WDMA/WDA/FMD), how the hypothesised target/filler
partition looks (MeanVar, FMV, FMTD, TMF), and dispersion statistics
(LengthVar, Entropy, FAC, UnRAP's Hv score). The item-distribution vector is
a set of count ratios over item strata (popular, unpopular, extreme-rated).
Degenerate denominators always fall back to 0 so every vector is finite.

The hypothesised target set of a user is the set of items they rated with
the extreme value for the configured intent (r_max for push, r_min for
nuke); the filler set is every other rated item.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import ItemStats, RatingDataset

RATING_ATTRIBUTES = (
    "RDMA",
    "WDMA",
    "WDA",
    "FMD",
    "MeanVar",
    "FMV",
    "FMTD",
    "TMF",
    "LengthVar",
    "Entropy",
    "FAC",
    "UnRAPHv",
)
ITEM_ATTRIBUTES = (
    "FSTI",
    "FSPI",
    "FSPII",
    "FSUI",
    "FSUII",
    "FSMAXRTI",
    "FSMINRTI",
    "FSARTI",
)
N_RATING_ATTRIBUTES = len(RATING_ATTRIBUTES)
N_ITEM_ATTRIBUTES = len(ITEM_ATTRIBUTES)


@dataclass(frozen=True)
class ProfileFeatures:
    """Feature vectors of a single user."""

    user: int
    rating_vec: np.ndarray  # (12,)
    item_vec: np.ndarray    # (8,)


@dataclass(frozen=True)
class FeatureTable:
    """Stacked feature vectors for every user of one dataset (row-aligned)."""

    users: tuple[int, ...]
    labels: tuple[str, ...]
    rating_mat: np.ndarray  # (N, 12)
    item_mat: np.ndarray    # (N, 8)

    def row(self, user: int) -> ProfileFeatures:
        k = self.users.index(user)
        return ProfileFeatures(user, self.rating_mat[k], self.item_mat[k])


def _check_stats_intent(stats: ItemStats, intent: str) -> None:
    if stats.intent != intent:
        raise ValueError(
            f"stats were computed for intent {stats.intent!r}, not {intent!r}"
        )


def rating_attributes(
    profile: Mapping[int, int], stats: ItemStats, intent: str
) -> np.ndarray:
    """12-vector (RDMA, WDMA, WDA, FMD, MeanVar, FMV, FMTD, TMF, LengthVar,
    Entropy, FAC, UnRAP-Hv) for one user profile."""
    _check_stats_intent(stats, intent)
    items = sorted(profile)
    r = np.array([float(profile[i]) for i in items])
    rbar = np.array([stats.mean[i] for i in items])
    nr = np.array([stats.count[i] for i in items], dtype=np.float64)
    fj = np.array([stats.extreme_fraction[i] for i in items])
    return _rating_vec(r, rbar, nr, fj, len(r), stats)


def _rating_vec(r, rbar, nr, fj, n_u, stats: ItemStats) -> np.ndarray:
    scale = stats.scale
    extreme = scale.extreme(stats.intent)
    dev = np.abs(r - rbar)
    user_mean = r.mean()

    rdma = float(np.mean(dev / nr))
    wdma = float(np.mean(dev / nr**2))
    wda = float(np.sum(dev / nr))
    fmd = float(np.mean(dev))

    tmask = r == extreme
    fmask = ~tmask
    n_f = int(fmask.sum())
    meanvar = float(np.mean((r[fmask] - user_mean) ** 2)) if n_f else 0.0
    fmv = float(np.mean((r[fmask] - rbar[fmask]) ** 2)) if n_f else 0.0
    if n_f and n_f < n_u:
        fmtd = float(abs(r[tmask].mean() - r[fmask].mean()))
    else:
        fmtd = 0.0
    tmf = float(fj[tmask].max()) if tmask.any() else 0.0

    if stats.profile_len_sq_dev > 0:
        lengthvar = abs(n_u - stats.mean_profile_len) / stats.profile_len_sq_dev
    else:
        lengthvar = 0.0

    hist = np.bincount(
        (r - scale.r_min).astype(np.int64), minlength=scale.r_max - scale.r_min + 1
    )
    p = hist[hist > 0] / n_u
    entropy = float(-(p * np.log2(p)).sum())

    sx = r - user_mean
    sy = rbar - rbar.mean()
    denom = np.sqrt((sx**2).sum() * (sy**2).sum())
    fac = float((sx * sy).sum() / denom) if denom > 0 else 0.0

    unrap_den = float(((r - rbar) ** 2).sum())
    if unrap_den > 0:
        unrap = float(((r - user_mean - rbar + stats.system_mean) ** 2).sum()) / unrap_den
    else:
        unrap = 0.0

    return np.array(
        [rdma, wdma, wda, fmd, meanvar, fmv, fmtd, tmf, lengthvar, entropy, fac, unrap]
    )


def item_attributes(
    profile: Mapping[int, int], stats: ItemStats, r_mid: int | None = None
) -> np.ndarray:
    """8-vector of item-stratum ratios (FSTI .. FSARTI) for one user profile.

    ``r_mid`` is the mid-scale value counted by FSARTI; defaults to the
    integer midpoint of the scale (3 on a 1..5 scale).
    """
    items = sorted(profile)
    r = np.array([float(profile[i]) for i in items])
    pop = np.array([i in stats.popular for i in items])
    unpop = np.array([i in stats.unpopular for i in items])
    return _item_vec(r, pop, unpop, stats, r_mid)


def _item_vec(r, pop_mask, unpop_mask, stats: ItemStats, r_mid: int | None) -> np.ndarray:
    scale = stats.scale
    if r_mid is None:
        r_mid = scale.mid()
    n_u = len(r)
    n_items = stats.n_items
    n_pop_rated = int(pop_mask.sum())
    n_unpop_rated = int(unpop_mask.sum())
    return np.array(
        [
            n_u / n_items,
            n_pop_rated / len(stats.popular) if stats.popular else 0.0,
            n_pop_rated / n_u,
            n_unpop_rated / len(stats.unpopular) if stats.unpopular else 0.0,
            n_unpop_rated / n_u,
            int((r == scale.r_max).sum()) / n_items,
            int((r == scale.r_min).sum()) / n_items,
            int((r == r_mid).sum()) / n_items,
        ]
    )


def extract_features(
    ds: RatingDataset,
    stats: ItemStats,
    intent: str,
    r_mid: int | None = None,
    users: tuple[int, ...] | None = None,
) -> FeatureTable:
    """Feature vectors for the given users of ``ds`` (default: all), computed
    against ``stats``; vectorised over each user's rating rows."""
    _check_stats_intent(stats, intent)
    flat = ds.flat()
    mean_arr = np.array([stats.mean[i] for i in ds.items])
    count_arr = np.array([stats.count[i] for i in ds.items], dtype=np.float64)
    fj_arr = np.array([stats.extreme_fraction[i] for i in ds.items])
    pop_arr = np.array([i in stats.popular for i in ds.items])
    unpop_arr = np.array([i in stats.unpopular for i in ds.items])

    users = tuple(ds.users) if users is None else tuple(users)
    n = len(users)
    rating_mat = np.empty((n, N_RATING_ATTRIBUTES))
    item_mat = np.empty((n, N_ITEM_ATTRIBUTES))
    for k, u in enumerate(users):
        start, stop = flat.user_slices[u]
        idx = flat.item_idx[start:stop]
        r = flat.ratings[start:stop].astype(np.float64)
        rating_mat[k] = _rating_vec(
            r, mean_arr[idx], count_arr[idx], fj_arr[idx], stop - start, stats
        )
        item_mat[k] = _item_vec(r, pop_arr[idx], unpop_arr[idx], stats, r_mid)
    labels = tuple(ds.labels[u] for u in users)
    return FeatureTable(users, labels, rating_mat, item_mat)


# -- normalisation ------------------------------------------------------------


@dataclass(frozen=True)
class Normalizer:
    """Componentwise affine map to [-1, 1] using training min/max bounds.

    Training minima map to -1 and maxima to +1; zero-range attributes map to
    0; values outside the training range are not clipped.
    """

    lo: np.ndarray
    hi: np.ndarray

    def transform(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        span = self.hi - self.lo
        out = np.zeros_like(v)
        ok = span > 0
        scaled = 2.0 * (v[..., ok] - self.lo[ok]) / span[ok] - 1.0
        out[..., ok] = scaled
        return out


def fit_normalizer(features: np.ndarray) -> Normalizer:
    """Exact componentwise min/max over the training rows (requires >= 2 rows)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise ValueError("need a 2-d array with at least 2 training rows")
    return Normalizer(lo=features.min(axis=0), hi=features.max(axis=0))


def apply_normalizer(norm: Normalizer, v: np.ndarray) -> np.ndarray:
    return norm.transform(v)


def write_features_csv(table: FeatureTable, path: str, header_comment: str | None = None) -> None:
    """Export one row per user: ``user,label,RDMA,...,UnRAPHv,FSTI,...,FSARTI``."""
    cols = ("user", "label") + RATING_ATTRIBUTES + ITEM_ATTRIBUTES
    with open(path, "w", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(cols) + "\n")
        for k, u in enumerate(table.users):
            vals = [f"{x:.12g}" for x in table.rating_mat[k]] + [
                f"{x:.12g}" for x in table.item_mat[k]
            ]
            fh.write(f"{u},{table.labels[k]}," + ",".join(vals) + "\n")
