"""Deterministic synthetic rating datasets shaped like the MovieLens benchmarks.

The generators produce sparse integer rating matrices with a long-tailed item
popularity distribution, per-item quality, per-user bias and rating noise, so
genuine profiles exhibit the consensus structure the detection features rely
on. Counts and global statistics are matched to the public benchmarks
(943 x 1682 with 100000 ratings and mean about 3.53; 706 users with 100023
ratings on a half-star scale), which makes the evaluation suite self-contained
when the real files are not on disk. Everything is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np

from .dataset import RatingDataset, Scale


def synth_dataset(
    n_users: int,
    n_items: int,
    n_ratings: int,
    scale: tuple[int, int] = (1, 5),
    seed: int = 0,
    min_user_ratings: int = 20,
    popularity_exponent: float = 1.3,
    popularity_shift: float = 25.0,
    quality_std: float = 0.3,
    quality_pop_coupling: float = 0.25,
    bias_std: float = 0.55,
    noise_std: float = 0.7,
    noise_het: float = 0.05,
    popularity_tilt_std: float = 0.3,
    erratic_frac: float = 0.0,
    base_mean: float | None = None,
    activity_sigma: float = 0.75,
    max_user_ratings: int | None = None,
    cover_all_items: bool = True,
) -> RatingDataset:
    """Generate a genuine-user rating dataset with the requested exact counts.

    Item popularity follows a shuffled power law, user activity a clipped
    lognormal rescaled to hit ``n_ratings`` exactly, and each rating is
    ``clip(round(base + quality_i + bias_u + noise))``. Users are
    heterogeneous in two ways that keep their item-stratum ratios from being
    a pure function of profile length: a per-user popularity tilt (niche
    versus mainstream sampling) and a per-user noise scale. An ``erratic``
    slice of the population ignores consensus entirely (uniform raters and
    all-or-nothing extremists), like the noise raters every real rating
    corpus contains. With ``cover_all_items`` every item ends up rated at
    least once (rating swaps keep the totals exact).
    """
    scale = Scale(*scale)
    if n_ratings < n_users * min_user_ratings:
        raise ValueError("n_ratings too small for the per-user minimum")
    if n_ratings > n_users * n_items:
        raise ValueError("n_ratings exceeds the matrix size")
    if base_mean is None:
        base_mean = scale.r_min + 0.6155 * (scale.r_max - scale.r_min)
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    # long-tailed popularity, assignment shuffled over item ids; the bottom
    # slice is suppressed so the catalogue keeps an obscure singleton tail
    ranks = np.arange(1, n_items + 1, dtype=np.float64)
    weights = (ranks + popularity_shift) ** -popularity_exponent
    weights[int(0.92 * n_items):] *= 0.05
    rng.shuffle(weights)
    weights /= weights.sum()

    z_pop = (np.log(weights) - np.log(weights).mean()) / np.log(weights).std()
    quality = quality_pop_coupling * z_pop * quality_std + rng.normal(
        0.0, quality_std, size=n_items
    )
    # clipped so no user's offset alone drags the whole value histogram
    bias = np.clip(rng.normal(0.0, bias_std, size=n_users), -2 * bias_std, 2 * bias_std)

    cap = n_items if max_user_ratings is None else min(max_user_ratings, n_items)
    counts = _user_counts(
        rng, n_users, n_items, n_ratings, min_user_ratings, cap, activity_sigma
    )

    # per-user weighted sampling without replacement via Gumbel races; the
    # tilt exponent concentrates (or flattens) each user's popularity profile,
    # clipped below so even the nichest users keep a mainstream core
    log_w = np.log(weights)
    tilt = np.clip(
        rng.normal(0.0, popularity_tilt_std, size=n_users),
        -1.8 * popularity_tilt_std,
        3.0 * popularity_tilt_std,
    )
    profiles_items: list[np.ndarray] = []
    for u in range(n_users):
        keys = rng.gumbel(size=n_items) + (1.0 + tilt[u]) * log_w
        top = np.argpartition(-keys, counts[u] - 1)[: counts[u]]
        profiles_items.append(np.sort(top))

    if cover_all_items:
        _cover_missing_items(rng, profiles_items, n_items, min_user_ratings)

    half = (scale.r_max - scale.r_min) / 4.0  # scale-relative effect sizes
    noise_scale = noise_std * np.exp(rng.normal(0.0, noise_het, size=n_users))
    style = rng.random(n_users)  # < erratic_frac/2: extremist; < erratic_frac: constant rater
    ratings: dict[int, dict[int, int]] = {}
    for u in range(n_users):
        items = profiles_items[u]
        n_u = len(items)
        if style[u] < erratic_frac / 2:
            liked = quality[items] + bias[u] + rng.normal(0.0, noise_scale[u], size=n_u) > 0
            vals = np.where(liked, scale.r_max, scale.r_min).astype(np.float64)
        elif style[u] < erratic_frac:
            vals = base_mean + half * bias[u] * 2.0 + rng.normal(0.0, 0.2 * half, size=n_u)
        else:
            vals = (
                base_mean
                + half * (quality[items] + bias[u])
                + rng.normal(0.0, half * noise_scale[u], size=n_u)
            )
        vals = np.clip(np.rint(vals), scale.r_min, scale.r_max).astype(int)
        ratings[u + 1] = dict(zip((items + 1).tolist(), vals.tolist()))
    return RatingDataset.from_ratings(ratings, scale)


def _user_counts(rng, n_users, n_items, n_ratings, min_count, max_count, sigma) -> np.ndarray:
    raw = rng.lognormal(mean=0.0, sigma=sigma, size=n_users)
    counts = np.clip(
        np.rint(raw * n_ratings / raw.sum()).astype(int), min_count, max_count
    )
    # walk the deficit to exactly n_ratings without violating the bounds
    diff = n_ratings - int(counts.sum())
    order = rng.permutation(n_users)
    k = 0
    while diff != 0:
        u = order[k % n_users]
        if diff > 0 and counts[u] < max_count:
            counts[u] += 1
            diff -= 1
        elif diff < 0 and counts[u] > min_count:
            counts[u] -= 1
            diff += 1
        k += 1
    return counts


def _cover_missing_items(rng, profiles_items, n_items, min_count) -> None:
    """Swap one rating of a busy user onto each unrated item (totals unchanged)."""
    item_counts = np.zeros(n_items, dtype=int)
    for items in profiles_items:
        item_counts[items] += 1
    missing = np.nonzero(item_counts == 0)[0]
    if len(missing) == 0:
        return
    by_size = np.argsort([-len(p) for p in profiles_items])
    for j, item in enumerate(missing):
        u = int(by_size[j % len(by_size)])
        items = profiles_items[u]
        # drop the user's most redundant item that is rated elsewhere too
        drop_order = np.argsort(-item_counts[items])
        for pos in drop_order:
            if item_counts[items[pos]] > 1 and items[pos] != item:
                item_counts[items[pos]] -= 1
                items = np.delete(items, pos)
                break
        profiles_items[u] = np.sort(np.append(items, item))
        item_counts[item] += 1


def make_ml100k_like(seed: int = 0) -> RatingDataset:
    """943 users, 1682 items, exactly 100000 integer ratings on 1..5."""
    return synth_dataset(943, 1682, 100000, scale=(1, 5), seed=seed, max_user_ratings=420)


def make_latest_small_like(seed: int = 0) -> RatingDataset:
    """706 users, 8570-item catalogue, exactly 100023 ratings on the doubled
    half-star scale 1..10 (write with ``half_star=True`` to get 0.5..5.0)."""
    return synth_dataset(
        706, 8570, 100023, scale=(1, 10), seed=seed, max_user_ratings=700,
        cover_all_items=False
    )


def make_tiny(
    n_users: int = 60,
    n_items: int = 120,
    n_ratings: int = 1800,
    seed: int = 0,
    scale: tuple[int, int] = (1, 5),
) -> RatingDataset:
    """Small dataset with the same structure, for fast tests."""
    return synth_dataset(
        n_users, n_items, n_ratings, scale=scale, seed=seed, min_user_ratings=8
    )


def write_tab(ds: RatingDataset, path) -> None:
    """Write u.data format: ``user \\t item \\t rating \\t timestamp``."""
    ts = 874000000
    with open(path, "w", encoding="utf-8") as fh:
        for u in ds.users:
            for i, r in ds.ratings[u].items():
                fh.write(f"{u}\t{i}\t{r}\t{ts}\n")
                ts += 1


def write_ratings_csv(ds: RatingDataset, path, half_star: bool = False) -> None:
    """Write ratings.csv format; with ``half_star`` the integer ratings are
    halved back to the 0.5-step star scale."""
    ts = 874000000
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("userId,movieId,rating,timestamp\n")
        for u in ds.users:
            for i, r in ds.ratings[u].items():
                val = f"{r / 2:g}" if half_star else str(r)
                fh.write(f"{u},{i},{val},{ts}\n")
                ts += 1
