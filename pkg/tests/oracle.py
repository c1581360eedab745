"""Brute-force reference implementations used to cross-check the library.

Everything here recomputes quantities from the raw dataset with explicit
Python loops and shares no code with the package: item aggregates, all 12
rating-behaviour attributes, all 8 item-distribution attributes and a
distance-sort KNN. Deliberately slow and literal.
"""

import math

import numpy as np


def item_aggregates(ds):
    """counts, means, extreme fractions (per intent) via plain loops."""
    counts, sums = {}, {}
    for u in ds.users:
        for i, r in ds.ratings[u].items():
            counts[i] = counts.get(i, 0) + 1
            sums[i] = sums.get(i, 0) + r
    means = {i: sums[i] / counts[i] for i in counts}
    total = 0
    n_total = 0
    for u in ds.users:
        for r in ds.ratings[u].values():
            total += r
            n_total += 1
    system_mean = total / n_total
    return counts, means, system_mean


def extreme_fraction(ds, intent):
    extreme = ds.scale.r_max if intent == "push" else ds.scale.r_min
    frac = {}
    counts, _, _ = item_aggregates(ds)
    hits = {}
    for u in ds.users:
        for i, r in ds.ratings[u].items():
            if r == extreme:
                hits[i] = hits.get(i, 0) + 1
    for i in counts:
        frac[i] = hits.get(i, 0) / counts[i]
    return frac


def rating_attributes(ds, user, intent):
    """The 12-vector recomputed from scratch (list, same order as the library)."""
    counts, means, system_mean = item_aggregates(ds)
    fj = extreme_fraction(ds, intent)
    extreme = ds.scale.r_max if intent == "push" else ds.scale.r_min

    profile = ds.ratings[user]
    n_u = len(profile)
    items = sorted(profile)

    rdma = sum(abs(profile[i] - means[i]) / counts[i] for i in items) / n_u
    wdma = sum(abs(profile[i] - means[i]) / counts[i] ** 2 for i in items) / n_u
    wda = sum(abs(profile[i] - means[i]) / counts[i] for i in items)
    fmd = sum(abs(profile[i] - means[i]) for i in items) / n_u

    user_mean = sum(profile.values()) / n_u
    targets = [i for i in items if profile[i] == extreme]
    fillers = [i for i in items if profile[i] != extreme]

    if fillers:
        meanvar = sum((profile[j] - user_mean) ** 2 for j in fillers) / len(fillers)
        fmv = sum((profile[i] - means[i]) ** 2 for i in fillers) / len(fillers)
    else:
        meanvar = 0.0
        fmv = 0.0
    if targets and fillers:
        fmtd = abs(
            sum(profile[i] for i in targets) / len(targets)
            - sum(profile[k] for k in fillers) / len(fillers)
        )
    else:
        fmtd = 0.0
    tmf = max((fj[j] for j in targets), default=0.0)

    lengths = [len(ds.ratings[u]) for u in ds.users]
    n_bar = sum(lengths) / len(lengths)
    len_sq = sum((n - n_bar) ** 2 for n in lengths)
    lengthvar = abs(n_u - n_bar) / len_sq if len_sq > 0 else 0.0

    entropy = 0.0
    for v in range(ds.scale.r_min, ds.scale.r_max + 1):
        c = sum(1 for r in profile.values() if r == v)
        if c:
            p = c / n_u
            entropy -= p * math.log2(p)

    mean_item_mean = sum(means[i] for i in items) / n_u
    sxx = sum((profile[i] - user_mean) ** 2 for i in items)
    syy = sum((means[i] - mean_item_mean) ** 2 for i in items)
    sxy = sum((profile[i] - user_mean) * (means[i] - mean_item_mean) for i in items)
    denom = math.sqrt(sxx * syy)
    fac = sxy / denom if denom > 0 else 0.0

    unrap_den = sum((profile[i] - means[i]) ** 2 for i in items)
    if unrap_den > 0:
        unrap = (
            sum((profile[i] - user_mean - means[i] + system_mean) ** 2 for i in items)
            / unrap_den
        )
    else:
        unrap = 0.0

    return [rdma, wdma, wda, fmd, meanvar, fmv, fmtd, tmf, lengthvar, entropy, fac, unrap]


def item_attributes(ds, user, pop_threshold, unpop_threshold, r_mid=None):
    """The 8-vector recomputed from scratch."""
    counts, _, _ = item_aggregates(ds)
    popular = {i for i, c in counts.items() if c > pop_threshold}
    unpopular = {i for i, c in counts.items() if c <= unpop_threshold}
    if r_mid is None:
        r_mid = (ds.scale.r_min + ds.scale.r_max) // 2

    profile = ds.ratings[user]
    n_u = len(profile)
    n_items = len(counts)
    pop_rated = sum(1 for i in profile if i in popular)
    unpop_rated = sum(1 for i in profile if i in unpopular)
    return [
        n_u / n_items,
        pop_rated / len(popular) if popular else 0.0,
        pop_rated / n_u,
        unpop_rated / len(unpopular) if unpopular else 0.0,
        unpop_rated / n_u,
        sum(1 for r in profile.values() if r == ds.scale.r_max) / n_items,
        sum(1 for r in profile.values() if r == ds.scale.r_min) / n_items,
        sum(1 for r in profile.values() if r == r_mid) / n_items,
    ]


def knn_labels(train_x, train_y, test_x, k):
    """Exhaustive distance-sort KNN with the even-k tie broken toward 1."""
    out = []
    for row in test_x:
        dists = []
        for xi, yi in zip(train_x, train_y):
            d = math.sqrt(sum((a - b) ** 2 for a, b in zip(row, xi)))
            dists.append((d, yi))
        dists.sort(key=lambda t: t[0])
        votes = sum(y for _, y in dists[:k])
        out.append(1 if 2 * votes >= k else 0)
    return out


def random_dataset(rng, max_users=50, scale=(1, 5)):
    """Small random dataset satisfying the container invariants."""
    from shillguard.dataset import RatingDataset

    n_users = int(rng.integers(3, max_users + 1))
    n_items = int(rng.integers(4, 26))
    ratings = {}
    for u in range(1, n_users + 1):
        n = int(rng.integers(1, n_items + 1))
        items = rng.choice(np.arange(1, n_items + 1), size=n, replace=False)
        ratings[u] = {
            int(i): int(rng.integers(scale[0], scale[1] + 1)) for i in items
        }
    return RatingDataset.from_ratings(ratings, scale)
