"""Synthesis of shilling attack profiles under the eight classic attack models.

Each generated profile rates three disjoint item groups: the target items
(pushed to the top of the scale or nuked to the bottom), a model-specific
selected set (popular, unpopular or segmented items at a prescribed rating)
and a camouflage filler set. Profiles are injected as new users labelled
``attacker`` so that evaluation keeps exact ground truth.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import ATTACKER, INTENTS, ItemStats, NUKE, RatingDataset

AOP = "AOP"
RANDOM = "Random"
AVERAGE = "Average"
BANDWAGON_AVERAGE = "BandwagonAverage"
BANDWAGON_RANDOM = "BandwagonRandom"
SEGMENT = "Segment"
REVERSE_BANDWAGON = "ReverseBandwagon"
LOVE_HATE = "LoveHate"

ATTACK_MODELS = (
    AOP,
    RANDOM,
    AVERAGE,
    BANDWAGON_AVERAGE,
    BANDWAGON_RANDOM,
    SEGMENT,
    REVERSE_BANDWAGON,
    LOVE_HATE,
)

# models whose selected set is nonempty, and the per-model filler policy
_SELECTED_MODELS = (BANDWAGON_AVERAGE, BANDWAGON_RANDOM, SEGMENT, REVERSE_BANDWAGON)
_ITEM_MEAN_FILLERS = (AOP, AVERAGE, BANDWAGON_AVERAGE)
_SYSTEM_MEAN_FILLERS = (RANDOM, BANDWAGON_RANDOM, REVERSE_BANDWAGON)
_EXTREME_FILLERS = (SEGMENT, LOVE_HATE)

DEFAULT_AOP_TOP_PERCENT = 0.2


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass(frozen=True)
class AttackSpec:
    """Parameters of one attack campaign (config-block serialisable)."""

    model: str
    intent: str = NUKE
    attack_size: float = 0.125
    filler_size: float = 0.052
    target_count: int = 1
    selected_count: int = 10
    aop_top_percent: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.model not in ATTACK_MODELS:
            raise ValueError(f"unknown attack model {self.model!r}")
        if self.intent not in INTENTS:
            raise ValueError(f"unknown intent {self.intent!r}")
        for name in ("attack_size", "filler_size"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")
        if self.selected_count < 0:
            raise ValueError("selected_count must be >= 0")
        if self.model == AOP:
            if self.aop_top_percent is None:
                object.__setattr__(self, "aop_top_percent", DEFAULT_AOP_TOP_PERCENT)
            elif not 0 < self.aop_top_percent <= 1:
                raise ValueError("aop_top_percent must be in (0, 1]")
        elif self.aop_top_percent is not None:
            raise ValueError("aop_top_percent only applies to the AOP model")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackSpec":
        return cls(**d)


@dataclass(frozen=True)
class AttackProfile:
    """One synthetic user: disjoint target / selected / filler rating maps."""

    targets: dict[int, int]
    selected: dict[int, int]
    fillers: dict[int, int]

    def all_ratings(self) -> dict[int, int]:
        merged = dict(self.targets)
        merged.update(self.selected)
        merged.update(self.fillers)
        return merged

    def n_rated(self) -> int:
        return len(self.targets) + len(self.selected) + len(self.fillers)


def select_special_items(
    stats: ItemStats, model: str, n: int, seed: int
) -> frozenset[int]:
    """Pick the model's selected items from the item-count distribution.

    Bandwagon models draw ``n`` random items above the popularity threshold;
    reverse bandwagon draws from items rated exactly once, widening to the
    minimal-count items when fewer than ``n`` singletons exist; segment takes
    the ``n`` items with the highest rating counts.
    """
    if n == 0 or model not in _SELECTED_MODELS:
        return frozenset()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if model in (BANDWAGON_AVERAGE, BANDWAGON_RANDOM):
        pool = sorted(stats.popular)
        if len(pool) < n:
            raise ValueError(
                f"only {len(pool)} items exceed the popularity threshold "
                f"{stats.pop_threshold}, need {n}"
            )
        return frozenset(rng.choice(pool, size=n, replace=False).tolist())
    if model == REVERSE_BANDWAGON:
        by_count = sorted(stats.count.items(), key=lambda kv: (kv[1], kv[0]))
        if len(by_count) < n:
            raise ValueError(f"dataset has {len(by_count)} items, need {n}")
        singletons = [i for i, c in by_count if c == 1]
        if len(singletons) >= n:
            pool = singletons
        else:
            # widen to every item at or below the n-th smallest count
            cutoff = by_count[n - 1][1]
            pool = [i for i, c in by_count if c <= cutoff]
        return frozenset(rng.choice(sorted(pool), size=n, replace=False).tolist())
    # segment: deterministic top-n by count, ties broken by item id
    ranked = sorted(stats.count.items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < n:
        raise ValueError(f"dataset has {len(ranked)} items, need {n}")
    return frozenset(i for i, _ in ranked[:n])


def filler_count(spec: AttackSpec, n_items: int, n_selected: int) -> int:
    """Fillers per profile: round(filler_size * |I|) minus the selected set,
    so total profile length is comparable across models at equal filler size."""
    return max(0, _round_half_up(spec.filler_size * n_items) - n_selected)


def generate_profiles(
    spec: AttackSpec, stats: ItemStats, ds: RatingDataset
) -> list[AttackProfile]:
    """Generate ``round(attack_size * genuine users)`` profiles for one campaign.

    All profiles in the campaign share the same randomly chosen target items
    and the same selected set; filler items are re-drawn per profile. Gaussian
    filler ratings are rounded to the nearest integer and clamped to the scale.
    """
    if stats.intent != spec.intent:
        raise ValueError(
            f"stats were computed for intent {stats.intent!r}, spec wants {spec.intent!r}"
        )
    root = np.random.SeedSequence(spec.seed)
    sel_seq, tgt_seq, fill_seq = root.spawn(3)

    sel_seed = int(np.random.default_rng(sel_seq).integers(2**63))
    selected_ids = select_special_items(stats, spec.model, spec.selected_count, sel_seed)

    rng_tgt = np.random.default_rng(tgt_seq)
    target_pool = [i for i in ds.items if i not in selected_ids]
    if len(target_pool) < spec.target_count:
        raise ValueError("not enough items left to pick targets")
    targets = frozenset(
        rng_tgt.choice(target_pool, size=spec.target_count, replace=False).tolist()
    )

    n_fill = filler_count(spec, ds.n_items, len(selected_ids))
    if spec.model == AOP:
        top_n = max(1, _round_half_up(spec.aop_top_percent * ds.n_items))
        ranked = sorted(stats.count.items(), key=lambda kv: (-kv[1], kv[0]))
        pool = [i for i, _ in ranked[:top_n] if i not in targets]
    else:
        pool = [i for i in ds.items if i not in selected_ids and i not in targets]
    if n_fill > len(pool):
        raise ValueError(
            f"filler count {n_fill} exceeds the {len(pool)} eligible items"
            + (" in the AOP popular pool" if spec.model == AOP else "")
        )
    pool_arr = np.asarray(pool)

    r_target = ds.scale.extreme(spec.intent)
    r_opposite = ds.scale.opposite(spec.intent)
    if spec.model == REVERSE_BANDWAGON:
        r_selected = r_opposite
    else:
        r_selected = r_target
    target_map = {i: r_target for i in sorted(targets)}
    selected_map = {i: r_selected for i in sorted(selected_ids)}

    n_profiles = _round_half_up(spec.attack_size * len(ds.genuine_users))
    profiles = []
    for child in fill_seq.spawn(n_profiles):
        rng = np.random.default_rng(child)
        items = rng.choice(pool_arr, size=n_fill, replace=False)
        if spec.model in _EXTREME_FILLERS:
            vals = np.full(n_fill, r_opposite)
        elif spec.model in _SYSTEM_MEAN_FILLERS:
            vals = rng.normal(stats.system_mean, stats.system_std, size=n_fill)
        else:  # item-mean models: AOP, Average, BandwagonAverage
            mu = np.array([stats.mean[i] for i in items.tolist()])
            sd = np.array([stats.std[i] for i in items.tolist()])
            vals = rng.normal(mu, sd)
        vals = np.clip(np.rint(vals), ds.scale.r_min, ds.scale.r_max).astype(int)
        order = np.argsort(items)
        fillers = dict(zip(items[order].tolist(), vals[order].tolist()))
        profiles.append(
            AttackProfile(targets=dict(target_map), selected=dict(selected_map), fillers=fillers)
        )
    return profiles


def inject(ds: RatingDataset, profiles: list[AttackProfile]) -> RatingDataset:
    """Append the profiles as new attacker-labelled users; genuine rows untouched."""
    if not profiles:
        return ds
    next_uid = ds.users[-1] + 1
    new_profiles = {
        next_uid + k: prof.all_ratings() for k, prof in enumerate(profiles)
    }
    return ds.with_new_users(new_profiles, ATTACKER)
