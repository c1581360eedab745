"""Shared fixtures: hand datasets, random-dataset factories, synthetic corpora."""

import os

import numpy as np
import pytest
from hypothesis import settings

from shillguard import synth
from shillguard.dataset import RatingDataset

settings.register_profile("ci", max_examples=60)
settings.register_profile("dev", max_examples=20)
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "dev"))

# five users, five items; items 10/11/13 have 4 raters, 12/14 have 3
HAND_RATINGS = {
    1: {10: 5, 11: 3, 12: 4, 13: 2},
    2: {10: 4, 11: 2, 14: 5},
    3: {10: 3, 12: 5, 13: 1, 14: 4},
    4: {11: 1, 13: 5},
    5: {10: 5, 11: 4, 12: 3, 13: 3, 14: 1},
}


@pytest.fixture
def hand_ds():
    return RatingDataset.from_ratings(HAND_RATINGS, (1, 5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tiny_ds():
    """Small structured dataset for pipeline tests (fast)."""
    return synth.make_tiny(n_users=80, n_items=150, n_ratings=3200, seed=5)


@pytest.fixture(scope="session")
def ml100k_like():
    """One deterministic full-size benchmark clone shared across tests."""
    return synth.make_ml100k_like(seed=1)
