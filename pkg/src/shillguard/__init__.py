"""Shilling / profile-injection attack detection for collaborative filtering.

The pipeline: load a sparse rating dataset, describe every user by 12
rating-behaviour attributes and 8 item-distribution attributes, learn a
regularised least-squares map from the first to the second on (mostly
genuine) training users, and flag users whose residual Mahalanobis norm
exceeds a threshold. Attack-profile synthesis under the eight classic
models and a seeded evaluation grid with a KNN baseline are included.
"""

from .attacks import ATTACK_MODELS, AttackProfile, AttackSpec, generate_profiles, inject, select_special_items
from .dataset import (
    ATTACKER,
    GENUINE,
    INTENTS,
    NUKE,
    PUSH,
    ItemStats,
    RatingDataset,
    Scale,
    compute_item_stats,
    dump_csv,
    load_movielens_csv,
    load_movielens_tab,
    split_half,
)
from .detector import choose_threshold, classify, mahalanobis_scores, residual, roc_sweep, score
from .evaluation import (
    ExperimentConfig,
    MetricsGrid,
    build_training_set,
    cell_roc,
    knn_baseline,
    metrics,
    run_experiment,
    score_dataset,
    train_detector,
)
from .features import (
    ITEM_ATTRIBUTES,
    RATING_ATTRIBUTES,
    Normalizer,
    ProfileFeatures,
    apply_normalizer,
    extract_features,
    fit_normalizer,
    item_attributes,
    rating_attributes,
)
from .regression import (
    LINEAR,
    QUADRATIC,
    RunningSums,
    TrainedModel,
    accumulate,
    apply_regressor,
    covariance,
    load_model,
    predictive_power,
    regress,
    regressor_dim,
    save_model,
    solve_model,
    sweep_lambda,
)

__version__ = "0.1.0"
