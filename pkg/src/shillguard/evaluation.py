"""Experiment harness: seeded train/test protocol, metric grid and KNN baseline.

One repetition splits the dataset into user-disjoint halves, augments the
training half with a fixed mix of attack profiles (every training model at
every training filler size), fits the detector on it, picks the operating
threshold from genuine training scores, then injects each grid cell's attack
into the test half and scores it. Rates are averaged over repetitions whose
seeds derive from one master seed, so the whole grid is reproducible
bit-for-bit.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .attacks import (
    ATTACK_MODELS,
    BANDWAGON_AVERAGE,
    BANDWAGON_RANDOM,
    REVERSE_BANDWAGON,
    SEGMENT,
    AttackSpec,
    generate_profiles,
    inject,
)
from .dataset import (
    ATTACKER,
    INTENTS,
    NUKE,
    ItemStats,
    RatingDataset,
    compute_item_stats,
    load_movielens_csv,
    load_movielens_tab,
    split_half,
    with_partition,
)
from .detector import (
    choose_threshold,
    mahalanobis_scores,
    residual_matrix,
    roc_sweep,
)
from .features import FeatureTable, Normalizer, extract_features, fit_normalizer
from .regression import (
    QUADRATIC,
    REGRESSOR_KINDS,
    RunningSums,
    TrainedModel,
    apply_regressor,
    covariance,
    predictive_power,
    solve_model,
)

DEFAULT_ATTACK_SIZES = (0.025, 0.075, 0.125, 0.175, 0.225, 0.275, 0.325, 0.375, 0.425, 0.475)
DEFAULT_FILLER_SIZES = (0.013, 0.032, 0.052, 0.071, 0.091, 0.11, 0.13)
DEFAULT_SELECTED_COUNTS = {
    BANDWAGON_AVERAGE: 10,
    BANDWAGON_RANDOM: 10,
    REVERSE_BANDWAGON: 10,
    SEGMENT: 5,
}

METHOD_REGRESSION = "regression"
METHOD_KNN = "knn"

FIT_GENUINE = "genuine"
FIT_ALL = "all"


def _subseed(*parts: int) -> int:
    """Stable non-negative integer seed derived from an id tuple."""
    return int(np.random.SeedSequence(tuple(int(p) for p in parts)).generate_state(1, np.uint64)[0])


@dataclass
class ExperimentConfig:
    """Full description of one evaluation run (JSON round-trippable)."""

    dataset_path: str | None = None
    dataset_format: str = "tab"  # tab | csv
    half_star: bool = False
    scale: tuple[int, int] = (1, 5)
    intent: str = NUKE
    attack_models: tuple[str, ...] = ATTACK_MODELS
    attack_sizes: tuple[float, ...] = DEFAULT_ATTACK_SIZES
    filler_sizes: tuple[float, ...] = DEFAULT_FILLER_SIZES
    repetitions: int = 10
    master_seed: int = 0
    regressor: str = QUADRATIC
    lam: float = 1e-3
    fa_target: float = 0.10
    fit_population: str = FIT_GENUINE
    normalizer_population: str = FIT_GENUINE
    train_models: tuple[str, ...] = ATTACK_MODELS
    train_filler_sizes: tuple[float, ...] = DEFAULT_FILLER_SIZES
    train_profiles_per_cell: int = 60
    target_count: int = 1
    selected_counts: dict = field(default_factory=lambda: dict(DEFAULT_SELECTED_COUNTS))
    aop_top_percent: float = 0.2
    pop_threshold: int = 200
    unpop_threshold: int = 5
    r_mid: int | None = None
    threshold_calibration: str = "crossfit"  # crossfit | insample
    calibration_attack_size: float = 0.175
    knn: bool = False
    knn_k: int = 9

    def validate(self) -> list[str]:
        """All config problems at once (empty list when valid)."""
        errs = []
        if self.dataset_format not in ("tab", "csv"):
            errs.append(f"dataset_format must be tab or csv, got {self.dataset_format!r}")
        if self.intent not in INTENTS:
            errs.append(f"intent must be one of {INTENTS}, got {self.intent!r}")
        if self.regressor not in REGRESSOR_KINDS:
            errs.append(f"regressor must be one of {REGRESSOR_KINDS}")
        for name in ("attack_models", "train_models"):
            for m in getattr(self, name):
                if m not in ATTACK_MODELS:
                    errs.append(f"{name}: unknown attack model {m!r}")
        for name in ("attack_sizes", "filler_sizes", "train_filler_sizes"):
            for v in getattr(self, name):
                if not 0 < v <= 1:
                    errs.append(f"{name}: {v} outside (0, 1]")
        if self.repetitions < 1:
            errs.append("repetitions must be >= 1")
        if self.master_seed < 0:
            errs.append("master_seed must be >= 0")
        if self.lam < 0:
            errs.append("lambda must be >= 0")
        if not 0 <= self.fa_target <= 1:
            errs.append("fa_target must be in [0, 1]")
        if self.fit_population not in (FIT_GENUINE, FIT_ALL):
            errs.append(f"fit_population must be {FIT_GENUINE!r} or {FIT_ALL!r}")
        if self.normalizer_population not in (FIT_GENUINE, FIT_ALL):
            errs.append(f"normalizer_population must be {FIT_GENUINE!r} or {FIT_ALL!r}")
        if self.train_profiles_per_cell < 0:
            errs.append("train_profiles_per_cell must be >= 0")
        if self.target_count < 1:
            errs.append("target_count must be >= 1")
        if not 0 < self.aop_top_percent <= 1:
            errs.append("aop_top_percent must be in (0, 1]")
        if self.unpop_threshold > self.pop_threshold:
            errs.append("unpop_threshold must be <= pop_threshold")
        if self.threshold_calibration not in ("crossfit", "insample"):
            errs.append("threshold_calibration must be crossfit or insample")
        if not 0 <= self.calibration_attack_size <= 1:
            errs.append("calibration_attack_size must be in [0, 1]")
        if self.knn_k < 1:
            errs.append("knn_k must be >= 1")
        if len(self.scale) != 2 or self.scale[0] > self.scale[1]:
            errs.append(f"bad scale {self.scale}")
        return errs

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("scale", "attack_models", "attack_sizes", "filler_sizes",
                    "train_models", "train_filler_sizes"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        d = dict(d)
        for key in ("scale", "attack_models", "attack_sizes", "filler_sizes",
                    "train_models", "train_filler_sizes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def load_dataset(cfg: ExperimentConfig) -> RatingDataset:
    if not cfg.dataset_path:
        raise ValueError("config has no dataset_path")
    if cfg.dataset_format == "tab":
        return load_movielens_tab(cfg.dataset_path, cfg.scale)
    return load_movielens_csv(cfg.dataset_path, cfg.scale, half_star=cfg.half_star)


def system_partition(cfg: ExperimentConfig, ds: RatingDataset) -> ItemStats:
    """Item stats of the full dataset; its popular/unpopular partition is the
    system-level classification every derived matrix inherits."""
    return compute_item_stats(ds, cfg.pop_threshold, cfg.unpop_threshold, cfg.intent)


def _part_stats(
    ds: RatingDataset, cfg: ExperimentConfig, partition: ItemStats | None
) -> ItemStats:
    stats = compute_item_stats(ds, cfg.pop_threshold, cfg.unpop_threshold, cfg.intent)
    return with_partition(stats, partition) if partition is not None else stats


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingSet:
    """Featurised, normalised training matrix with attack ground truth.

    ``stats`` are the clean train-half statistics (used both to generate the
    attack mix and as the genuine rows' feature context); ``injected`` is the
    train half with the whole mix appended.
    """

    train_half: RatingDataset
    injected: RatingDataset
    stats: ItemStats
    table: FeatureTable
    rating_norm: Normalizer
    item_norm: Normalizer
    r_norm: np.ndarray
    i_norm: np.ndarray
    attacker_mask: np.ndarray


def build_training_set(
    train_half: RatingDataset,
    cfg: ExperimentConfig,
    seed: int,
    partition: ItemStats | None = None,
) -> TrainingSet:
    """Augment the training half with the configured per-model/per-filler mix,
    featurise everything and fit the normaliser on the result.

    Each cell's attack rows are featurised inside their own
    train-half-plus-cell matrix, so training rows live at the same matrix
    density a test half with one injected attack has; featurising the whole
    mix as a single matrix would inflate every per-item count far beyond
    anything seen at detection time. ``partition`` (usually the full
    dataset's stats) fixes the popular/unpopular classification.
    """
    n_gen = len(train_half.genuine_users)
    clean_stats = _part_stats(train_half, cfg, partition)
    gen_table = extract_features(train_half, clean_stats, cfg.intent, cfg.r_mid)

    all_profiles = []
    att_r, att_i = [], []
    if cfg.train_profiles_per_cell > 0 and cfg.train_models:
        if cfg.train_profiles_per_cell > n_gen:
            raise ValueError(
                f"train_profiles_per_cell={cfg.train_profiles_per_cell} exceeds "
                f"the {n_gen} genuine training users"
            )
        for model_name in cfg.train_models:
            mi = ATTACK_MODELS.index(model_name)
            for filler in cfg.train_filler_sizes:
                spec = _attack_spec(
                    cfg,
                    model_name,
                    attack_size=cfg.train_profiles_per_cell / n_gen,
                    filler_size=filler,
                    seed=_subseed(seed, 1, mi, int(round(filler * 10000))),
                )
                profiles = generate_profiles(spec, clean_stats, train_half)
                cell_ds = inject(train_half, profiles)
                cell_stats = _part_stats(cell_ds, cfg, partition)
                cell_uids = cell_ds.users[-len(profiles):]
                cell_table = extract_features(
                    cell_ds, cell_stats, cfg.intent, cfg.r_mid, users=cell_uids
                )
                att_r.append(cell_table.rating_mat)
                att_i.append(cell_table.item_mat)
                all_profiles.extend(profiles)

    injected = inject(train_half, all_profiles)
    att_uids = injected.users[-len(all_profiles):] if all_profiles else ()
    users = tuple(train_half.users) + tuple(att_uids)
    labels = tuple(train_half.labels[u] for u in train_half.users) + (ATTACKER,) * len(all_profiles)
    rating_mat = np.vstack([gen_table.rating_mat, *att_r]) if att_r else gen_table.rating_mat
    item_mat = np.vstack([gen_table.item_mat, *att_i]) if att_i else gen_table.item_mat
    table = FeatureTable(users, labels, rating_mat, item_mat)

    # by default the bounds are anchored on the genuine rows: the map is
    # identified on clean profiles, and anything outside the genuine feature
    # range should land outside [-1, 1] (no clipping) instead of compressing
    # the genuine scale; "all" reproduces fit-quality numbers on the mix
    if cfg.normalizer_population == FIT_GENUINE:
        rating_norm = fit_normalizer(gen_table.rating_mat)
        item_norm = fit_normalizer(gen_table.item_mat)
    else:
        rating_norm = fit_normalizer(table.rating_mat)
        item_norm = fit_normalizer(table.item_mat)
    return TrainingSet(
        train_half=train_half,
        injected=injected,
        stats=clean_stats,
        table=table,
        rating_norm=rating_norm,
        item_norm=item_norm,
        r_norm=rating_norm.transform(table.rating_mat),
        i_norm=item_norm.transform(table.item_mat),
        attacker_mask=np.array([lab == ATTACKER for lab in table.labels]),
    )


def _attack_spec(cfg, model_name, attack_size, filler_size, seed) -> AttackSpec:
    return AttackSpec(
        model=model_name,
        intent=cfg.intent,
        attack_size=attack_size,
        filler_size=filler_size,
        target_count=cfg.target_count,
        selected_count=cfg.selected_counts.get(model_name, 10),
        aop_top_percent=cfg.aop_top_percent if model_name == "AOP" else None,
        seed=seed,
    )


def _calibration_contexts(
    tset: TrainingSet,
    cfg: ExperimentConfig,
    partition: ItemStats | None,
    seed: int,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Genuine-user feature matrices inside attacked copies of the train half.

    One campaign per training attack model at the calibration attack size and
    the median training filler size; scoring matrices at detection time are
    attack-polluted, so the threshold is calibrated under the same regime.
    """
    if cfg.calibration_attack_size <= 0 or not cfg.train_models:
        return []
    fillers = sorted(cfg.train_filler_sizes) or [0.052]
    filler = fillers[len(fillers) // 2]
    out = []
    for model_name in cfg.train_models:
        mi = ATTACK_MODELS.index(model_name)
        spec = _attack_spec(
            cfg, model_name, cfg.calibration_attack_size, filler, _subseed(seed, 4, mi)
        )
        profiles = generate_profiles(spec, tset.stats, tset.train_half)
        cell = inject(tset.train_half, profiles)
        cstats = _part_stats(cell, cfg, partition)
        tab = extract_features(
            cell, cstats, cfg.intent, cfg.r_mid, users=tset.train_half.users
        )
        out.append(
            (
                tset.rating_norm.transform(tab.rating_mat),
                tset.item_norm.transform(tab.item_mat),
            )
        )
    return out


def _crossfit_scores(
    psi: np.ndarray,
    i_out: np.ndarray,
    c: np.ndarray,
    lam: float,
    folds: int,
    seed: int,
    contexts: list[tuple[np.ndarray, np.ndarray]] | None = None,
    kind: str | None = None,
) -> np.ndarray:
    """Out-of-fold Mahalanobis scores: each row is scored with a model fit on
    the other folds, removing the in-sample optimism of the flexible regressor
    so the threshold transfers to unseen genuine users. C is the shared
    metric. When attacked calibration ``contexts`` are given (row-aligned
    feature matrices of the same users), held-out rows are scored on their
    context features instead of the clean ones."""
    n = psi.shape[0]
    folds = max(2, min(folds, n))
    assign = np.random.default_rng(seed).permutation(n) % folds
    ctx = [
        (apply_regressor(kind, rn), inorm) for rn, inorm in (contexts or [])
    ]
    pooled = []
    scores = np.empty(n)
    for f in range(folds):
        hold = assign == f
        sums = RunningSums.from_batch(psi[~hold], i_out[~hold])
        m_f = solve_model(sums, lam)
        scores[hold] = mahalanobis_scores(residual_matrix(m_f, psi[hold], i_out[hold]), c)
        for psi_c, i_c in ctx:
            pooled.append(
                mahalanobis_scores(residual_matrix(m_f, psi_c[hold], i_c[hold]), c)
            )
    if ctx:
        return np.concatenate(pooled)
    return scores


def train_detector(
    tset: TrainingSet,
    cfg: ExperimentConfig,
    seed: int = 0,
    partition: ItemStats | None = None,
) -> tuple[TrainedModel, dict]:
    """Fit M and C on the configured population, pick the operating threshold
    from genuine training scores, and report predictive power."""
    psi = apply_regressor(cfg.regressor, tset.r_norm)
    fit_mask = (
        ~tset.attacker_mask
        if cfg.fit_population == FIT_GENUINE
        else np.ones(len(tset.attacker_mask), dtype=bool)
    )
    sums = RunningSums.from_batch(psi[fit_mask], tset.i_norm[fit_mask])
    m = solve_model(sums, cfg.lam)
    c = covariance(sums, m)
    gen = ~tset.attacker_mask
    if cfg.threshold_calibration == "crossfit":
        contexts = _calibration_contexts(tset, cfg, partition, seed)
        gen_scores = _crossfit_scores(
            psi[gen],
            tset.i_norm[gen],
            c,
            cfg.lam,
            folds=5,
            seed=_subseed(seed, 3),
            contexts=contexts,
            kind=cfg.regressor,
        )
    else:
        gen_scores = mahalanobis_scores(residual_matrix(m, psi[gen], tset.i_norm[gen]), c)
    threshold = choose_threshold(gen_scores, cfg.fa_target)
    scale = tset.injected.scale
    model = TrainedModel(
        kind=cfg.regressor,
        lam=cfg.lam,
        m=m,
        c=c,
        n_train=sums.n,
        rating_norm=tset.rating_norm,
        item_norm=tset.item_norm,
        intent=cfg.intent,
        scale=scale,
        r_mid=scale.mid() if cfg.r_mid is None else cfg.r_mid,
        pop_threshold=cfg.pop_threshold,
        unpop_threshold=cfg.unpop_threshold,
        threshold=threshold,
        fa_target=cfg.fa_target,
    )
    report = {
        "pp_train": predictive_power(m, psi, tset.i_norm),
        "pp_train_genuine": predictive_power(m, psi[gen], tset.i_norm[gen]),
    }
    return model, report


# -- scoring -------------------------------------------------------------------


@dataclass(frozen=True)
class ScoredSet:
    """Detection scores for every user of one dataset, with ground truth."""

    users: tuple[int, ...]
    scores: np.ndarray
    truth: np.ndarray  # bool, True = attacker
    r_norm: np.ndarray
    i_norm: np.ndarray


def score_dataset(
    model: TrainedModel, ds: RatingDataset, partition: ItemStats | None = None
) -> ScoredSet:
    """Featurise ``ds`` with its own item stats (inheriting ``partition``'s
    popularity classification when given), normalise with the frozen training
    bounds and score every user."""
    stats = compute_item_stats(ds, model.pop_threshold, model.unpop_threshold, model.intent)
    if partition is not None:
        stats = with_partition(stats, partition)
    table = extract_features(ds, stats, model.intent, model.r_mid)
    r_norm = model.rating_norm.transform(table.rating_mat)
    i_norm = model.item_norm.transform(table.item_mat)
    psi = apply_regressor(model.kind, r_norm)
    scores = mahalanobis_scores(residual_matrix(model.m, psi, i_norm), model.c)
    truth = np.array([lab == ATTACKER for lab in table.labels])
    return ScoredSet(table.users, scores, truth, r_norm, i_norm)


def metrics(
    detected: Iterable[int], attackers: Iterable[int], genuine: Iterable[int]
) -> tuple[float, float]:
    """(detection rate, false alarm rate) = (|D n A| / |A|, |D n G| / |G|)."""
    d, a, g = set(detected), set(attackers), set(genuine)
    if not a or not g:
        raise ValueError("both attacker and genuine sets must be nonempty")
    if a & g:
        raise ValueError("attacker and genuine sets overlap")
    if not d <= (a | g):
        raise ValueError("detected set contains users outside the evaluated population")
    return len(d & a) / len(a), len(d & g) / len(g)


def _rates(flagged: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    n_att = int(truth.sum())
    n_gen = int((~truth).sum())
    if n_att == 0 or n_gen == 0:
        raise ValueError("both classes must be present")
    return (
        float(flagged[truth].sum()) / n_att,
        float(flagged[~truth].sum()) / n_gen,
    )


def knn_baseline(
    train_x: np.ndarray, train_y: np.ndarray, test_x: np.ndarray, k: int
) -> np.ndarray:
    """Majority vote of the Euclidean k nearest training rows (1 = attack);
    even-k ties break toward 1."""
    train_x = np.asarray(train_x, dtype=np.float64)
    test_x = np.asarray(test_x, dtype=np.float64)
    train_y = np.asarray(train_y).astype(int)
    if k < 1 or k > train_x.shape[0]:
        raise ValueError(f"k={k} out of range for {train_x.shape[0]} training rows")
    d2 = (
        (test_x**2).sum(axis=1, keepdims=True)
        - 2.0 * test_x @ train_x.T
        + (train_x**2).sum(axis=1)
    )
    nearest = np.argpartition(d2, k - 1, axis=1)[:, :k]
    votes = train_y[nearest].sum(axis=1)
    return (2 * votes >= k).astype(np.int64)


# -- grid ----------------------------------------------------------------------


@dataclass(frozen=True)
class CellMetrics:
    model: str
    intent: str
    attack_size: float
    filler_size: float
    repetitions: int
    detection_mean: float
    detection_sd: float
    fa_mean: float
    fa_sd: float
    method: str


@dataclass(frozen=True)
class MetricsGrid:
    rows: tuple[CellMetrics, ...]
    master_seed: int
    pp_mean: float
    pp_sd: float

    def cell(
        self, model: str, attack_size: float, filler_size: float, method: str = METHOD_REGRESSION
    ) -> CellMetrics:
        for row in self.rows:
            if (
                row.model == model
                and math.isclose(row.attack_size, attack_size)
                and math.isclose(row.filler_size, filler_size)
                and row.method == method
            ):
                return row
        raise KeyError(f"no cell ({model}, {attack_size}, {filler_size}, {method})")

    def write_csv(self, path: str | os.PathLike) -> None:
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(f"# master_seed={self.master_seed}\n")
            fh.write(
                "model,intent,attack_size,filler_size,repetitions,"
                "detection_mean,detection_sd,fa_mean,fa_sd,method\n"
            )
            for r in self.rows:
                fh.write(
                    f"{r.model},{r.intent},{r.attack_size:.10g},{r.filler_size:.10g},"
                    f"{r.repetitions},{r.detection_mean:.10g},{r.detection_sd:.10g},"
                    f"{r.fa_mean:.10g},{r.fa_sd:.10g},{r.method}\n"
                )
        os.replace(tmp, path)


@dataclass(frozen=True)
class RepetitionState:
    """Shared per-repetition artifacts reused across all grid cells."""

    rep: int
    seed: int
    train_half: RatingDataset
    test_half: RatingDataset
    partition: ItemStats
    tset: TrainingSet
    model: TrainedModel
    report: dict
    test_gen_stats: ItemStats
    knn_train_x: np.ndarray
    knn_train_y: np.ndarray


def prepare_repetition(cfg: ExperimentConfig, ds: RatingDataset, rep: int) -> RepetitionState:
    seed = cfg.master_seed + rep
    train_half, test_half = split_half(ds, seed)
    partition = system_partition(cfg, ds)
    tset = build_training_set(train_half, cfg, seed, partition)
    model, report = train_detector(tset, cfg, seed=seed, partition=partition)
    test_gen_stats = _part_stats(test_half, cfg, partition)
    return RepetitionState(
        rep=rep,
        seed=seed,
        train_half=train_half,
        test_half=test_half,
        partition=partition,
        tset=tset,
        model=model,
        report=report,
        test_gen_stats=test_gen_stats,
        knn_train_x=np.hstack([tset.r_norm, tset.i_norm]),
        knn_train_y=tset.attacker_mask.astype(np.int64),
    )


@dataclass(frozen=True)
class CellResult:
    detection: float
    false_alarm: float
    knn_detection: float | None
    knn_false_alarm: float | None
    scored: ScoredSet


def evaluate_cell(
    state: RepetitionState,
    cfg: ExperimentConfig,
    model_name: str,
    attack_size: float,
    filler_size: float,
    with_knn: bool | None = None,
) -> CellResult:
    """Inject one cell's attack into the test half and measure both methods."""
    mi = ATTACK_MODELS.index(model_name)
    cell_seed = _subseed(
        state.seed, 2, mi, int(round(attack_size * 10000)), int(round(filler_size * 10000))
    )
    spec = _attack_spec(cfg, model_name, attack_size, filler_size, cell_seed)
    profiles = generate_profiles(spec, state.test_gen_stats, state.test_half)
    injected = inject(state.test_half, profiles)
    scored = score_dataset(state.model, injected, state.partition)
    flagged = scored.scores >= state.model.threshold
    dr, fa = _rates(flagged, scored.truth)
    knn_dr = knn_fa = None
    if cfg.knn if with_knn is None else with_knn:
        pred = knn_baseline(
            state.knn_train_x,
            state.knn_train_y,
            np.hstack([scored.r_norm, scored.i_norm]),
            cfg.knn_k,
        )
        knn_dr, knn_fa = _rates(pred.astype(bool), scored.truth)
    return CellResult(dr, fa, knn_dr, knn_fa, scored)


def run_experiment(cfg: ExperimentConfig, ds: RatingDataset | None = None) -> MetricsGrid:
    """Run the full (model x attack size x filler size) grid over all
    repetitions and average the rates per cell."""
    errs = cfg.validate()
    if errs:
        raise ValueError("invalid config: " + "; ".join(errs))
    if ds is None:
        ds = load_dataset(cfg)
    acc: dict[tuple, list[tuple[float, float]]] = {}
    pps = []
    for rep in range(cfg.repetitions):
        state = prepare_repetition(cfg, ds, rep)
        pps.append(state.report["pp_train"])
        for model_name in cfg.attack_models:
            for a in cfg.attack_sizes:
                for f in cfg.filler_sizes:
                    res = evaluate_cell(state, cfg, model_name, a, f)
                    acc.setdefault((model_name, a, f, METHOD_REGRESSION), []).append(
                        (res.detection, res.false_alarm)
                    )
                    if cfg.knn:
                        acc.setdefault((model_name, a, f, METHOD_KNN), []).append(
                            (res.knn_detection, res.knn_false_alarm)
                        )
    rows = []
    for model_name in cfg.attack_models:
        for a in cfg.attack_sizes:
            for f in cfg.filler_sizes:
                for method in (METHOD_REGRESSION, METHOD_KNN) if cfg.knn else (METHOD_REGRESSION,):
                    vals = np.array(acc[(model_name, a, f, method)])
                    rows.append(
                        CellMetrics(
                            model=model_name,
                            intent=cfg.intent,
                            attack_size=a,
                            filler_size=f,
                            repetitions=cfg.repetitions,
                            detection_mean=float(vals[:, 0].mean()),
                            detection_sd=float(vals[:, 0].std()),
                            fa_mean=float(vals[:, 1].mean()),
                            fa_sd=float(vals[:, 1].std()),
                            method=method,
                        )
                    )
    pps_arr = np.array(pps)
    return MetricsGrid(
        rows=tuple(rows),
        master_seed=cfg.master_seed,
        pp_mean=float(pps_arr.mean()),
        pp_sd=float(pps_arr.std()),
    )


def cell_roc(
    cfg: ExperimentConfig,
    ds: RatingDataset,
    model_name: str,
    attack_size: float,
    filler_size: float,
) -> np.ndarray:
    """ROC points for one grid cell, pooling scores over all repetitions.

    Uses exactly the per-repetition training and per-cell injection seeds of
    :func:`run_experiment`, so the curve matches the reported rates.
    """
    all_scores, all_truth = [], []
    for rep in range(cfg.repetitions):
        state = prepare_repetition(cfg, ds, rep)
        res = evaluate_cell(state, cfg, model_name, attack_size, filler_size, with_knn=False)
        all_scores.append(res.scored.scores)
        all_truth.append(res.scored.truth)
    return roc_sweep(np.concatenate(all_scores), np.concatenate(all_truth))


def write_roc_csv(points: np.ndarray, path: str | os.PathLike, master_seed: int) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"# master_seed={master_seed}\n")
        fh.write("threshold,false_alarm,detection\n")
        for t, fa, dr in points:
            fh.write(f"{t:.10g},{fa:.10g},{dr:.10g}\n")
    os.replace(tmp, path)
