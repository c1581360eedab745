"""Least-squares identification of the rating-behaviour -> item-distribution map.

The model is an 8 x d matrix M minimising sum_u ||I_u - M psi_u||^2 +
lambda ||M||_F^2 over normalised feature vectors, where psi is either the
affine regressor [R, 1] (d = 13) or the quadratic regressor
[{R_j R_k}_{j<=k}, R, 1] (d = 91). The normal equations are assembled from
mergeable running sums so training streams over users, and the residual
covariance is recovered from the same sums.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import Scale
from .features import (
    N_ITEM_ATTRIBUTES,
    N_RATING_ATTRIBUTES,
    Normalizer,
)

LINEAR = "linear"
QUADRATIC = "quadratic"
REGRESSOR_KINDS = (LINEAR, QUADRATIC)

# quadratic monomials R_j * R_k in fixed lexicographic order (j <= k),
# followed by the linear terms and the constant; recorded in the model file
QUAD_PAIRS = tuple(
    (j, k) for j in range(N_RATING_ATTRIBUTES) for k in range(j, N_RATING_ATTRIBUTES)
)
TERM_ORDER = "pairwise_products_lex,linear,constant"
MODEL_FORMAT_VERSION = 1


def regressor_dim(kind: str, input_dim: int = N_RATING_ATTRIBUTES) -> int:
    if kind == LINEAR:
        return input_dim + 1
    if kind == QUADRATIC:
        return input_dim * (input_dim + 1) // 2 + input_dim + 1
    raise ValueError(f"unknown regressor kind {kind!r}")


def regress(kind: str, r_norm: np.ndarray) -> np.ndarray:
    """Map one normalised 12-vector through the chosen regressor."""
    return apply_regressor(kind, np.asarray(r_norm, dtype=np.float64)[None, :])[0]


def apply_regressor(kind: str, r_mat: np.ndarray) -> np.ndarray:
    """Row-wise regressor application: (N, 12) -> (N, d)."""
    r_mat = np.asarray(r_mat, dtype=np.float64)
    if r_mat.ndim != 2 or r_mat.shape[1] != N_RATING_ATTRIBUTES:
        raise ValueError(f"expected (N, {N_RATING_ATTRIBUTES}) input, got {r_mat.shape}")
    if not np.isfinite(r_mat).all():
        raise ValueError("regressor input contains non-finite values")
    n = r_mat.shape[0]
    if kind == LINEAR:
        return np.hstack([r_mat, np.ones((n, 1))])
    if kind == QUADRATIC:
        j_idx = np.array([j for j, _ in QUAD_PAIRS])
        k_idx = np.array([k for _, k in QUAD_PAIRS])
        prods = r_mat[:, j_idx] * r_mat[:, k_idx]
        return np.hstack([prods, r_mat, np.ones((n, 1))])
    raise ValueError(f"unknown regressor kind {kind!r}")


@dataclass(frozen=True)
class RunningSums:
    """Mergeable sufficient statistics: sum psi psi^T, sum psi I^T, sum I I^T."""

    s_pp: np.ndarray  # (d, d)
    s_pi: np.ndarray  # (d, 8)
    s_ii: np.ndarray  # (8, 8)
    n: int

    @classmethod
    def zeros(cls, d: int, out_dim: int = N_ITEM_ATTRIBUTES) -> "RunningSums":
        return cls(np.zeros((d, d)), np.zeros((d, out_dim)), np.zeros((out_dim, out_dim)), 0)

    @classmethod
    def from_batch(cls, psi: np.ndarray, iu: np.ndarray) -> "RunningSums":
        psi = np.asarray(psi, dtype=np.float64)
        iu = np.asarray(iu, dtype=np.float64)
        if psi.shape[0] != iu.shape[0]:
            raise ValueError("row counts differ")
        return cls(psi.T @ psi, psi.T @ iu, iu.T @ iu, psi.shape[0])


def accumulate(sums: RunningSums, psi_u: np.ndarray, i_u: np.ndarray) -> RunningSums:
    """Add one user's outer products; returns a new RunningSums."""
    psi_u = np.asarray(psi_u, dtype=np.float64)
    i_u = np.asarray(i_u, dtype=np.float64)
    if psi_u.shape != (sums.s_pp.shape[0],) or i_u.shape != (sums.s_ii.shape[0],):
        raise ValueError("dimension mismatch")
    return RunningSums(
        sums.s_pp + np.outer(psi_u, psi_u),
        sums.s_pi + np.outer(psi_u, i_u),
        sums.s_ii + np.outer(i_u, i_u),
        sums.n + 1,
    )


def merge(a: RunningSums, b: RunningSums) -> RunningSums:
    return RunningSums(a.s_pp + b.s_pp, a.s_pi + b.s_pi, a.s_ii + b.s_ii, a.n + b.n)


def solve_model(sums: RunningSums, lam: float) -> np.ndarray:
    """Solve (lambda I + sum psi psi^T) M^T = sum psi I^T for the 8 x d model.

    Uses a Cholesky factorisation of the symmetric system; a singular system
    at lambda = 0 raises with advice to regularise.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    d = sums.s_pp.shape[0]
    a = sums.s_pp + lam * np.eye(d)
    try:
        cho = scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "normal equations are singular; use lambda > 0 to regularise"
        ) from exc
    return scipy.linalg.cho_solve(cho, sums.s_pi).T


def covariance(sums: RunningSums, m: np.ndarray) -> np.ndarray:
    """Empirical residual covariance assembled from the running sums.

    Equals 1/(N-1) sum (I_u - M psi_u)(I_u - M psi_u)^T exactly in exact
    arithmetic; the result is symmetrised to cancel floating-point drift.
    """
    if sums.n < 2:
        raise ValueError("need at least 2 accumulated users for a covariance")
    cross = sums.s_pi.T @ m.T  # sum I (M psi)^T
    c = (sums.s_ii - cross - cross.T + m @ sums.s_pp @ m.T) / (sums.n - 1)
    return (c + c.T) / 2.0


def predictive_power(m: np.ndarray, psi: np.ndarray, i_out: np.ndarray) -> float:
    """pp = 1 - sum ||I_u - M psi_u||^2 / sum ||I_u||^2 over normalised outputs."""
    psi = np.asarray(psi, dtype=np.float64)
    i_out = np.asarray(i_out, dtype=np.float64)
    if psi.shape[0] == 0:
        raise ValueError("need at least one user")
    total = float((i_out**2).sum())
    if total == 0:
        raise ValueError("all outputs are zero; predictive power is undefined")
    res = i_out - psi @ m.T
    return 1.0 - float((res**2).sum()) / total


DEFAULT_LAMBDA = 1e-3
DEFAULT_LAMBDA_GRID = tuple(float(x) for x in np.logspace(-6, 0, 13))


def sweep_lambda(
    psi: np.ndarray,
    i_out: np.ndarray,
    grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID,
    holdout_fraction: float = 0.25,
    seed: int = 0,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick lambda maximising holdout predictive power over the grid.

    Returns (best lambda, [(lambda, holdout pp), ...]); ties go to the
    smaller lambda.
    """
    n = psi.shape[0]
    n_hold = max(1, int(round(holdout_fraction * n)))
    if n - n_hold < 1:
        raise ValueError("not enough rows to hold out")
    perm = np.random.default_rng(seed).permutation(n)
    hold, fit = perm[:n_hold], perm[n_hold:]
    sums = RunningSums.from_batch(psi[fit], i_out[fit])
    table = []
    for lam in grid:
        m = solve_model(sums, lam)
        table.append((float(lam), predictive_power(m, psi[hold], i_out[hold])))
    best = max(table, key=lambda t: (t[1], -t[0]))
    return best[0], table


@dataclass(frozen=True)
class TrainedModel:
    """Everything needed to score unseen users: model, covariance, normalisers
    and the feature configuration that produced the training vectors."""

    kind: str
    lam: float
    m: np.ndarray  # (8, d)
    c: np.ndarray  # (8, 8)
    n_train: int
    rating_norm: Normalizer
    item_norm: Normalizer
    intent: str
    scale: Scale
    r_mid: int
    pop_threshold: int
    unpop_threshold: int
    threshold: float | None = None
    fa_target: float | None = None

    @property
    def d(self) -> int:
        return self.m.shape[1]


def model_to_dict(model: TrainedModel) -> dict:
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "term_order": TERM_ORDER,
        "regressor": model.kind,
        "d": model.d,
        "lambda": model.lam,
        "M": model.m.tolist(),
        "C": model.c.tolist(),
        "n_train": model.n_train,
        "rating_min": model.rating_norm.lo.tolist(),
        "rating_max": model.rating_norm.hi.tolist(),
        "item_min": model.item_norm.lo.tolist(),
        "item_max": model.item_norm.hi.tolist(),
        "intent": model.intent,
        "scale": [model.scale.r_min, model.scale.r_max],
        "r_mid": model.r_mid,
        "pop_threshold": model.pop_threshold,
        "unpop_threshold": model.unpop_threshold,
        "threshold": model.threshold,
        "fa_target": model.fa_target,
    }


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')!r}")
    return TrainedModel(
        kind=d["regressor"],
        lam=float(d["lambda"]),
        m=np.asarray(d["M"], dtype=np.float64),
        c=np.asarray(d["C"], dtype=np.float64),
        n_train=int(d["n_train"]),
        rating_norm=Normalizer(
            np.asarray(d["rating_min"], dtype=np.float64),
            np.asarray(d["rating_max"], dtype=np.float64),
        ),
        item_norm=Normalizer(
            np.asarray(d["item_min"], dtype=np.float64),
            np.asarray(d["item_max"], dtype=np.float64),
        ),
        intent=d["intent"],
        scale=Scale(*d["scale"]),
        r_mid=int(d["r_mid"]),
        pop_threshold=int(d["pop_threshold"]),
        unpop_threshold=int(d["unpop_threshold"]),
        threshold=None if d["threshold"] is None else float(d["threshold"]),
        fa_target=None if d["fa_target"] is None else float(d["fa_target"]),
    )


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str | os.PathLike) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
