"""Anomaly scoring: Mahalanobis norm of the model residual against a threshold.

A user's residual is the part of their item-distribution vector the trained
map cannot explain; its squared Mahalanobis norm under the (regularised)
empirical residual covariance is the detection score. Users score >= T are
flagged as attackers, and sweeping T yields the ROC curve.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

COV_EPS_SCALE = 1e-8


def residual(m: np.ndarray, psi_u: np.ndarray, i_u: np.ndarray) -> np.ndarray:
    """Res_u = I_u - M psi_u in normalised output space."""
    return np.asarray(i_u, dtype=np.float64) - m @ np.asarray(psi_u, dtype=np.float64)


def residual_matrix(m: np.ndarray, psi: np.ndarray, i_out: np.ndarray) -> np.ndarray:
    return np.asarray(i_out, dtype=np.float64) - np.asarray(psi, dtype=np.float64) @ m.T


def cov_epsilon(c: np.ndarray, eps_scale: float = COV_EPS_SCALE) -> float:
    """Ridge added to C before factorisation: eps_scale * mean diagonal mass.

    Keeps the quadratic form defined when residual dimensions are collinear;
    falls back to an absolute floor when C is (numerically) zero.
    """
    t = float(np.trace(c))
    if t <= 0:
        return 1e-12
    return eps_scale * t / c.shape[0]


def _factor(c: np.ndarray, eps: float | None):
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"covariance must be square, got {c.shape}")
    if not np.allclose(c, c.T, rtol=0, atol=1e-8 * (1 + abs(float(np.abs(c).max()) if c.size else 0))):
        raise ValueError("covariance must be symmetric")
    if eps is None:
        eps = cov_epsilon(c)
    return scipy.linalg.cho_factor(c + eps * np.eye(c.shape[0]), lower=True)


def score(res: np.ndarray, c: np.ndarray, eps: float | None = None) -> float:
    """res^T (C + eps I)^{-1} res, the squared Mahalanobis norm of one residual."""
    res = np.asarray(res, dtype=np.float64)
    cho = _factor(c, eps)
    return float(res @ scipy.linalg.cho_solve(cho, res))


def mahalanobis_scores(res: np.ndarray, c: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Scores for a stack of residual rows using one factorisation of C."""
    res = np.atleast_2d(np.asarray(res, dtype=np.float64))
    cho = _factor(c, eps)
    solved = scipy.linalg.cho_solve(cho, res.T)
    return np.einsum("ij,ji->i", res, solved)


def classify(scores: np.ndarray, threshold: float) -> np.ndarray:
    """1 where score >= threshold (ties flagged), else 0."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return (np.asarray(scores) >= threshold).astype(np.int64)


def roc_sweep(scores: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """ROC points (threshold, false_alarm, detection), sorted by false alarm.

    One point per distinct score plus the (0, 0) and (1, 1) endpoints;
    consecutive duplicate (false_alarm, detection) pairs are collapsed,
    keeping the largest threshold that achieves each operating point.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    if scores.shape != truth.shape:
        raise ValueError("scores and truth must align")
    n_att = int(truth.sum())
    n_gen = int((~truth).sum())
    if n_att == 0 or n_gen == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    att_cum = np.cumsum(truth[order])
    gen_cum = np.cumsum(~truth[order])
    # last row of each distinct score value
    last = np.nonzero(np.diff(s_sorted))[0]
    last = np.concatenate([last, [len(s_sorted) - 1]])

    pts = [(math.inf, 0.0, 0.0)]
    for k in last:
        pts.append((float(s_sorted[k]), gen_cum[k] / n_gen, att_cum[k] / n_att))
    pts.append((0.0, 1.0, 1.0))
    dedup = [pts[0]]
    for p in pts[1:]:
        if (p[1], p[2]) != (dedup[-1][1], dedup[-1][2]):
            dedup.append(p)
    arr = np.array(dedup)
    return arr[np.lexsort((arr[:, 2], arr[:, 1]))]


def choose_threshold(genuine_scores: np.ndarray, target_false_alarm: float) -> float:
    """Empirical (1 - target) quantile of the genuine training scores.

    target 0 flags nothing (threshold just above the max score); target 1
    flags everything (threshold 0, since scores are nonnegative).
    """
    s = np.sort(np.asarray(genuine_scores, dtype=np.float64))
    if len(s) < 10:
        raise ValueError("need at least 10 genuine scores to set a threshold")
    if not 0 <= target_false_alarm <= 1:
        raise ValueError("target false alarm must be in [0, 1]")
    n = len(s)
    k = int(math.floor(target_false_alarm * n + 1e-9))
    if k >= n:
        return 0.0
    if k == 0:
        return float(np.nextafter(s[-1], np.inf))
    return float(s[n - k])
