"""AUC and ROC points with ties counted half."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _check(scores_pos, scores_neg) -> tuple[np.ndarray, np.ndarray]:
    pos = np.asarray(scores_pos, dtype=np.float64).ravel()
    neg = np.asarray(scores_neg, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative score")
    if np.isnan(pos).any() or np.isnan(neg).any():
        raise ValueError("scores contain NaN")
    return pos, neg


def compute_auc(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> float:
    """Mann-Whitney AUC from midranks.

    Ranks are kept doubled so the statistic is an exact integer ratio; the
    result equals ``(#{p > n} + 0.5 * #{p == n}) / (P * N)`` rounded once.
    """
    pos, neg = _check(scores_pos, scores_neg)
    n_pos, n_neg = pos.size, neg.size
    scores = np.concatenate([pos, neg])
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    # tie groups [starts[g], ends[g]) in sorted order
    boundaries = np.flatnonzero(np.diff(sorted_scores)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [scores.size]])
    doubled_rank = np.empty(scores.size, dtype=np.int64)
    # midrank of a group occupying 1-based ranks starts+1 .. ends, times two
    doubled_rank[order] = np.repeat(starts + 1 + ends, ends - starts)
    rank_sum2 = int(doubled_rank[:n_pos].sum())
    u2 = rank_sum2 - n_pos * (n_pos + 1)
    return u2 / (2 * n_pos * n_neg)


def roc_points(scores_pos: Sequence[float], scores_neg: Sequence[float]) -> list[tuple[float, float]]:
    """ROC polyline from (0, 0) to (1, 1), one vertex per distinct threshold."""
    pos, neg = _check(scores_pos, scores_neg)
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size, dtype=np.int64), np.zeros(neg.size, dtype=np.int64)])
    order = np.argsort(-scores, kind="mergesort")
    s, lab = scores[order], labels[order]
    last_of_group = np.flatnonzero(np.diff(s)).tolist() + [s.size - 1]
    tp = np.cumsum(lab)[last_of_group]
    fp = np.cumsum(1 - lab)[last_of_group]
    pts = [(0.0, 0.0)]
    pts.extend((int(f) / neg.size, int(t) / pos.size) for f, t in zip(fp, tp))
    return pts


def trapezoid_area(points: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area
