"""Inlier clustering accuracy, outlier detection accuracy and overall accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import OUTLIER, ClusterResult, InputError


@dataclass
class EvalReport:
    inlier_accuracy: float
    outlier_accuracy: float
    overall_accuracy: float
    confusion: np.ndarray  # true cluster x predicted cluster, columns in matched order
    permutation: dict  # predicted label -> true label
    n_inliers: int
    n_outliers: int
    correct_inliers: int
    detected_outliers: int

    def as_dict(self) -> dict:
        return {
            "inlier_accuracy": self.inlier_accuracy,
            "outlier_accuracy": self.outlier_accuracy,
            "overall_accuracy": self.overall_accuracy,
            "n_inliers": self.n_inliers,
            "n_outliers": self.n_outliers,
            "correct_inliers": self.correct_inliers,
            "detected_outliers": self.detected_outliers,
            "permutation": {str(k): int(v) for k, v in self.permutation.items()},
        }


def agreement_matrix(pred: np.ndarray, truth: np.ndarray):
    """Counts of (true cluster, predicted cluster) over true inliers."""
    inl = truth != OUTLIER
    t_ids = np.unique(truth[inl])
    p_ids = np.unique(pred[(pred != OUTLIER) & (pred > 0)])
    A = np.zeros((len(t_ids), len(p_ids)), dtype=np.int64)
    t_pos = {v: i for i, v in enumerate(t_ids)}
    p_pos = {v: j for j, v in enumerate(p_ids)}
    for t, p in zip(truth[inl], pred[inl]):
        if p in p_pos:
            A[t_pos[t], p_pos[p]] += 1
    return A, t_ids, p_ids


def evaluate(pred, truth) -> EvalReport:
    """Score predicted labels against the truth under the best label matching.

    ``pred`` is a ClusterResult or a label array (cluster ids > 0, OUTLIER,
    or UNLABELED). A true inlier counts as correct only if its predicted
    cluster is matched to its true cluster; flagged or unlabeled inliers are
    errors. A true outlier counts as detected only if flagged OUTLIER.
    """
    p = np.asarray(pred.labels if isinstance(pred, ClusterResult) else pred)
    t = np.asarray(truth)
    if p.shape != t.shape:
        raise InputError(f"prediction has {p.size} labels, truth has {t.size}")
    inl = t != OUTLIER
    if not inl.any():
        raise InputError("truth contains no inliers")
    A, t_ids, p_ids = agreement_matrix(p, t)
    perm = {}
    correct = 0
    if A.size:
        rows, cols = linear_sum_assignment(-A)
        correct = int(A[rows, cols].sum())
        perm = {int(p_ids[c]): int(t_ids[r]) for r, c in zip(rows, cols)}
        order = [cols[list(rows).index(i)] if i in rows else None for i in range(len(t_ids))]
        conf = np.zeros((len(t_ids), len(t_ids)), dtype=np.int64)
        for i, c in enumerate(order):
            if c is not None:
                for j, c2 in enumerate(order):
                    if c2 is not None:
                        conf[i, j] = A[i, c2]
    else:
        conf = np.zeros((len(t_ids), len(t_ids)), dtype=np.int64)
    n_in = int(inl.sum())
    n_out = int((~inl).sum())
    detected = int(((p == OUTLIER) & ~inl).sum())
    return EvalReport(
        inlier_accuracy=correct / n_in,
        outlier_accuracy=detected / n_out if n_out else 1.0,
        overall_accuracy=(correct + detected) / t.size,
        confusion=conf,
        permutation=perm,
        n_inliers=n_in,
        n_outliers=n_out,
        correct_inliers=correct,
        detected_outliers=detected,
    )
