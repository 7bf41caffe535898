"""ROC-AUC, RMSE and MAE, single-task and averaged over tasks."""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


def midranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """Probability a positive outscores a negative, ties counting one half."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise MetricError(f"scores {s.shape} and labels {y.shape} differ")
    if np.isnan(s).any():
        raise MetricError("NaN score")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int((y == 0).sum())
    if n_pos + n_neg != y.size:
        raise MetricError("labels must be 0 or 1")
    if n_pos == 0 or n_neg == 0:
        raise MetricError("ROC-AUC needs both classes")
    r = midranks(s)[pos].sum()
    # r - n_pos(n_pos+1)/2 is the (half-integer) count of won pairs
    return (r - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def rmse(pred, target) -> float:
    p, t = np.asarray(pred, dtype=np.float64).ravel(), np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise MetricError("rmse needs equal, non-empty inputs")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(pred, target) -> float:
    p, t = np.asarray(pred, dtype=np.float64).ravel(), np.asarray(target, dtype=np.float64).ravel()
    if p.shape != t.shape or p.size == 0:
        raise MetricError("mae needs equal, non-empty inputs")
    return float(np.mean(np.abs(p - t)))


METRICS = {"roc_auc": roc_auc, "rmse": rmse, "mae": mae}


def multitask(metric: str, pred: np.ndarray, target: np.ndarray, names=None) -> dict:
    """Per-task metric over labeled entries plus their unweighted mean.

    Target NaN means unlabeled. Tasks that cannot be scored (no labels, or a
    single class for ROC-AUC) are skipped with a warning and reported as None;
    if no task is left, MetricError.
    """
    fn = METRICS[metric]
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    names = names or [f"task{k}" for k in range(target.shape[1])]
    per: dict[str, Optional[float]] = {}
    for k, name in enumerate(names):
        lab = ~np.isnan(target[:, k])
        try:
            per[name] = float(fn(pred[lab, k], target[lab, k]))
        except MetricError as exc:
            log.warning("task %s skipped for %s: %s", name, metric, exc)
            per[name] = None
    valid = [v for v in per.values() if v is not None]
    if not valid:
        raise MetricError(f"no task could be scored with {metric}")
    return {"metric": metric, "per_task": per, "mean": float(np.mean(valid))}
