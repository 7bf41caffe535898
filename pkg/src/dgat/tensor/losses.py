"""Scalar losses. Each averages over contributing entries only.

``normalizer`` overrides that count, which lets a batch split across
threads reproduce the loss scale of the whole batch.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import ShapeError, Tensor, make_op
from .ops import _sigmoid


def _denominator(count: int, normalizer: Optional[float]) -> float:
    if count == 0:
        raise ValueError("loss has zero contributing entries")
    return float(normalizer) if normalizer is not None else float(count)


def mse(pred: Tensor, target: np.ndarray, mask: Optional[np.ndarray] = None,
        normalizer: Optional[float] = None) -> Tensor:
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    mask = np.ones(pred.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    denom = _denominator(int(mask.sum()), normalizer)
    diff = np.where(mask, pred.data - np.where(mask, target, 0.0), 0.0)
    return make_op("mse", np.array([[(diff * diff).sum() / denom]]), (pred,),
                   lambda g: (g[0, 0] * 2.0 * diff / denom,))


def bce_with_logits(pred: Tensor, label: np.ndarray, label_mask: Optional[np.ndarray] = None,
                    normalizer: Optional[float] = None) -> Tensor:
    """Binary cross-entropy on logits, skipping entries where ``label_mask`` is False."""
    y = np.asarray(label, dtype=np.float64).reshape(pred.shape)
    mask = np.ones(pred.shape, dtype=bool) if label_mask is None else np.asarray(label_mask, dtype=bool)
    denom = _denominator(int(mask.sum()), normalizer)
    y = np.where(mask, y, 0.0)
    x = pred.data
    per = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    value = np.where(mask, per, 0.0).sum() / denom
    return make_op("bce_with_logits", np.array([[value]]), (pred,),
                   lambda g: (g[0, 0] * np.where(mask, _sigmoid(x) - y, 0.0) / denom,))


def block_cross_entropy(logits: Tensor, targets: np.ndarray, layout: Sequence[tuple[int, int]],
                        row_mask: Optional[np.ndarray] = None,
                        normalizer: Optional[float] = None) -> Tensor:
    """Sum over one-hot blocks of categorical cross-entropy, averaged over rows.

    ``targets`` is either a one-hot matrix shaped like ``logits`` or integer
    categories of shape ``(rows, n_blocks)``; ``layout`` lists ``(offset, size)``
    per block. Rows with ``row_mask`` False contribute nothing.
    """
    x = logits.data
    targets = np.asarray(targets)
    n = x.shape[0]
    if targets.shape == x.shape:
        cats = np.stack([targets[:, o:o + s].argmax(axis=1) for o, s in layout], axis=1)
    elif targets.shape == (n, len(layout)):
        cats = targets.astype(np.int64)
    else:
        raise ShapeError(f"targets shape {targets.shape} fits neither logits nor layout")
    rows = np.ones(n, dtype=bool) if row_mask is None else np.asarray(row_mask, dtype=bool)
    denom = _denominator(int(rows.sum()), normalizer)
    total = 0.0
    grad = np.zeros_like(x)
    r = np.arange(n)
    for b, (o, s) in enumerate(layout):
        z = x[:, o:o + s]
        z = z - z.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        total += -logp[r, cats[:, b]][rows].sum()
        p = np.exp(logp)
        p[r, cats[:, b]] -= 1.0
        grad[:, o:o + s] = np.where(rows[:, None], p, 0.0)
    grad /= denom
    return make_op("block_cross_entropy", np.array([[total / denom]]), (logits,),
                   lambda g: (g[0, 0] * grad,))
