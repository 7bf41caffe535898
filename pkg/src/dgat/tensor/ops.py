"""Differentiable ops. Each returns a new :class:`Tensor`; inputs are never mutated."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import kernels
from .core import ShapeError, Tensor, as_tensor, make_op

LAYER_NORM_EPS = 1e-5


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    for axis in (0, 1):
        if shape[axis] == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return make_op("add", a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return make_op("sub", a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return make_op("mul", a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_op("scale", a.data * c, (a,), lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return make_op("matmul", a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    return make_op("concat_cols", np.concatenate([p.data for p in parts], axis=1), parts,
                   lambda g: [g[:, lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])])


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {[p.shape for p in parts]}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    return make_op("concat_rows", np.concatenate([p.data for p in parts], axis=0), parts,
                   lambda g: [g[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:])])


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0
    return make_op("relu", np.where(keep, x.data, 0.0), (x,), lambda g: (g * keep,))


def sigmoid(x: Tensor) -> Tensor:
    y = _sigmoid(x.data)
    return make_op("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def masked_row_softmax(logits: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Row softmax; entries where ``mask`` is True are excluded and come out exactly 0."""
    x = logits.data
    if mask is None:
        mask = np.zeros(x.shape, dtype=bool)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ShapeError(f"mask shape {mask.shape} != logits shape {x.shape}")
    if mask.all(axis=1).any():
        raise ValueError("masked_row_softmax: a row has every entry masked")
    z = np.where(mask, -np.inf, x)
    z = z - z.max(axis=1, keepdims=True)
    y = np.exp(z)
    y /= y.sum(axis=1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=1, keepdims=True)),)

    return make_op("masked_row_softmax", y, (logits,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Per-row normalisation to zero mean / unit variance, then ``* gain + bias``."""
    width = x.shape[1]
    if width < 2:
        raise ShapeError("layer_norm needs rows of length >= 2")
    mu = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mu
    inv = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + eps)
    xhat = centered * inv

    def backward(g):
        dxhat = g * gain.data
        dx = inv / width * (width * dxhat - dxhat.sum(axis=1, keepdims=True)
                            - xhat * (dxhat * xhat).sum(axis=1, keepdims=True))
        return dx, (g * xhat).sum(axis=0, keepdims=True), g.sum(axis=0, keepdims=True)

    return make_op("layer_norm", xhat * gain.data + bias.data, (x, gain, bias), backward)


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return make_op("dropout", x.data * keep, (x,), lambda g: (g * keep,))


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    n = x.shape[0]
    return make_op("gather_rows", x.data[idx], (x,),
                   lambda g: (kernels.scatter_add_rows(np.ascontiguousarray(g), idx, n),))


def scatter_add_rows(x: Tensor, idx: np.ndarray, n_rows: int) -> Tensor:
    """``out[idx[r]] += x[r]``; rows of ``out`` never hit stay zero."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.shape != (x.shape[0],):
        raise ShapeError("scatter_add_rows: one index per input row")
    return make_op("scatter_add_rows", kernels.scatter_add_rows(x.data, idx, n_rows), (x,),
                   lambda g: (g[idx],))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return make_op("sum", np.array([[x.data.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),))


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.data.size)


def neighbor_attention(q: Tensor, k: Tensor, v: Tensor, idx: np.ndarray, counts: np.ndarray,
                       n_heads: int, dropout_rate: float = 0.0, training: bool = False,
                       rng: Optional[np.random.Generator] = None) -> tuple[Tensor, np.ndarray]:
    """Multi-head scaled dot-product attention over ragged key sets.

    Query row ``i`` attends to key/value rows ``idx[i, :counts[i]]``; logits are
    scaled by ``1/sqrt(D / n_heads)``. Returns the output and the attention
    weights ``(n, n_heads, K)`` (before dropout, zero in padded slots).
    """
    width = q.shape[1]
    if k.shape != v.shape or k.shape[1] != width:
        raise ShapeError(f"attention: q {q.shape}, k {k.shape}, v {v.shape}")
    if width % n_heads:
        raise ShapeError(f"width {width} not divisible by {n_heads} heads")
    if idx.shape[0] != q.shape[0] or counts.shape != (q.shape[0],):
        raise ShapeError("attention: key index rows must match queries")
    if (counts < 1).any():
        raise ValueError("attention: every query needs at least one key")
    scale_ = 1.0 / np.sqrt(width // n_heads)
    drop = None
    if training and dropout_rate > 0.0:
        drop = (rng.random((q.shape[0], n_heads, idx.shape[1])) >= dropout_rate) / (1.0 - dropout_rate)
    out, alpha = kernels.attention_forward(q.data, k.data, v.data, idx, counts, n_heads, scale_, drop)

    def backward(g):
        return kernels.attention_backward(np.ascontiguousarray(g), q.data, k.data, v.data, idx,
                                          counts, n_heads, scale_, alpha, drop)

    return make_op("neighbor_attention", out, (q, k, v), backward), alpha
