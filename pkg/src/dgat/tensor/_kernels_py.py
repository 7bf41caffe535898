"""Pure NumPy reference kernels (fallback when the compiled module is absent).

Ragged attention: query row ``i`` attends over key rows ``idx[i, :counts[i]]``.
Heads split the feature axis into ``n_heads`` contiguous slices of width
``D // n_heads``. ``drop`` (optional, shape ``(n, H, K)``) multiplies the
post-softmax weights; the returned ``alpha`` is the weight before dropout and
is exactly zero in padded slots.
"""

import numpy as np


def attention_forward(q, k, v, idx, counts, n_heads, scale, drop=None):
    n, width = q.shape
    kmax = idx.shape[1]
    dh = width // n_heads
    valid = np.arange(kmax)[None, :] < counts[:, None]
    qh = q.reshape(n, n_heads, dh)
    kg = k[idx].reshape(n, kmax, n_heads, dh)
    vg = v[idx].reshape(n, kmax, n_heads, dh)
    logits = np.einsum("nhd,nkhd->nhk", qh, kg) * scale
    logits = np.where(valid[:, None, :], logits, -np.inf)
    logits = logits - logits.max(axis=2, keepdims=True)
    alpha = np.exp(logits)
    alpha /= alpha.sum(axis=2, keepdims=True)
    weights = alpha if drop is None else alpha * drop
    out = np.einsum("nhk,nkhd->nhd", weights, vg).reshape(n, width)
    return out, alpha


def attention_backward(grad, q, k, v, idx, counts, n_heads, scale, alpha, drop=None):
    n, width = q.shape
    m = k.shape[0]
    kmax = idx.shape[1]
    dh = width // n_heads
    g = grad.reshape(n, n_heads, dh)
    qh = q.reshape(n, n_heads, dh)
    kg = k[idx].reshape(n, kmax, n_heads, dh)
    vg = v[idx].reshape(n, kmax, n_heads, dh)
    weights = alpha if drop is None else alpha * drop
    dalpha = np.einsum("nhd,nkhd->nhk", g, vg)
    if drop is not None:
        dalpha = dalpha * drop
    dlogits = alpha * (dalpha - (alpha * dalpha).sum(axis=2, keepdims=True)) * scale
    dq = np.einsum("nhk,nkhd->nhd", dlogits, kg).reshape(n, width)
    flat = idx.reshape(-1)
    dk = scatter_add_rows(np.einsum("nhk,nhd->nkhd", dlogits, qh).reshape(-1, width), flat, m)
    dv = scatter_add_rows(np.einsum("nhk,nhd->nkhd", weights, g).reshape(-1, width), flat, m)
    return dq, dk, dv


def scatter_add_rows(src, idx, n_rows):
    out = np.zeros((n_rows, src.shape[1]), dtype=np.float64)
    np.add.at(out, idx, src)
    return out
