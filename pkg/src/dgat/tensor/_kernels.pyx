# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for ragged multi-head attention and row scatter-add.

Semantics match ``_kernels_py`` exactly; see that module for the maths.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

ctypedef cnp.int64_t idx_t


def attention_forward(const double[:, ::1] q, const double[:, ::1] k, const double[:, ::1] v,
                      const idx_t[:, ::1] idx, const idx_t[::1] counts, int n_heads,
                      double scale, drop=None):
    cdef Py_ssize_t n = q.shape[0], width = q.shape[1], kmax = idx.shape[1]
    cdef Py_ssize_t dh = width // n_heads
    out_arr = np.zeros((n, width), dtype=np.float64)
    alpha_arr = np.zeros((n, n_heads, kmax), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[:, :, ::1] alpha = alpha_arr
    cdef const double[:, :, ::1] dmask
    cdef bint has_drop = drop is not None
    if has_drop:
        dmask = drop
    cdef Py_ssize_t i, h, j, d, base, r, c
    cdef double s, mx, tot, a
    with nogil:
        for i in range(n):
            c = counts[i]
            for h in range(n_heads):
                base = h * dh
                mx = -1e308
                for j in range(c):
                    r = idx[i, j]
                    s = 0.0
                    for d in range(dh):
                        s = s + q[i, base + d] * k[r, base + d]
                    s = s * scale
                    alpha[i, h, j] = s
                    if s > mx:
                        mx = s
                tot = 0.0
                for j in range(c):
                    s = exp(alpha[i, h, j] - mx)
                    alpha[i, h, j] = s
                    tot = tot + s
                for j in range(c):
                    alpha[i, h, j] = alpha[i, h, j] / tot
                for j in range(c):
                    r = idx[i, j]
                    a = alpha[i, h, j]
                    if has_drop:
                        a = a * dmask[i, h, j]
                    for d in range(dh):
                        out[i, base + d] = out[i, base + d] + a * v[r, base + d]
    return out_arr, alpha_arr


def attention_backward(const double[:, ::1] grad, const double[:, ::1] q, const double[:, ::1] k,
                       const double[:, ::1] v, const idx_t[:, ::1] idx, const idx_t[::1] counts,
                       int n_heads, double scale, const double[:, :, ::1] alpha, drop=None):
    cdef Py_ssize_t n = q.shape[0], width = q.shape[1], m = k.shape[0], kmax = idx.shape[1]
    cdef Py_ssize_t dh = width // n_heads
    dq_arr = np.zeros((n, width), dtype=np.float64)
    dk_arr = np.zeros((m, width), dtype=np.float64)
    dv_arr = np.zeros((m, width), dtype=np.float64)
    da_arr = np.zeros(kmax, dtype=np.float64)
    cdef double[:, ::1] dq = dq_arr
    cdef double[:, ::1] dk = dk_arr
    cdef double[:, ::1] dv = dv_arr
    cdef double[::1] da = da_arr
    cdef const double[:, :, ::1] dmask
    cdef bint has_drop = drop is not None
    if has_drop:
        dmask = drop
    cdef Py_ssize_t i, h, j, d, base, r, c
    cdef double s, dot, a, ds, gd
    with nogil:
        for i in range(n):
            c = counts[i]
            for h in range(n_heads):
                base = h * dh
                dot = 0.0
                for j in range(c):
                    r = idx[i, j]
                    s = 0.0
                    for d in range(dh):
                        s = s + grad[i, base + d] * v[r, base + d]
                    if has_drop:
                        s = s * dmask[i, h, j]
                    da[j] = s
                    dot = dot + alpha[i, h, j] * s
                for j in range(c):
                    r = idx[i, j]
                    a = alpha[i, h, j]
                    ds = a * (da[j] - dot) * scale
                    if has_drop:
                        a = a * dmask[i, h, j]
                    for d in range(dh):
                        gd = grad[i, base + d]
                        dq[i, base + d] = dq[i, base + d] + ds * k[r, base + d]
                        dk[r, base + d] = dk[r, base + d] + ds * q[i, base + d]
                        dv[r, base + d] = dv[r, base + d] + a * gd
    return dq_arr, dk_arr, dv_arr


def scatter_add_rows(const double[:, ::1] src, const idx_t[::1] idx, Py_ssize_t n_rows):
    cdef Py_ssize_t rows = src.shape[0], width = src.shape[1], r, d, t
    out_arr = np.zeros((n_rows, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(rows):
            t = idx[r]
            for d in range(width):
                out[t, d] = out[t, d] + src[r, d]
    return out_arr
