"""Numba-jitted implementations of the hot kernels.

Same contracts as ``_numpy``; results agree to floating-point rounding
(summation order differs, so bitwise equality across backends is not
guaranteed).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _csr_dense_matmul(row_ptr, col_idx, values, x, out):
    n_rows = row_ptr.shape[0] - 1
    n_cols = x.shape[1]
    for i in range(n_rows):
        for p in range(row_ptr[i], row_ptr[i + 1]):
            j = col_idx[p]
            v = values[p]
            for k in range(n_cols):
                out[i, k] += v * x[j, k]


def csr_dense_matmul(row_ptr, col_idx, values, x):
    out = np.zeros((row_ptr.shape[0] - 1, x.shape[1]), dtype=np.float64)
    _csr_dense_matmul(row_ptr, col_idx, values, np.ascontiguousarray(x), out)
    return out


@njit(cache=True)
def _edge_repr_forward(delta_h, rows_i, rows_j, guard, d, e, s):
    n_pairs = rows_i.shape[0]
    n_feat = delta_h.shape[1]
    uniform = 1.0 / n_feat
    for p in range(n_pairs):
        i = rows_i[p]
        j = rows_j[p]
        total = 0.0
        for k in range(n_feat):
            dv = delta_h[i, k] - delta_h[j, k]
            d[p, k] = dv
            ev = np.exp(-dv * dv)
            e[p, k] = ev
            total += ev
        s[p] = total
        if total < guard:
            for k in range(n_feat):
                e[p, k] = uniform
        else:
            inv = 1.0 / total
            for k in range(n_feat):
                e[p, k] *= inv


def edge_repr_forward(delta_h, rows_i, rows_j, guard):
    n_pairs = rows_i.shape[0]
    n_feat = delta_h.shape[1]
    d = np.empty((n_pairs, n_feat), dtype=np.float64)
    e = np.empty((n_pairs, n_feat), dtype=np.float64)
    s = np.empty(n_pairs, dtype=np.float64)
    _edge_repr_forward(
        np.ascontiguousarray(delta_h), rows_i, rows_j, guard, d, e, s
    )
    return d, e, s


@njit(cache=True)
def _edge_repr_backward(d, e, s, rows_i, rows_j, d_e, guard, out):
    n_pairs = rows_i.shape[0]
    n_feat = d.shape[1]
    for p in range(n_pairs):
        if s[p] < guard:
            continue
        i = rows_i[p]
        j = rows_j[p]
        dot = 0.0
        for k in range(n_feat):
            dot += d_e[p, k] * e[p, k]
        for k in range(n_feat):
            dd = -2.0 * d[p, k] * e[p, k] * (d_e[p, k] - dot)
            out[i, k] += dd
            out[j, k] -= dd
    return out


def edge_repr_backward(d, e, s, rows_i, rows_j, d_e, guard, n_rows):
    out = np.zeros((n_rows, d.shape[1]), dtype=np.float64)
    _edge_repr_backward(
        d, e, s, rows_i, rows_j, np.ascontiguousarray(d_e), guard, out
    )
    return out
