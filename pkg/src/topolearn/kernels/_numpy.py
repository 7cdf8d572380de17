"""Pure-numpy implementations of the hot kernels."""

from __future__ import annotations

import numpy as np


def csr_dense_matmul(row_ptr, col_idx, values, x):
    n_rows = row_ptr.shape[0] - 1
    out = np.zeros((n_rows, x.shape[1]), dtype=np.float64)
    if col_idx.shape[0] == 0:
        return out
    prod = values[:, None] * x[col_idx]
    nonempty = np.diff(row_ptr) > 0
    # reduceat segments for non-empty rows end exactly at the next non-empty
    # row's start because empty rows contribute no entries in between.
    out[nonempty] = np.add.reduceat(prod, row_ptr[:-1][nonempty], axis=0)
    return out


def edge_repr_forward(delta_h, rows_i, rows_j, guard):
    d = delta_h[rows_i] - delta_h[rows_j]
    u = np.exp(-d * d)
    s = u.sum(axis=1)
    e = np.empty_like(u)
    live = s >= guard
    np.divide(u, s[:, None], out=e, where=live[:, None])
    e[~live] = 1.0 / delta_h.shape[1]
    return d, e, s


def edge_repr_backward(d, e, s, rows_i, rows_j, d_e, guard, n_rows):
    dot = np.einsum("pf,pf->p", d_e, e)
    dd = -2.0 * d * e * (d_e - dot[:, None])
    dd[s < guard] = 0.0
    out = np.zeros((n_rows, d.shape[1]), dtype=np.float64)
    np.add.at(out, rows_i, dd)
    np.subtract.at(out, rows_j, dd)
    return out
