"""Hot numeric kernels: numba-jitted fast path with a pure-numpy fallback.

The backend is picked once at import time from the ``TOPOLEARN_BACKEND``
environment variable: ``numba`` (require the jitted path), ``numpy``
(force the fallback), or ``auto`` (numba when importable, default).
"""

from __future__ import annotations

import os

from . import _numpy

_requested = os.environ.get("TOPOLEARN_BACKEND", "auto").lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"TOPOLEARN_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

_impl = _numpy
_backend = "numpy"
if _requested in ("auto", "numba"):
    try:
        from . import _numba

        _impl = _numba
        _backend = "numba"
    except ImportError:
        if _requested == "numba":
            raise


def active_backend() -> str:
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return _backend


def csr_dense_matmul(row_ptr, col_idx, values, x):
    """Multiply a CSR matrix by a dense row-major float64 matrix."""
    return _impl.csr_dense_matmul(row_ptr, col_idx, values, x)


def edge_repr_forward(delta_h, rows_i, rows_j, guard):
    """Per-pair squared-difference features.

    For each pair p: d_p = delta_h[i_p] - delta_h[j_p], u_p = exp(-d_p * d_p),
    e_p = u_p / ||u_p||_1. Rows whose L1 norm falls below ``guard`` get the
    uniform vector instead. Returns (d, e, s) with s the pre-guard norms.
    """
    return _impl.edge_repr_forward(delta_h, rows_i, rows_j, guard)


def edge_repr_backward(d, e, s, rows_i, rows_j, d_e, guard, n_rows):
    """Adjoint of :func:`edge_repr_forward` with respect to ``delta_h``.

    Guarded (uniform) rows are constants, so they contribute no gradient.
    """
    return _impl.edge_repr_backward(d, e, s, rows_i, rows_j, d_e, guard, n_rows)
