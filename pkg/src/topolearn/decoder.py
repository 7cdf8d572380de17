"""Transformation-type prediction from representation differences."""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import DataError
from .model import DecoderParams

# Below this L1 mass the squared-difference features have fully underflowed
# and the uniform vector is emitted instead.
NORM_GUARD = 1e-30

# Probabilities are clamped here inside the log so saturated predictions
# keep the loss finite.
LOG_CLAMP = 1e-12


def feature_diff(h_t: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Elementwise difference between transformed and original representations."""
    if h_t.shape != h.shape:
        raise DataError(f"shape mismatch: {h_t.shape} vs {h.shape}")
    return h_t - h


def edge_repr(
    delta_h: np.ndarray, pairs: np.ndarray, cache: dict | None = None
) -> np.ndarray:
    """Per-pair normalized exp(-(dh_i - dh_j)^2) feature vectors, one row
    per pair; rows are nonnegative with unit L1 norm."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    rows_i = np.ascontiguousarray(pairs[:, 0])
    rows_j = np.ascontiguousarray(pairs[:, 1])
    d, e, s = kernels.edge_repr_forward(delta_h, rows_i, rows_j, NORM_GUARD)
    if cache is not None:
        cache.update(d=d, e=e, s=s, rows_i=rows_i, rows_j=rows_j)
    return e


def edge_repr_backward(cache: dict, d_e: np.ndarray, n_rows: int) -> np.ndarray:
    """Gradient of the edge representations with respect to delta_h."""
    return kernels.edge_repr_backward(
        cache["d"],
        cache["e"],
        cache["s"],
        cache["rows_i"],
        cache["rows_j"],
        d_e,
        NORM_GUARD,
        n_rows,
    )


def predict_types(p: DecoderParams, e: np.ndarray) -> np.ndarray:
    """Softmax class probabilities per pair; rows sum to one."""
    logits = e @ p.w + p.b
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    return expl / expl.sum(axis=1, keepdims=True)


def ce_loss(pred: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross entropy, -log of the probability at the true class."""
    labels = np.asarray(labels, dtype=np.int64)
    if pred.shape[0] == 0:
        raise DataError("cross entropy needs at least one pair")
    picked = pred[np.arange(pred.shape[0]), labels]
    return float(-np.log(np.maximum(picked, LOG_CLAMP)).mean())
