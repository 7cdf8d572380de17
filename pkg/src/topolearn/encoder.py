"""Graph encoders producing node representations for original and
transformed graphs with one shared parameter set."""

from __future__ import annotations

import numpy as np

from .errors import DataError, NumericalError
from .graph_core import CsrMatrix, Graph, propagate_k, spmm
from .model import EncoderParams, GcnStack, GinLayer, GinStack, SgcParams


def require_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericalError(f"non-finite values in {name}")


def leaky_relu(x: np.ndarray, slope: float) -> np.ndarray:
    """Elementwise max(x, slope * x); slope 0 is plain ReLU."""
    if slope < 0:
        raise DataError(f"leaky_relu slope must be >= 0, got {slope}")
    return np.maximum(x, slope * x)


def sgc_forward(
    p: SgcParams, s_hat: CsrMatrix, x: np.ndarray, cache: dict | None = None
) -> np.ndarray:
    """H = (normalized adjacency)^k X W + b, optionally LeakyReLU-activated."""
    if x.shape[1] != p.w.shape[0]:
        raise DataError(
            f"feature dim {x.shape[1]} does not match weight rows {p.w.shape[0]}"
        )
    prop = propagate_k(s_hat, x, p.k)
    z = prop @ p.w + p.b
    h = z if p.activation_slope is None else leaky_relu(z, p.activation_slope)
    require_finite("sgc_forward output", h)
    if cache is not None:
        cache["prop"] = prop
        cache["z"] = z
    return h


def gcn_forward(
    stack: GcnStack, s_hat: CsrMatrix, x: np.ndarray, cache: dict | None = None
) -> np.ndarray:
    """Per layer H <- act(S H W + b); the final layer stays linear."""
    h = x
    saved = []
    last = len(stack.layers) - 1
    for li, layer in enumerate(stack.layers):
        if h.shape[1] != layer.w.shape[0]:
            raise DataError(
                f"layer {li}: input dim {h.shape[1]} does not match "
                f"weight rows {layer.w.shape[0]}"
            )
        prop = spmm(s_hat, h)
        z = prop @ layer.w + layer.b
        saved.append((prop, z))
        h = z if li == last else leaky_relu(z, stack.negative_slope)
    require_finite("gcn_forward output", h)
    if cache is not None:
        cache["layers"] = saved
        cache["s_hat"] = s_hat
    return h


def gin_forward(
    layers: list[GinLayer], graph: Graph, x: np.ndarray, cache: dict | None = None
) -> np.ndarray:
    """Per layer h_i <- MLP((1 + eps) h_i + sum of neighbor features)."""
    if x.shape[0] != graph.num_nodes:
        raise DataError(
            f"feature rows {x.shape[0]} do not match node count {graph.num_nodes}"
        )
    h = x
    saved = []
    for li, layer in enumerate(layers):
        if h.shape[1] != layer.w1.shape[0]:
            raise DataError(
                f"layer {li}: input dim {h.shape[1]} does not match "
                f"mlp rows {layer.w1.shape[0]}"
            )
        agg = (1.0 + layer.eps) * h + spmm(graph.csr, h)
        z1 = agg @ layer.w1 + layer.b1
        r = np.maximum(z1, 0.0)
        h = r @ layer.w2 + layer.b2
        saved.append((agg, z1, r))
    require_finite("gin_forward output", h)
    if cache is not None:
        cache["layers"] = saved
        cache["adj"] = graph.csr
    return h


def encoder_forward(
    enc: EncoderParams,
    graph: Graph,
    s_hat: CsrMatrix,
    x: np.ndarray,
    cache: dict | None = None,
) -> np.ndarray:
    """Dispatch on the encoder family; GIN aggregates over the raw adjacency."""
    if isinstance(enc, SgcParams):
        return sgc_forward(enc, s_hat, x, cache)
    if isinstance(enc, GcnStack):
        return gcn_forward(enc, s_hat, x, cache)
    if isinstance(enc, GinStack):
        return gin_forward(enc.layers, graph, x, cache)
    raise TypeError(f"unknown encoder parameter type: {type(enc)!r}")
