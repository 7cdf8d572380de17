"""Reverse-mode gradients for the full pipeline, Adam, and the pretraining loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import decoder as dec
from .encoder import encoder_forward
from .errors import DataError, NumericalError, TrainingDiverged
from .graph_core import CsrMatrix, Graph, normalized_adjacency, spmm
from .model import (
    GcnStack,
    GinStack,
    Model,
    SgcParams,
    init_decoder,
    init_gcn,
    init_gin,
    init_sgc,
    param_arrays,
    zero_grads,
)
from .transform import (
    LabeledPairs,
    apply_transform,
    sample_pairs,
    split_pairs,
    transform_labels,
)


@dataclass
class TrainConfig:
    rate: float = 0.7
    order: int = 2
    channels: int = 512
    lr: float = 1e-4
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0
    encoder: str = "sgc"  # sgc | gcn | gin
    hidden: int = 32
    num_layers: int = 2  # gcn/gin stack depth
    negative_slope: float = 0.1
    sgc_activation: bool = False  # LeakyReLU after the SGC layer

    def validate(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise DataError(f"rate must be in [0, 1], got {self.rate}")
        if self.order < 1:
            raise DataError(f"order must be >= 1, got {self.order}")
        if self.patience < 1:
            raise DataError(f"patience must be >= 1, got {self.patience}")


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_model(config: TrainConfig, input_dim: int, rng: np.random.Generator) -> Model:
    """Build encoder + decoder parameters for the configured family."""
    if config.encoder == "sgc":
        slope = config.negative_slope if config.sgc_activation else None
        enc = init_sgc(rng, input_dim, config.channels, config.order, slope)
    elif config.encoder == "gcn":
        dims = [input_dim] + [config.hidden] * (config.num_layers - 1) + [config.channels]
        enc = init_gcn(rng, dims, config.negative_slope)
    elif config.encoder == "gin":
        dims = [input_dim] + [config.hidden] * (config.num_layers - 1) + [config.channels]
        enc = init_gin(rng, dims)
    else:
        raise DataError(f"unknown encoder family {config.encoder!r}")
    return Model(enc, init_decoder(rng, config.channels))


def count_parameters(model: Model) -> int:
    """Total number of weight and bias elements."""
    return sum(arr.size for _, arr in param_arrays(model))


def _encoder_backward(enc, cache: dict, d_h: np.ndarray, grads: dict, prefix: str):
    """Accumulate encoder gradients for one encode pass; d_h is the loss
    gradient at that pass's output."""
    if isinstance(enc, SgcParams):
        if enc.activation_slope is not None:
            d_h = d_h * np.where(cache["z"] > 0, 1.0, enc.activation_slope)
        grads[prefix + "w"] += cache["prop"].T @ d_h
        grads[prefix + "b"] += d_h.sum(axis=0)
        return
    if isinstance(enc, GcnStack):
        s_hat: CsrMatrix = cache["s_hat"]
        last = len(enc.layers) - 1
        for li in range(last, -1, -1):
            prop, z = cache["layers"][li]
            if li == last:
                d_z = d_h
            else:
                d_z = d_h * np.where(z > 0, 1.0, enc.negative_slope)
            grads[f"{prefix}layers[{li}].w"] += prop.T @ d_z
            grads[f"{prefix}layers[{li}].b"] += d_z.sum(axis=0)
            if li > 0:
                d_h = spmm(s_hat, d_z @ enc.layers[li].w.T)
        return
    if isinstance(enc, GinStack):
        adj: CsrMatrix = cache["adj"]
        for li in range(len(enc.layers) - 1, -1, -1):
            layer = enc.layers[li]
            agg, z1, r = cache["layers"][li]
            d_z2 = d_h
            grads[f"{prefix}layers[{li}].w2"] += r.T @ d_z2
            grads[f"{prefix}layers[{li}].b2"] += d_z2.sum(axis=0)
            d_z1 = (d_z2 @ layer.w2.T) * (z1 > 0)
            grads[f"{prefix}layers[{li}].w1"] += agg.T @ d_z1
            grads[f"{prefix}layers[{li}].b1"] += d_z1.sum(axis=0)
            if li > 0:
                d_agg = d_z1 @ layer.w1.T
                d_h = (1.0 + layer.eps) * d_agg + spmm(adj, d_agg)
        return
    raise TypeError(f"unknown encoder parameter type: {type(enc)!r}")


def forward_loss(
    model: Model,
    graph: Graph,
    transformed: Graph,
    x: np.ndarray,
    labeled: LabeledPairs,
    s_hat: CsrMatrix | None = None,
    s_hat_t: CsrMatrix | None = None,
) -> tuple[float, np.ndarray]:
    """Loss and per-pair class probabilities, no gradients."""
    if s_hat is None:
        s_hat = normalized_adjacency(graph)
    if s_hat_t is None:
        s_hat_t = normalized_adjacency(transformed)
    h = encoder_forward(model.encoder, graph, s_hat, x)
    h_t = encoder_forward(model.encoder, transformed, s_hat_t, x)
    delta_h = dec.feature_diff(h_t, h)
    e = dec.edge_repr(delta_h, labeled.pairs)
    probs = dec.predict_types(model.decoder, e)
    return dec.ce_loss(probs, labeled.labels), probs


def backward(
    model: Model,
    graph: Graph,
    transformed: Graph,
    x: np.ndarray,
    labeled: LabeledPairs,
    s_hat: CsrMatrix | None = None,
    s_hat_t: CsrMatrix | None = None,
) -> tuple[float, dict, np.ndarray]:
    """Loss, analytic parameter gradients, and class probabilities.

    Both encode passes read the one shared parameter set; their gradients
    accumulate into the same arrays. The gradient is exact away from the
    cross-entropy log clamp and the edge-representation underflow guard
    (both branches are constant there).
    """
    if s_hat is None:
        s_hat = normalized_adjacency(graph)
    if s_hat_t is None:
        s_hat_t = normalized_adjacency(transformed)
    enc_cache, enc_cache_t, pair_cache = {}, {}, {}
    h = encoder_forward(model.encoder, graph, s_hat, x, enc_cache)
    h_t = encoder_forward(model.encoder, transformed, s_hat_t, x, enc_cache_t)
    delta_h = dec.feature_diff(h_t, h)
    e = dec.edge_repr(delta_h, labeled.pairs, cache=pair_cache)
    probs = dec.predict_types(model.decoder, e)
    loss = dec.ce_loss(probs, labeled.labels)

    n_pairs = labeled.pairs.shape[0]
    d_logits = probs.copy()
    d_logits[np.arange(n_pairs), labeled.labels] -= 1.0
    d_logits /= n_pairs

    grads = zero_grads(model)
    grads["decoder.w"] += e.T @ d_logits
    grads["decoder.b"] += d_logits.sum(axis=0)
    d_e = d_logits @ model.decoder.w.T
    d_delta_h = dec.edge_repr_backward(pair_cache, d_e, x.shape[0])
    _encoder_backward(model.encoder, enc_cache_t, d_delta_h, grads, "encoder.")
    _encoder_backward(model.encoder, enc_cache, -d_delta_h, grads, "encoder.")

    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient in {name}")
    return loss, grads, probs


def adam_step(model: Model, grads: dict, state: AdamState) -> None:
    """In-place Adam update: m, v moving averages, bias correction, then
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, arr in param_arrays(model):
        g = grads[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        arr -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def sample_epoch(graph: Graph, rate: float, rng: np.random.Generator):
    """One fresh transformation draw: transformed graph plus labeled pairs."""
    pairs = sample_pairs(graph, rng)
    plan = split_pairs(pairs, rate, rng)
    tg = apply_transform(graph, plan)
    return tg, transform_labels(plan)


def type_accuracy(probs: np.ndarray, labels: np.ndarray) -> float:
    return float((probs.argmax(axis=1) == labels).mean())


def evaluate_type_accuracy(
    model: Model, graph: Graph, x: np.ndarray, rate: float, rng: np.random.Generator
) -> float:
    """Transformation-type accuracy on a freshly sampled plan."""
    tg, labeled = sample_epoch(graph, rate, rng)
    _, probs = forward_loss(model, graph, tg.transformed, x, labeled)
    return type_accuracy(probs, labeled.labels)


def pretrain(
    config: TrainConfig,
    graph: Graph,
    x: np.ndarray,
    rng: np.random.Generator | None = None,
    model: Model | None = None,
) -> tuple[Model, list[dict]]:
    """Self-supervised pretraining on one graph.

    Each epoch draws a fresh plan, encodes original and transformed graphs
    with the shared weights, and takes one Adam step on the type
    cross-entropy. Stops early when the training loss has not improved for
    ``patience`` consecutive epochs.
    """
    config.validate()
    if graph.num_edges == 0:
        raise DataError("pretraining needs a graph with at least one edge")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if model is None:
        model = init_model(config, x.shape[1], rng)
    state = AdamState(lr=config.lr)
    history: list[dict] = []
    s_hat = normalized_adjacency(graph)
    best = np.inf
    stale = 0
    for epoch in range(config.max_epochs):
        tg, labeled = sample_epoch(graph, config.rate, rng)
        try:
            loss, grads, probs = backward(
                model, graph, tg.transformed, x, labeled, s_hat=s_hat
            )
        except NumericalError as err:
            raise TrainingDiverged(str(err), history) from err
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at epoch {epoch}", history)
        adam_step(model, grads, state)
        history.append(
            {
                "epoch": epoch,
                "loss": float(loss),
                "type_acc": type_accuracy(probs, labeled.labels),
            }
        )
        if loss < best:
            best = loss
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return model, history


def pretrain_collection(
    config: TrainConfig,
    graphs: list[Graph],
    features: list[np.ndarray],
    rng: np.random.Generator | None = None,
    model: Model | None = None,
    batch_size: int = 64,
) -> tuple[Model, list[dict]]:
    """Pretraining over a collection of graphs in mini-batches.

    Per epoch the collection is shuffled into batches; each batch takes one
    Adam step on the mean over all sampled pairs in the batch.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.seed)
    if model is None:
        model = init_model(config, features[0].shape[1], rng)
    state = AdamState(lr=config.lr)
    history: list[dict] = []
    best = np.inf
    stale = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(graphs))
        epoch_loss = 0.0
        epoch_hits = 0.0
        epoch_pairs = 0
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            grads_total = zero_grads(model)
            pair_total = 0
            batch_loss = 0.0
            for gi in batch:
                graph = graphs[gi]
                if graph.num_edges == 0:
                    continue
                tg, labeled = sample_epoch(graph, config.rate, rng)
                try:
                    loss, grads, probs = backward(
                        model, graph, tg.transformed, features[gi], labeled
                    )
                except NumericalError as err:
                    raise TrainingDiverged(str(err), history) from err
                n_pairs = labeled.pairs.shape[0]
                # Per-graph losses are pair means; reweigh so the batch step
                # is the mean over every pair in the batch.
                for name in grads_total:
                    grads_total[name] += grads[name] * n_pairs
                batch_loss += loss * n_pairs
                pair_total += n_pairs
                epoch_hits += float(
                    (probs.argmax(axis=1) == labeled.labels).sum()
                )
            if pair_total == 0:
                continue
            for name in grads_total:
                grads_total[name] /= pair_total
            adam_step(model, grads_total, state)
            epoch_loss += batch_loss
            epoch_pairs += pair_total
        loss = epoch_loss / max(epoch_pairs, 1)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became {loss} at epoch {epoch}", history)
        history.append(
            {
                "epoch": epoch,
                "loss": float(loss),
                "type_acc": epoch_hits / max(epoch_pairs, 1),
            }
        )
        if loss < best:
            best = loss
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return model, history


def grad_check(
    model: Model,
    graph: Graph,
    transformed: Graph,
    x: np.ndarray,
    labeled: LabeledPairs,
    h: float = 1e-5,
) -> float:
    """Max relative error between analytic gradients and central differences.

    Relative error per component is |a - fd| / max(|a|, |fd|, 1e-4). The
    floor keeps finite-difference roundoff (about 1e-11 absolute at unit
    loss scale with h = 1e-5) from dominating near-zero components; at the
    floor the check still demands absolute agreement below 1e-9.
    """
    s_hat = normalized_adjacency(graph)
    s_hat_t = normalized_adjacency(transformed)
    _, grads, _ = backward(model, graph, transformed, x, labeled, s_hat, s_hat_t)
    worst = 0.0
    for name, arr in param_arrays(model):
        flat = arr.reshape(-1)
        gflat = grads[name].reshape(-1)
        for idx in range(flat.shape[0]):
            orig = flat[idx]
            flat[idx] = orig + h
            lp, _ = forward_loss(model, graph, transformed, x, labeled, s_hat, s_hat_t)
            flat[idx] = orig - h
            lm, _ = forward_loss(model, graph, transformed, x, labeled, s_hat, s_hat_t)
            flat[idx] = orig
            fd = (lp - lm) / (2.0 * h)
            denom = max(abs(gflat[idx]), abs(fd), 1e-4)
            worst = max(worst, abs(gflat[idx] - fd) / denom)
    return worst
