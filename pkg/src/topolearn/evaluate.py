"""Downstream evaluation on frozen representations: linear probes, link
prediction, pooling, robustness noise, temporal deltas, and the
equivariance residual report."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .data_io import SplitMasks
from .decoder import LOG_CLAMP
from .errors import DataError
from .graph_core import Graph, normalized_adjacency, spmm, _csr_from_sym_entries
from .model import Model, SgcParams, zero_grads
from .encoder import encoder_forward, sgc_forward
from .training import AdamState, _encoder_backward, adam_step
from .transform import (
    ADD,
    KEEP_CONNECTED,
    KEEP_DISCONNECTED,
    REMOVE,
    LabeledPairs,
    _pair_keys,
    sample_non_edges,
)


@dataclass(frozen=True)
class RankingMetrics:
    auc: float
    ap: float


@dataclass
class ProbeConfig:
    epochs: int = 300
    lr: float = 0.05


def probe_train(
    h: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    num_classes: int,
    cfg: ProbeConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Fit a softmax linear classifier on the training rows only."""
    train_labels = labels[train_idx]
    present = np.unique(train_labels)
    if present.shape[0] < num_classes:
        missing = sorted(set(range(num_classes)) - set(present.tolist()))
        raise DataError(f"classes {missing} absent from the training mask")
    ht = h[train_idx]
    y = np.zeros((ht.shape[0], num_classes))
    y[np.arange(ht.shape[0]), train_labels] = 1.0
    w = np.zeros((h.shape[1], num_classes))
    b = np.zeros(num_classes)
    mw, vw = np.zeros_like(w), np.zeros_like(w)
    mb, vb = np.zeros_like(b), np.zeros_like(b)
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, cfg.epochs + 1):
        logits = ht @ w + b
        logits -= logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        g = (p - y) / ht.shape[0]
        gw = ht.T @ g
        gb = g.sum(axis=0)
        for param, grad, m, v in ((w, gw, mw, vw), (b, gb, mb, vb)):
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            param -= cfg.lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
    return w, b


def linear_probe(
    h: np.ndarray,
    labels: np.ndarray,
    masks: SplitMasks,
    cfg: ProbeConfig | None = None,
    h_eval: np.ndarray | None = None,
) -> float:
    """Test accuracy of a linear probe trained on frozen representations.

    When ``h_eval`` is given (e.g. representations of noise-corrupted
    features), the probe is trained on ``h`` and evaluated on ``h_eval``.
    """
    cfg = cfg or ProbeConfig()
    masks.validate(h.shape[0])
    num_classes = int(labels.max()) + 1
    w, b = probe_train(h, labels, masks.train, num_classes, cfg)
    source = h if h_eval is None else h_eval
    pred = np.argmax(source[masks.test] @ w + b, axis=1)
    return float((pred == labels[masks.test]).mean())


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def inner_products(h: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Raw inner products h_i . h_j; the rank-equivalent of the sigmoid
    scores without float saturation collapsing large logits into ties."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.einsum("pf,pf->p", h[pairs[:, 0]], h[pairs[:, 1]])


def score_pairs(h: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """Inner-product link scores sigmoid(h_i . h_j) for an array of pairs."""
    return sigmoid(inner_products(h, pairs))


def link_scores(h: np.ndarray):
    """Symmetric pairwise score function over node indices."""

    def score(i, j):
        return sigmoid(np.einsum("...f,...f->...", h[i], h[j]))

    return score


def ranking_metrics(scores, labels) -> RankingMetrics:
    """AUC (ties count half) and average precision (ties broken by index)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = scores.shape[0]
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("ranking metrics need both a positive and a negative")

    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(n, dtype=np.float64)
    i = 0
    while i < n:
        j = i
        while j < n and scores[order[j]] == scores[order[i]]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    desc = np.lexsort((np.arange(n), -scores))
    ordered = labels[desc]
    cum_pos = np.cumsum(ordered)
    at_pos = ordered == 1
    precisions = cum_pos[at_pos] / (np.nonzero(at_pos)[0] + 1.0)
    return RankingMetrics(float(auc), float(precisions.mean()))


def global_add_pool(h: np.ndarray, graph_ids) -> np.ndarray:
    """Sum node rows per graph id; ids must be contiguous from 0."""
    ids = np.asarray(graph_ids, dtype=np.int64)
    if ids.shape[0] != h.shape[0]:
        raise DataError("graph id count does not match node rows")
    if ids.size and ids.min() < 0:
        raise DataError("graph ids must be nonnegative")
    num_graphs = int(ids.max()) + 1 if ids.size else 0
    out = np.zeros((num_graphs, h.shape[1]))
    np.add.at(out, ids, h)
    return out


def inject_noise(
    x: np.ndarray, kind: str, level: float, rng: np.random.Generator
) -> np.ndarray:
    """Additive zero-centered Gaussian (std) or Laplace (scale) noise."""
    if level < 0:
        raise DataError(f"noise level must be >= 0, got {level}")
    if kind == "gaussian":
        return x + rng.normal(0.0, level, size=x.shape)
    if kind == "laplace":
        return x + rng.laplace(0.0, level, size=x.shape)
    raise DataError(f"unknown noise kind {kind!r}")


def temporal_delta(
    a_prev: Graph, a_next: Graph, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, LabeledPairs]:
    """Edge delta between consecutive snapshots plus four-way labels.

    Pairs gaining an edge are adds, losing are removes, persisting edges are
    keep-connected; keep-disconnected pairs are sampled from pairs absent in
    both snapshots so the disconnected side matches |E_prev| in count.
    """
    if a_prev.num_nodes != a_next.num_nodes:
        raise DataError(
            f"node counts differ: {a_prev.num_nodes} vs {a_next.num_nodes}"
        )
    n = a_prev.num_nodes
    prev_keys = _pair_keys(a_prev.edges, n)
    next_keys = _pair_keys(a_next.edges, n)
    add_keys = np.setdiff1d(next_keys, prev_keys, assume_unique=True)
    rem_keys = np.setdiff1d(prev_keys, next_keys, assume_unique=True)
    keep_keys = np.intersect1d(prev_keys, next_keys, assume_unique=True)

    def decode(keys):
        return np.stack([keys // n, keys % n], axis=1).astype(np.int64)

    adds, removes, keeps = decode(add_keys), decode(rem_keys), decode(keep_keys)

    from .graph_core import build_graph

    union = build_graph(
        np.concatenate([a_prev.edges, a_next.edges], axis=0)
        if a_prev.num_edges + a_next.num_edges
        else np.empty((0, 2), dtype=np.int64),
        n,
    )
    want = max(0, a_prev.num_edges - adds.shape[0])
    available = n * (n - 1) // 2 - union.num_edges
    keep_disc = sample_non_edges(union, min(want, available), rng)

    pairs = np.concatenate([adds, removes, keeps, keep_disc], axis=0)
    labels = np.concatenate(
        [
            np.full(adds.shape[0], ADD, dtype=np.int64),
            np.full(removes.shape[0], REMOVE, dtype=np.int64),
            np.full(keeps.shape[0], KEEP_CONNECTED, dtype=np.int64),
            np.full(keep_disc.shape[0], KEEP_DISCONNECTED, dtype=np.int64),
        ]
    )
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    labeled = LabeledPairs(pairs[order], labels[order])

    delta_pairs = np.concatenate([adds, removes], axis=0)
    delta_signs = np.concatenate(
        [
            np.ones(adds.shape[0], dtype=np.int64),
            -np.ones(removes.shape[0], dtype=np.int64),
        ]
    )
    return delta_pairs, delta_signs, labeled


def normalized_delta_matrix(
    transformed: Graph, delta_pairs: np.ndarray, delta_signs: np.ndarray
):
    """Delta adjacency rescaled by the transformed graph's degree terms."""
    n = transformed.num_nodes
    deg = transformed.degrees().astype(np.float64) + 1.0
    inv_sqrt = 1.0 / np.sqrt(deg)
    if delta_pairs.shape[0] == 0:
        return _csr_from_sym_entries(
            n, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0)
        )
    i, j = delta_pairs[:, 0], delta_pairs[:, 1]
    vals = delta_signs * inv_sqrt[i] * inv_sqrt[j]
    return _csr_from_sym_entries(
        n,
        np.concatenate([i, j]),
        np.concatenate([j, i]),
        np.concatenate([vals, vals]),
    )


def equivariance_report(
    enc: SgcParams,
    graph: Graph,
    transformed: Graph,
    x: np.ndarray,
    delta_pairs: np.ndarray,
    delta_signs: np.ndarray,
    out_dir=None,
) -> dict:
    """Residual of reconstructing the transformed representations from an
    estimated edge delta, for a single order-1 propagation encoder.

    Computes dH = scaled-delta @ X @ W and reports
    ||H + dH - H_t||_F / ||H_t - H||_F, optionally dumping the four
    matrices as headerless CSV.
    """
    if enc.k != 1:
        raise DataError("equivariance report requires a k=1 encoder")
    s_hat = normalized_adjacency(graph)
    s_hat_t = normalized_adjacency(transformed)
    h = sgc_forward(enc, s_hat, x)
    h_t = sgc_forward(enc, s_hat_t, x)
    delta_m = normalized_delta_matrix(transformed, delta_pairs, delta_signs)
    d_h = spmm(delta_m, x) @ enc.w
    reconstructed = h + d_h
    num = float(np.linalg.norm(reconstructed - h_t))
    den = float(np.linalg.norm(h_t - h))
    residual = num / den if den > 0 else 0.0
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for name, mat in (
            ("h.csv", h),
            ("h_transformed.csv", h_t),
            ("delta_h_estimated.csv", d_h),
            ("h_plus_delta.csv", reconstructed),
        ):
            np.savetxt(os.path.join(out_dir, name), mat, fmt="%.17g", delimiter=",")
    return {
        "residual": residual,
        "reconstruction_error": num,
        "representation_shift": den,
    }


def bce_link_loss(h: np.ndarray, pairs: np.ndarray, y: np.ndarray):
    """Binary cross entropy of inner-product scores plus gradient wrt h."""
    scores = score_pairs(h, pairs)
    clamped = np.clip(scores, LOG_CLAMP, 1.0 - LOG_CLAMP)
    loss = float(-(y * np.log(clamped) + (1 - y) * np.log(1 - clamped)).mean())
    dz = (scores - y) / pairs.shape[0]
    d_h = np.zeros_like(h)
    np.add.at(d_h, pairs[:, 0], dz[:, None] * h[pairs[:, 1]])
    np.add.at(d_h, pairs[:, 1], dz[:, None] * h[pairs[:, 0]])
    return loss, d_h


def fine_tune_link(
    model: Model,
    graph: Graph,
    x: np.ndarray,
    train_edges: np.ndarray,
    epochs: int,
    lr: float,
    rng: np.random.Generator,
) -> tuple[Model, list[dict]]:
    """Fine-tune the encoder with the inner-product decoder.

    Each epoch scores the training edges against an equal number of freshly
    sampled non-edges and takes one Adam step on the binary cross entropy.
    """
    state = AdamState(lr=lr)
    s_hat = normalized_adjacency(graph)
    history = []
    for epoch in range(epochs):
        neg = sample_non_edges(graph, train_edges.shape[0], rng)
        pairs = np.concatenate([train_edges, neg], axis=0)
        y = np.concatenate(
            [np.ones(train_edges.shape[0]), np.zeros(neg.shape[0])]
        )
        cache = {}
        h = encoder_forward(model.encoder, graph, s_hat, x, cache)
        loss, d_h = bce_link_loss(h, pairs, y)
        grads = zero_grads(model)
        _encoder_backward(model.encoder, cache, d_h, grads, "encoder.")
        adam_step(model, grads, state)
        history.append({"epoch": epoch, "loss": loss})
    return model, history
