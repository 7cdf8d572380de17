"""Edge-flip sampling: node-pair sets, rate-r split, transformed graph, labels.

Labels use the fixed class order 0: add, 1: remove, 2: keep-disconnected,
3: keep-connected.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph_core import Graph, _graph_from_canonical_edges

ADD, REMOVE, KEEP_DISCONNECTED, KEEP_CONNECTED = 0, 1, 2, 3
NUM_CLASSES = 4


@dataclass(frozen=True)
class PairSets:
    """Sampled disconnected pairs (s0) and all connected pairs (s1)."""

    s0: np.ndarray  # (K0, 2) int64, i < j
    s1: np.ndarray  # (M, 2) int64, i < j


@dataclass(frozen=True)
class TransformPlan:
    s0_flip: np.ndarray
    s0_keep: np.ndarray
    s1_flip: np.ndarray
    s1_keep: np.ndarray
    rate: float


@dataclass(frozen=True)
class TransformedGraph:
    transformed: Graph
    delta_pairs: np.ndarray  # (K, 2) int64, i < j
    delta_signs: np.ndarray  # (K,) int64 in {-1, +1}


@dataclass(frozen=True)
class LabeledPairs:
    pairs: np.ndarray  # (P, 2) int64, sorted by (i, j)
    labels: np.ndarray  # (P,) int64 in {0, 1, 2, 3}


def _pair_keys(pairs: np.ndarray, num_nodes: int) -> np.ndarray:
    return pairs[:, 0] * np.int64(num_nodes) + pairs[:, 1]


def _empty_pairs() -> np.ndarray:
    return np.empty((0, 2), dtype=np.int64)


def _enumerate_disconnected(graph: Graph) -> np.ndarray:
    """All non-edges (i < j); only used when the graph is at least half dense."""
    out = []
    n = graph.num_nodes
    for i in range(n - 1):
        nbrs = graph.neighbors(i)
        nbrs = nbrs[nbrs > i]
        candidates = np.setdiff1d(np.arange(i + 1, n, dtype=np.int64), nbrs)
        for j in candidates:
            out.append((i, j))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def sample_non_edges(
    graph: Graph,
    count: int,
    rng: np.random.Generator,
    exclude: np.ndarray | None = None,
) -> np.ndarray:
    """Uniform sample of ``count`` disconnected pairs, without replacement.

    ``exclude`` (canonical pairs) is treated as additionally forbidden.
    Rejection-samples against the edge set; falls back to full enumeration
    when the request covers every available pair.
    """
    n = graph.num_nodes
    if n < 2:
        raise DataError("pair sampling needs at least 2 nodes")
    forbidden = _pair_keys(graph.edges, n)
    if exclude is not None and exclude.shape[0]:
        forbidden = np.concatenate([forbidden, _pair_keys(exclude, n)])
    forbidden = np.unique(forbidden)
    available = n * (n - 1) // 2 - forbidden.shape[0]
    if count > available:
        raise DataError(
            f"requested {count} disconnected pairs but only {available} exist"
        )
    if count == available:
        keys = np.setdiff1d(
            _all_pair_keys(n), forbidden, assume_unique=True
        )
        return np.stack([keys // n, keys % n], axis=1).astype(np.int64)

    chosen: set[int] = set()
    picked = np.empty((count, 2), dtype=np.int64)
    have = 0
    while have < count:
        batch = max(2 * (count - have), 64)
        u = rng.integers(0, n, size=batch)
        v = rng.integers(0, n, size=batch)
        lo = np.minimum(u, v)
        hi = np.maximum(u, v)
        ok = lo != hi
        lo, hi = lo[ok], hi[ok]
        keys = lo * np.int64(n) + hi
        bad = np.zeros(keys.shape[0], dtype=bool)
        if forbidden.shape[0]:
            pos = np.searchsorted(forbidden, keys)
            inside = pos < forbidden.shape[0]
            bad[inside] = forbidden[pos[inside]] == keys[inside]
        for idx in np.nonzero(~bad)[0]:
            key = int(keys[idx])
            if key in chosen:
                continue
            chosen.add(key)
            picked[have, 0] = lo[idx]
            picked[have, 1] = hi[idx]
            have += 1
            if have == count:
                break
    return picked


def _all_pair_keys(n: int) -> np.ndarray:
    """Keys of every canonical pair (i < j); only for enumeration fallbacks."""
    i, j = np.triu_indices(n, k=1)
    return i.astype(np.int64) * n + j


def sample_pairs(graph: Graph, rng: np.random.Generator) -> PairSets:
    """All M edges plus up to M disconnected pairs drawn uniformly.

    Disconnected pairs are rejection-sampled without replacement; when fewer
    than M disconnected pairs exist, all of them are taken.
    """
    n = graph.num_nodes
    if n < 2:
        raise DataError("pair sampling needs at least 2 nodes")
    m = graph.num_edges
    num_disconnected = n * (n - 1) // 2 - m
    target = min(m, num_disconnected)
    s0 = sample_non_edges(graph, target, rng)
    return PairSets(s0, graph.edges.copy())


def _split_one(pairs: np.ndarray, r: float, rng: np.random.Generator):
    size = pairs.shape[0]
    n_flip = int(np.floor(r * size + 0.5))
    perm = rng.permutation(size)
    return pairs[perm[:n_flip]], pairs[perm[n_flip:]]


def split_pairs(pairs: PairSets, r: float, rng: np.random.Generator) -> TransformPlan:
    """Uniform disjoint flip/keep split of each set at rate r."""
    if not 0.0 <= r <= 1.0:
        raise DataError(f"perturbation rate must be in [0, 1], got {r}")
    s0_flip, s0_keep = _split_one(pairs.s0, r, rng)
    s1_flip, s1_keep = _split_one(pairs.s1, r, rng)
    return TransformPlan(s0_flip, s0_keep, s1_flip, s1_keep, r)


def _check_membership(plan: TransformPlan, graph: Graph) -> None:
    n = graph.num_nodes
    edge_keys = np.sort(_pair_keys(graph.edges, n))

    def is_edge(pairs):
        if pairs.shape[0] == 0:
            return np.zeros(0, dtype=bool)
        keys = _pair_keys(pairs, n)
        pos = np.searchsorted(edge_keys, keys)
        inside = pos < len(edge_keys)
        hit = np.zeros(len(keys), dtype=bool)
        hit[inside] = edge_keys[pos[inside]] == keys[inside]
        return hit

    for name, pairs, want_edge in (
        ("s0_flip", plan.s0_flip, False),
        ("s0_keep", plan.s0_keep, False),
        ("s1_flip", plan.s1_flip, True),
        ("s1_keep", plan.s1_keep, True),
    ):
        if pairs.shape[0] and not (is_edge(pairs) == want_edge).all():
            raise DataError(f"plan set {name} references pairs outside s0/s1")


def apply_transform(graph: Graph, plan: TransformPlan) -> TransformedGraph:
    """Flip connectivity on the plan's flip sets (XOR with the edge set)."""
    _check_membership(plan, graph)
    n = graph.num_nodes
    edge_keys = _pair_keys(graph.edges, n)
    remove_keys = _pair_keys(plan.s1_flip, n)
    kept = ~np.isin(edge_keys, remove_keys, assume_unique=True)
    new_edges = np.concatenate([graph.edges[kept], plan.s0_flip], axis=0)
    order = np.lexsort((new_edges[:, 1], new_edges[:, 0]))
    transformed = _graph_from_canonical_edges(n, new_edges[order])

    delta_pairs = np.concatenate([plan.s0_flip, plan.s1_flip], axis=0)
    delta_signs = np.concatenate(
        [
            np.ones(plan.s0_flip.shape[0], dtype=np.int64),
            -np.ones(plan.s1_flip.shape[0], dtype=np.int64),
        ]
    )
    return TransformedGraph(transformed, delta_pairs, delta_signs)


def transform_labels(plan: TransformPlan) -> LabeledPairs:
    """Every sampled pair once, with its class, sorted by (i, j)."""
    pairs = np.concatenate(
        [plan.s0_flip, plan.s1_flip, plan.s0_keep, plan.s1_keep], axis=0
    )
    labels = np.concatenate(
        [
            np.full(plan.s0_flip.shape[0], ADD, dtype=np.int64),
            np.full(plan.s1_flip.shape[0], REMOVE, dtype=np.int64),
            np.full(plan.s0_keep.shape[0], KEEP_DISCONNECTED, dtype=np.int64),
            np.full(plan.s1_keep.shape[0], KEEP_CONNECTED, dtype=np.int64),
        ]
    )
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return LabeledPairs(pairs[order], labels[order])


def write_labeled_pairs(path, labeled: LabeledPairs) -> None:
    """Audit dump, one 'i,j,label' line per pair."""
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j), lab in zip(labeled.pairs, labeled.labels):
            fh.write(f"{i},{j},{lab}\n")
