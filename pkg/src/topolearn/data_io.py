"""Dataset loading, synthetic graph generation, and split construction.

File formats (all plain text):
  edges.txt     one "u v" pair per line, 0-indexed, either orientation
  features.txt  first line "N C", then N lines of C reals
  labels.txt    one "node_id label_id" per line
  splits.json   {"train": [...], "val": [...], "test": [...]}
Graph collections are a directory with index.json ({"graphs": [subdir, ...]})
plus graph_labels.txt (one label per line, in index order); each subdirectory
holds the same per-graph files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph_core import Graph, build_graph, read_edge_list, write_edge_list
from .transform import sample_non_edges


@dataclass(frozen=True)
class SplitMasks:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, num_nodes: int) -> None:
        parts = [self.train, self.val, self.test]
        joined = np.concatenate(parts)
        if joined.size and (joined.min() < 0 or joined.max() >= num_nodes):
            raise DataError("split index out of range")
        if len(np.unique(joined)) != joined.size:
            raise DataError("split masks overlap")
        if self.train.size == 0:
            raise DataError("train mask must be non-empty")


@dataclass
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray | None = None
    masks: SplitMasks | None = None

    @property
    def num_classes(self) -> int:
        if self.labels is None:
            raise DataError("dataset has no labels")
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class SbmSpec:
    num_blocks: int
    block_size: int
    p_in: float
    p_out: float
    feature_dim: int
    feature_shift: float = 1.0

    def validate(self) -> None:
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise DataError(
                f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in} p_out={self.p_out}"
            )
        if self.num_blocks < 1 or self.block_size < 1 or self.feature_dim < 1:
            raise DataError("block count, block size and feature dim must be >= 1")


@dataclass(frozen=True)
class LinkSplit:
    train_edges: np.ndarray
    val_edges: np.ndarray
    test_edges: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray


def _parse_ints(parts, path, lineno, expect):
    if len(parts) != expect:
        raise DataError(f"{path}:{lineno}: expected {expect} fields, got {len(parts)}")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise DataError(f"{path}:{lineno}: non-integer field") from None


def load_features(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise DataError(f"{path}:1: missing 'N C' header")
        n, c = _parse_ints(header.split(), path, 1, 2)
        rows = np.empty((n, c), dtype=np.float64)
        for i in range(n):
            line = fh.readline()
            if not line:
                raise DataError(f"{path}:{i + 2}: expected {n} feature rows")
            parts = line.split()
            if len(parts) != c:
                raise DataError(
                    f"{path}:{i + 2}: expected {c} values, got {len(parts)}"
                )
            try:
                rows[i] = [float(p) for p in parts]
            except ValueError:
                raise DataError(f"{path}:{i + 2}: non-numeric feature") from None
    if not np.isfinite(rows).all():
        raise DataError(f"{path}: features contain NaN or Inf")
    return rows


def load_labels(path, num_nodes: int) -> np.ndarray:
    labels = np.full(num_nodes, -1, dtype=np.int64)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            node, lab = _parse_ints(stripped.split(), path, lineno, 2)
            if not 0 <= node < num_nodes:
                raise DataError(f"{path}:{lineno}: node {node} out of range")
            labels[node] = lab
    if (labels < 0).any():
        missing = int(np.nonzero(labels < 0)[0][0])
        raise DataError(f"{path}: node {missing} has no label")
    return labels


def load_splits(path, num_nodes: int) -> SplitMasks:
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    try:
        masks = SplitMasks(
            np.asarray(blob["train"], dtype=np.int64),
            np.asarray(blob["val"], dtype=np.int64),
            np.asarray(blob["test"], dtype=np.int64),
        )
    except KeyError as err:
        raise DataError(f"{path}: missing split key {err}") from None
    masks.validate(num_nodes)
    return masks


def load_citation_dataset(dir_path) -> Dataset:
    """Load edges/features/labels/splits from a dataset directory."""
    edges = read_edge_list(os.path.join(dir_path, "edges.txt"))
    features = load_features(os.path.join(dir_path, "features.txt"))
    n = features.shape[0]
    max_idx = max((max(u, v) for u, v in edges), default=-1)
    if max_idx >= n:
        raise DataError(
            f"{dir_path}: edges reference node {max_idx} but features has {n} rows"
        )
    graph = build_graph(edges, n)
    labels = None
    labels_path = os.path.join(dir_path, "labels.txt")
    if os.path.exists(labels_path):
        labels = load_labels(labels_path, n)
    masks = None
    splits_path = os.path.join(dir_path, "splits.json")
    if os.path.exists(splits_path):
        masks = load_splits(splits_path, n)
    return Dataset(graph, features, labels, masks)


def save_dataset(dir_path, dataset: Dataset) -> None:
    os.makedirs(dir_path, exist_ok=True)
    write_edge_list(os.path.join(dir_path, "edges.txt"), dataset.graph)
    x = dataset.features
    with open(os.path.join(dir_path, "features.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"{x.shape[0]} {x.shape[1]}\n")
        for row in x:
            # %.17g round-trips float64 exactly through the text format
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    if dataset.labels is not None:
        with open(os.path.join(dir_path, "labels.txt"), "w", encoding="utf-8") as fh:
            for node, lab in enumerate(dataset.labels):
                fh.write(f"{node} {lab}\n")
    if dataset.masks is not None:
        blob = {
            "train": dataset.masks.train.tolist(),
            "val": dataset.masks.val.tolist(),
            "test": dataset.masks.test.tolist(),
        }
        with open(os.path.join(dir_path, "splits.json"), "w", encoding="utf-8") as fh:
            json.dump(blob, fh)
            fh.write("\n")


def generate_sbm(spec: SbmSpec, rng: np.random.Generator) -> Dataset:
    """Block-structured random graph with mean-shifted Gaussian features.

    Labels are block ids; nodes get a 60/20/20 train/val/test split.
    """
    spec.validate()
    n = spec.num_blocks * spec.block_size
    blocks = np.repeat(np.arange(spec.num_blocks), spec.block_size)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(blocks[iu] == blocks[ju], spec.p_in, spec.p_out)
    mask = rng.random(iu.shape[0]) < prob
    edges = np.stack([iu[mask], ju[mask]], axis=1).astype(np.int64)
    graph = build_graph(edges, n)

    means = rng.normal(0.0, spec.feature_shift, size=(spec.num_blocks, spec.feature_dim))
    features = means[blocks] + rng.normal(0.0, 1.0, size=(n, spec.feature_dim))

    perm = rng.permutation(n)
    n_train = int(np.floor(0.6 * n + 0.5))
    n_val = int(np.floor(0.2 * n + 0.5))
    masks = SplitMasks(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train : n_train + n_val]),
        np.sort(perm[n_train + n_val :]),
    )
    return Dataset(graph, features, blocks.astype(np.int64), masks)


def drifting_sbm(
    spec: SbmSpec, flip_rate: float, rng: np.random.Generator
) -> tuple[Dataset, Graph]:
    """An SBM snapshot plus a drifted successor with ``flip_rate`` edge flips.

    The successor flips round(flip_rate * M) edges off and the same number
    of disconnected pairs on, so M stays roughly constant.
    """
    from .transform import apply_transform, sample_pairs, split_pairs

    dataset = generate_sbm(spec, rng)
    pairs = sample_pairs(dataset.graph, rng)
    plan = split_pairs(pairs, flip_rate, rng)
    drifted = apply_transform(dataset.graph, plan).transformed
    return dataset, drifted


def link_split(graph: Graph, rng: np.random.Generator) -> LinkSplit:
    """85/10/5 train/test/val edge partition with matched negatives.

    Negatives are disconnected pairs, disjoint from the edge set and from
    each other; each evaluation split gets as many negatives as positives.
    """
    m = graph.num_edges
    if m < 20:
        raise DataError(f"link split needs at least 20 edges, got {m}")
    n_test = int(np.floor(0.10 * m + 0.5))
    n_val = int(np.floor(0.05 * m + 0.5))
    perm = rng.permutation(m)
    test_edges = graph.edges[np.sort(perm[:n_test])]
    val_edges = graph.edges[np.sort(perm[n_test : n_test + n_val])]
    train_edges = graph.edges[np.sort(perm[n_test + n_val :])]
    test_neg = sample_non_edges(graph, n_test, rng)
    val_neg = sample_non_edges(graph, n_val, rng, exclude=test_neg)
    return LinkSplit(train_edges, val_edges, test_edges, val_neg, test_neg)


def load_graph_collection(dir_path):
    """Load an index.json collection: graphs, per-graph features, labels."""
    index_path = os.path.join(dir_path, "index.json")
    with open(index_path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if "graphs" not in blob:
        raise DataError(f"{index_path}: missing 'graphs' list")
    graphs = []
    features = []
    for sub in blob["graphs"]:
        ds = load_citation_dataset(os.path.join(dir_path, sub))
        graphs.append(ds.graph)
        features.append(ds.features)
    labels_path = os.path.join(dir_path, "graph_labels.txt")
    labels = []
    with open(labels_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                labels.append(int(stripped))
            except ValueError:
                raise DataError(
                    f"{labels_path}:{lineno}: non-integer label {stripped!r}"
                ) from None
    if len(labels) != len(graphs):
        raise DataError(
            f"{dir_path}: {len(graphs)} graphs but {len(labels)} graph labels"
        )
    return graphs, features, np.asarray(labels, dtype=np.int64)


def synthetic_graph_collection(
    rng: np.random.Generator,
    graphs_per_class: int = 20,
    nodes: int = 24,
    feature_dim: int = 4,
):
    """Two-class toy collection (sparse vs dense random graphs).

    Features are constant so only topology separates the classes.
    """
    graphs, features, labels = [], [], []
    iu, ju = np.triu_indices(nodes, k=1)
    for label, p in ((0, 0.1), (1, 0.3)):
        for _ in range(graphs_per_class):
            mask = rng.random(iu.shape[0]) < p
            edges = np.stack([iu[mask], ju[mask]], axis=1).astype(np.int64)
            graphs.append(build_graph(edges, nodes))
            features.append(np.ones((nodes, feature_dim)))
            labels.append(label)
    return graphs, features, np.asarray(labels, dtype=np.int64)


def save_graph_collection(dir_path, graphs, features, labels) -> None:
    os.makedirs(dir_path, exist_ok=True)
    names = [f"g{idx:04d}" for idx in range(len(graphs))]
    for name, graph, x in zip(names, graphs, features):
        save_dataset(os.path.join(dir_path, name), Dataset(graph, x))
    with open(os.path.join(dir_path, "index.json"), "w", encoding="utf-8") as fh:
        json.dump({"graphs": names}, fh)
        fh.write("\n")
    with open(os.path.join(dir_path, "graph_labels.txt"), "w", encoding="utf-8") as fh:
        for lab in labels:
            fh.write(f"{lab}\n")
