"""Dataset files, synthetic generation, and split construction."""

import numpy as np
import pytest

from topolearn.data_io import (
    Dataset,
    SbmSpec,
    SplitMasks,
    drifting_sbm,
    generate_sbm,
    link_split,
    load_citation_dataset,
    load_graph_collection,
    save_dataset,
    save_graph_collection,
    synthetic_graph_collection,
)
from topolearn.errors import DataError
from topolearn.graph_core import build_graph


def test_generate_sbm_forced_edges():
    # p_in=1, p_out=0, two blocks of three: two disjoint triangles
    ds = generate_sbm(SbmSpec(2, 3, 1.0, 0.0, 4), np.random.default_rng(0))
    assert ds.graph.num_edges == 2 * 3
    blocks = ds.labels
    for i, j in ds.graph.edges:
        assert blocks[i] == blocks[j]


def test_generate_sbm_edge_count_within_binomial_bounds():
    # 3 blocks x 100: mean 1785, sigma ~40.4 from the exact binomial split
    ds = generate_sbm(SbmSpec(3, 100, 0.1, 0.01, 16), np.random.default_rng(1))
    n_intra = 3 * (100 * 99 // 2)
    n_inter = 3 * 100 * 100
    mean = n_intra * 0.1 + n_inter * 0.01
    sigma = np.sqrt(n_intra * 0.1 * 0.9 + n_inter * 0.01 * 0.99)
    assert abs(ds.graph.num_edges - mean) <= 3 * sigma


def test_generate_sbm_deterministic():
    a = generate_sbm(SbmSpec(2, 10, 0.3, 0.05, 4), np.random.default_rng(7))
    b = generate_sbm(SbmSpec(2, 10, 0.3, 0.05, 4), np.random.default_rng(7))
    np.testing.assert_array_equal(a.graph.edges, b.graph.edges)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.masks.train, b.masks.train)


def test_generate_sbm_split_sizes():
    ds = generate_sbm(SbmSpec(2, 25, 0.2, 0.05, 4), np.random.default_rng(2))
    assert ds.masks.train.size == 30
    assert ds.masks.val.size == 10
    assert ds.masks.test.size == 10
    ds.masks.validate(50)


def test_generate_sbm_rejects_bad_probs():
    with pytest.raises(DataError, match="p_out <= p_in"):
        generate_sbm(SbmSpec(2, 5, 0.1, 0.5, 4), np.random.default_rng(0))


def test_dataset_roundtrip(tmp_path):
    ds = generate_sbm(SbmSpec(2, 12, 0.3, 0.05, 5), np.random.default_rng(3))
    save_dataset(tmp_path / "ds", ds)
    loaded = load_citation_dataset(tmp_path / "ds")
    np.testing.assert_array_equal(loaded.graph.edges, ds.graph.edges)
    np.testing.assert_array_equal(loaded.features, ds.features)  # repr round-trips
    np.testing.assert_array_equal(loaded.labels, ds.labels)
    np.testing.assert_array_equal(loaded.masks.train, ds.masks.train)
    np.testing.assert_array_equal(loaded.masks.test, ds.masks.test)


def test_loader_reports_counts(tmp_path):
    ds = generate_sbm(SbmSpec(2, 10, 0.4, 0.1, 3), np.random.default_rng(4))
    save_dataset(tmp_path / "ds", ds)
    loaded = load_citation_dataset(tmp_path / "ds")
    assert loaded.graph.num_nodes == 20
    assert loaded.features.shape == (20, 3)
    assert loaded.num_classes == 2


def test_loader_rejects_nan_features(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n")
    (d / "features.txt").write_text("2 2\n0.0 1.0\nnan 2.0\n")
    with pytest.raises(DataError, match="NaN or Inf"):
        load_citation_dataset(d)


def test_loader_rejects_malformed_feature_line(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n")
    (d / "features.txt").write_text("2 2\n0.0 1.0\n2.0\n")
    with pytest.raises(DataError, match=r"features.txt:3"):
        load_citation_dataset(d)


def test_loader_rejects_inconsistent_node_count(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    (d / "edges.txt").write_text("0 5\n")
    (d / "features.txt").write_text("2 1\n0.0\n1.0\n")
    with pytest.raises(DataError, match="features has 2 rows"):
        load_citation_dataset(d)


def test_loader_rejects_missing_label(tmp_path):
    d = tmp_path / "ds"
    d.mkdir()
    (d / "edges.txt").write_text("0 1\n")
    (d / "features.txt").write_text("3 1\n0.0\n1.0\n2.0\n")
    (d / "labels.txt").write_text("0 1\n1 0\n")
    with pytest.raises(DataError, match="node 2 has no label"):
        load_citation_dataset(d)


def test_split_masks_validation():
    with pytest.raises(DataError, match="overlap"):
        SplitMasks(np.array([0, 1]), np.array([1]), np.array([2])).validate(5)
    with pytest.raises(DataError, match="out of range"):
        SplitMasks(np.array([0]), np.array([1]), np.array([9])).validate(5)
    with pytest.raises(DataError, match="non-empty"):
        SplitMasks(np.array([], dtype=np.int64), np.array([0]), np.array([1])).validate(5)


def test_link_split_sizes_and_partition():
    rng = np.random.default_rng(5)
    edges = [(i, j) for i in range(20) for j in range(i + 1, 20)][:100]
    g = build_graph(edges, 20)
    assert g.num_edges == 100
    split = link_split(g, rng)
    assert split.test_edges.shape[0] == 10
    assert split.val_edges.shape[0] == 5
    assert split.train_edges.shape[0] == 85
    def keys(pairs):
        return {(int(i), int(j)) for i, j in pairs}
    union = keys(split.train_edges) | keys(split.val_edges) | keys(split.test_edges)
    assert union == keys(g.edges)
    assert not keys(split.train_edges) & keys(split.val_edges)
    assert not keys(split.train_edges) & keys(split.test_edges)
    assert not keys(split.val_edges) & keys(split.test_edges)


def test_link_split_negatives_disjoint_from_edges():
    rng = np.random.default_rng(6)
    ds = generate_sbm(SbmSpec(2, 20, 0.3, 0.1, 4), rng)
    split = link_split(ds.graph, rng)
    edge_set = {(int(i), int(j)) for i, j in ds.graph.edges}
    neg = [(int(i), int(j)) for i, j in np.concatenate([split.val_neg, split.test_neg])]
    assert not set(neg) & edge_set
    assert len(set(neg)) == len(neg)  # no duplicates across val/test negatives
    assert split.test_neg.shape[0] == split.test_edges.shape[0]
    assert split.val_neg.shape[0] == split.val_edges.shape[0]


def test_link_split_rejects_tiny_graph():
    g = build_graph([(0, 1), (1, 2)], 4)
    with pytest.raises(DataError, match="at least 20"):
        link_split(g, np.random.default_rng(0))


def test_graph_collection_roundtrip(tmp_path):
    rng = np.random.default_rng(7)
    graphs, feats, labels = synthetic_graph_collection(rng, graphs_per_class=3, nodes=8, feature_dim=2)
    save_graph_collection(tmp_path / "col", graphs, feats, labels)
    g2, f2, l2 = load_graph_collection(tmp_path / "col")
    assert len(g2) == len(graphs)
    np.testing.assert_array_equal(l2, labels)
    for a, b in zip(graphs, g2):
        np.testing.assert_array_equal(a.edges, b.edges)
    for a, b in zip(feats, f2):
        np.testing.assert_array_equal(a, b)


def test_graph_collection_label_count_mismatch(tmp_path):
    rng = np.random.default_rng(8)
    graphs, feats, labels = synthetic_graph_collection(rng, graphs_per_class=2, nodes=6, feature_dim=2)
    save_graph_collection(tmp_path / "col", graphs, feats, labels)
    (tmp_path / "col" / "graph_labels.txt").write_text("0\n1\n")
    with pytest.raises(DataError, match="graph labels"):
        load_graph_collection(tmp_path / "col")


def test_drifting_sbm_flip_budget():
    rng = np.random.default_rng(9)
    ds, drifted = drifting_sbm(SbmSpec(2, 30, 0.2, 0.02, 4), 0.1, rng)
    m = ds.graph.num_edges
    before = {(int(i), int(j)) for i, j in ds.graph.edges}
    after = {(int(i), int(j)) for i, j in drifted.edges}
    removed = before - after
    added = after - before
    assert len(removed) == int(np.floor(0.1 * m + 0.5))
    # adds come from the sampled disconnected pool, same rounding rule
    total = ds.graph.num_nodes * (ds.graph.num_nodes - 1) // 2
    s0 = min(m, total - m)
    assert len(added) == int(np.floor(0.1 * s0 + 0.5))
