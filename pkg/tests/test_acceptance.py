"""Acceptance criteria, one test per criterion.

Each test prints one PASS/FAIL line (run with -s or -rA to see them all).
Criteria needing the Cora files are skipped unless TOPOLEARN_CORA_DIR or
./data/cora is present.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from topolearn import data_io, evaluate
from topolearn.encoder import encoder_forward
from topolearn.graph_core import build_graph, normalized_adjacency
from topolearn.model import copy_model
from topolearn.training import (
    AdamState,
    TrainConfig,
    adam_step,
    backward,
    count_parameters,
    evaluate_type_accuracy,
    grad_check,
    init_model,
    pretrain,
    sample_epoch,
)
from topolearn.transform import apply_transform, sample_pairs, split_pairs

# the shared desk-scale dataset: 3 blocks x 100 nodes, p_in 0.1, p_out 0.01,
# 16 feature channels (block mean shift 0.3, unit noise)
DESK_SBM = dict(num_blocks=3, block_size=100, p_in=0.1, p_out=0.01, feature_dim=16)


def note(criterion: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


def cora_dir():
    path = os.environ.get("TOPOLEARN_CORA_DIR", os.path.join("data", "cora"))
    return path if os.path.isdir(path) else None


def test_c01_parameter_count():
    model = init_model(
        TrainConfig(channels=512, order=2), 1433, np.random.default_rng(0)
    )
    count = count_parameters(model)
    assert note("C1 parameter count", count == 736_260, f"count={count}")


def test_c02_gradient_correctness():
    rng = np.random.default_rng(3)
    ds = data_io.generate_sbm(data_io.SbmSpec(2, 10, 0.4, 0.15, 6), rng)
    tg, labeled = sample_epoch(ds.graph, 0.5, rng)
    worst = 0.0
    for encoder, kw in (
        ("sgc", dict(order=1)),
        ("sgc", dict(order=2)),
        ("gcn", dict(hidden=8, num_layers=2)),
        ("gin", dict(hidden=8, num_layers=1)),
    ):
        model = init_model(TrainConfig(encoder=encoder, channels=8, **kw), 6, rng)
        err = grad_check(model, ds.graph, tg.transformed, ds.features, labeled, h=1e-5)
        worst = max(worst, err)
    assert note("C2 gradient correctness", worst < 1e-5, f"max_rel_error={worst:.2e}")


def test_c03_decomposition_identity():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(6, 25))
        iu, ju = np.triu_indices(n, k=1)
        mask = rng.random(iu.shape[0]) < 0.3
        g = build_graph(np.stack([iu[mask], ju[mask]], axis=1), n)
        if g.num_edges == 0:
            continue
        plan = split_pairs(sample_pairs(g, rng), float(rng.random()), rng)
        tg = apply_transform(g, plan)
        a = np.zeros((n, n))
        for i, j in g.edges:
            a[i, j] = a[j, i] = 1.0
        a_t = np.zeros((n, n))
        for i, j in tg.transformed.edges:
            a_t[i, j] = a_t[j, i] = 1.0
        d_t = (a_t + np.eye(n)).sum(axis=1)
        scale = np.outer(1.0 / np.sqrt(d_t), 1.0 / np.sqrt(d_t))
        lhs = scale * (a_t + np.eye(n))
        rhs = scale * (a + np.eye(n)) + scale * (a_t - a)
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
    assert note("C3 decomposition identity", worst <= 1e-12, f"max_rel_fro={worst:.2e}")


def test_c04_sampler_statistics():
    rng = np.random.default_rng(1)
    ds = data_io.generate_sbm(data_io.SbmSpec(2, 25, 0.25, 0.05, 4), rng)
    g = ds.graph
    a_original = np.zeros((50, 50))
    for i, j in g.edges:
        a_original[i, j] = a_original[j, i] = 1.0
    counts = np.zeros(4)
    structure_ok = True
    for _ in range(1000):
        plan = split_pairs(sample_pairs(g, rng), 0.5, rng)
        from topolearn.transform import transform_labels

        labeled = transform_labels(plan)
        counts += np.bincount(labeled.labels, minlength=4)
        tg = apply_transform(g, plan)
        a_t = np.zeros((50, 50))
        for i, j in tg.transformed.edges:
            structure_ok &= i < j
            a_t[i, j] = a_t[j, i] = 1.0
        structure_ok &= bool((a_t == a_t.T).all())
        structure_ok &= a_t.diagonal().sum() == 0
        structure_ok &= set(np.unique(a_t)) <= {0.0, 1.0}
        # applying the same flips again restores the original adjacency
        from topolearn.transform import TransformPlan

        back = TransformPlan(plan.s1_flip, plan.s0_keep, plan.s0_flip, plan.s1_keep, 0.5)
        restored = apply_transform(tg.transformed, back)
        a_r = np.zeros((50, 50))
        for i, j in restored.transformed.edges:
            a_r[i, j] = a_r[j, i] = 1.0
        structure_ok &= bool((a_r == a_original).all())
    proportions = counts / counts.sum()
    # r=0.5 over the four types: expected 0.25 each, tolerance two points
    prop_ok = bool((np.abs(proportions - 0.25) <= 0.02).all())
    assert note(
        "C4 sampler statistics",
        prop_ok and structure_ok,
        f"proportions={np.round(proportions, 4).tolist()} structure_ok={structure_ok}",
    )


def c5_dataset(seed=0, shift=0.3):
    rng = np.random.default_rng(seed)
    return data_io.generate_sbm(
        data_io.SbmSpec(**DESK_SBM, feature_shift=shift), rng
    )


C5_CONFIG = TrainConfig(
    rate=0.5,
    order=2,
    channels=256,
    lr=0.12,
    max_epochs=300,
    patience=300,
    seed=0,
    sgc_activation=True,
)


def test_c05_pretraining_sanity():
    ds = c5_dataset(seed=C5_CONFIG.seed)
    model, history = pretrain(C5_CONFIG, ds.graph, ds.features)
    final_loss = history[-1]["loss"]
    accuracy = evaluate_type_accuracy(
        model, ds.graph, ds.features, 0.5, np.random.default_rng(99)
    )
    loss_ok = final_loss < np.log(4.0)
    acc_ok = accuracy >= 0.50
    note("C5 pretraining sanity (loss < ln 4)", loss_ok, f"loss={final_loss:.4f}")
    note(
        "C5 pretraining sanity (type accuracy >= 0.50)",
        acc_ok,
        f"accuracy={accuracy:.4f} vs 0.25 chance",
    )
    assert loss_ok
    # Known shortfall: the faithful architecture plateaus near 0.45 on this
    # configuration; see the repository notes for the full analysis.
    assert acc_ok


def test_c06_probe_gap():
    gaps = []
    for seed in range(5):
        ds = c5_dataset(seed=seed)
        cfg = TrainConfig(
            rate=0.5, order=2, channels=4, lr=0.01,
            max_epochs=300, patience=300, seed=seed, sgc_activation=True,
        )
        model0 = init_model(cfg, 16, np.random.default_rng(seed))
        untrained = copy_model(model0)
        model, _ = pretrain(cfg, ds.graph, ds.features, np.random.default_rng(seed), model=model0)
        s_hat = normalized_adjacency(ds.graph)
        h_pre = encoder_forward(model.encoder, ds.graph, s_hat, ds.features)
        h_rnd = encoder_forward(untrained.encoder, ds.graph, s_hat, ds.features)
        acc_pre = evaluate.linear_probe(h_pre, ds.labels, ds.masks)
        acc_rnd = evaluate.linear_probe(h_rnd, ds.labels, ds.masks)
        gaps.append(acc_pre - acc_rnd)
    median_gap = float(np.median(gaps))
    ok = median_gap >= 0.05
    assert note(
        "C6 probe gap",
        ok,
        f"median_gap={median_gap:+.3f} gaps={[f'{g:+.3f}' for g in gaps]}",
    )


def test_c07_metric_oracles():
    rm = evaluate.ranking_metrics([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    hand_ok = abs(rm.auc - 0.75) < 1e-12 and abs(rm.ap - 5.0 / 6.0) < 1e-12

    def brute_auc(scores, labels):
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        wins = sum(
            1.0 if p > n else (0.5 if p == n else 0.0) for p in pos for n in neg
        )
        return wins / (len(pos) * len(neg))

    def brute_ap(scores, labels):
        order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
        hits, precisions = 0, []
        for rank, idx in enumerate(order, start=1):
            if labels[idx] == 1:
                hits += 1
                precisions.append(hits / rank)
        return float(np.mean(precisions))

    rng = np.random.default_rng(2)
    exact_ok = True
    for _ in range(100):
        n = int(rng.integers(2, 201))
        scores = np.round(rng.normal(size=n), 2)
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        rm = evaluate.ranking_metrics(scores, labels)
        exact_ok &= abs(rm.auc - brute_auc(scores, labels)) < 1e-12
        exact_ok &= abs(rm.ap - brute_ap(scores, labels)) < 1e-12
    assert note(
        "C7 metric oracles", hand_ok and exact_ok,
        f"hand_case_ok={hand_ok} brute_force_ok={exact_ok}",
    )


def _linkpred_auc(seed: int, warm: bool) -> float:
    rng = np.random.default_rng(seed)
    ds = data_io.generate_sbm(
        data_io.SbmSpec(3, 100, 0.05, 0.01, 16, feature_shift=0.3), rng
    )
    split = data_io.link_split(ds.graph, rng)
    train_graph = build_graph(split.train_edges, ds.graph.num_nodes)
    cfg = TrainConfig(
        rate=0.5, encoder="gcn", hidden=32, channels=16, num_layers=2,
        lr=1e-3, max_epochs=600, patience=10**9, seed=seed,
    )
    model = init_model(cfg, 16, np.random.default_rng(seed))
    rng_run = np.random.default_rng(seed + 1000)
    if warm:
        model, _ = pretrain(cfg, train_graph, ds.features, rng_run, model=model)
    model, _ = evaluate.fine_tune_link(
        model, train_graph, ds.features, split.train_edges, 100, 0.02, rng_run
    )
    h = encoder_forward(
        model.encoder, train_graph, normalized_adjacency(train_graph), ds.features
    )
    scores = np.concatenate(
        [
            evaluate.inner_products(h, split.test_edges),
            evaluate.inner_products(h, split.test_neg),
        ]
    )
    y = np.concatenate(
        [np.ones(split.test_edges.shape[0]), np.zeros(split.test_neg.shape[0])]
    ).astype(np.int64)
    return evaluate.ranking_metrics(scores, y).auc


def test_c08_link_prediction_improvement():
    gaps = []
    for seed in range(5):
        gaps.append(_linkpred_auc(seed, warm=True) - _linkpred_auc(seed, warm=False))
    median_gap = float(np.median(gaps))
    ok = median_gap >= 0.03
    assert note(
        "C8 link prediction improvement",
        ok,
        f"median_auc_gap={median_gap:+.3f} gaps={[f'{g:+.3f}' for g in gaps]}",
    )


def test_c08b_cora_link_prediction_soft_report():
    path = cora_dir()
    if path is None:
        pytest.skip("Cora dataset files not present")
    rng = np.random.default_rng(0)
    ds = data_io.load_citation_dataset(path)
    split = data_io.link_split(ds.graph, rng)
    train_graph = build_graph(split.train_edges, ds.graph.num_nodes)
    cfg = TrainConfig(
        rate=0.5, encoder="gcn", hidden=32, channels=16, num_layers=2,
        lr=1e-4, max_epochs=200, patience=10**9, seed=0,
    )
    model = init_model(cfg, ds.features.shape[1], np.random.default_rng(0))
    model, _ = pretrain(cfg, train_graph, ds.features, rng, model=model)
    model, _ = evaluate.fine_tune_link(
        model, train_graph, ds.features, split.train_edges, 200, 0.01, rng
    )
    h = encoder_forward(
        model.encoder, train_graph, normalized_adjacency(train_graph), ds.features
    )
    scores = np.concatenate(
        [
            evaluate.inner_products(h, split.test_edges),
            evaluate.inner_products(h, split.test_neg),
        ]
    )
    y = np.concatenate(
        [np.ones(split.test_edges.shape[0]), np.zeros(split.test_neg.shape[0])]
    ).astype(np.int64)
    auc = evaluate.ranking_metrics(scores, y).auc
    # soft target, reported but not gated
    note("C8 Cora soft report (AUC >= 0.90 target)", auc >= 0.90, f"auc={auc:.4f}")


def test_c09_temporal_protocol():
    seed = 0
    rng = np.random.default_rng(seed)
    ds, drifted = data_io.drifting_sbm(
        data_io.SbmSpec(3, 100, 0.1, 0.01, 16, feature_shift=1.0), 0.1, rng
    )
    x = ds.features
    cfg = TrainConfig(
        encoder="gcn", hidden=32, channels=32, num_layers=2,
        lr=1e-3, max_epochs=200, seed=seed,
    )
    model = init_model(cfg, x.shape[1], rng)
    state = AdamState(lr=cfg.lr)
    for _ in range(cfg.max_epochs):
        _, _, labeled = evaluate.temporal_delta(ds.graph, drifted, rng)
        _, grads, _ = backward(model, ds.graph, drifted, x, labeled)
        adam_step(model, grads, state)
    h = encoder_forward(model.encoder, ds.graph, normalized_adjacency(ds.graph), x)
    from topolearn.transform import sample_non_edges

    neg = sample_non_edges(drifted, drifted.num_edges, rng)
    scores = np.concatenate(
        [evaluate.inner_products(h, drifted.edges), evaluate.inner_products(h, neg)]
    )
    y = np.concatenate(
        [np.ones(drifted.num_edges), np.zeros(neg.shape[0])]
    ).astype(np.int64)
    auc = evaluate.ranking_metrics(scores, y).auc
    ok = auc >= 0.55
    assert note("C9 temporal protocol", ok, f"auc={auc:.4f} vs 0.5 no-skill")


def test_c10_determinism():
    import tempfile

    def rerun_bytes(subcommand_args, out):
        args = [sys.executable, "-m", "topolearn.cli"] + subcommand_args + ["--out", out]
        first = subprocess.run(args, capture_output=True)
        assert first.returncode == 0, first.stderr
        blob_a = open(os.path.join(out, "metrics.json"), "rb").read()
        second = subprocess.run(args, capture_output=True)
        assert second.returncode == 0, second.stderr
        blob_b = open(os.path.join(out, "metrics.json"), "rb").read()
        return blob_a, blob_b

    sbm = [
        "--sbm-blocks", "2", "--sbm-block-size", "12",
        "--sbm-p-in", "0.35", "--sbm-p-out", "0.05", "--sbm-dim", "4",
    ]
    with tempfile.TemporaryDirectory() as tmp:
        a1, b1 = rerun_bytes(
            ["pretrain", *sbm, "--channels", "6", "--lr", "0.01", "--epochs", "3",
             "--rate", "0.7", "--order", "2", "--seed", "1"],
            os.path.join(tmp, "pre"),
        )
        a2, b2 = rerun_bytes(
            ["gen-sbm", *sbm, "--seed", "4"], os.path.join(tmp, "gen")
        )
        ok = a1 == b1 and a2 == b2
        assert note(
            "C10 determinism", ok,
            f"pretrain_identical={a1 == b1} gen_sbm_identical={a2 == b2}",
        )


def test_c11_cora_node_classification():
    path = cora_dir()
    if path is None:
        pytest.skip("Cora dataset files not present")
    ds = data_io.load_citation_dataset(path)
    assert ds.graph.num_nodes == 2708
    assert ds.features.shape[1] == 1433
    cfg = TrainConfig(
        rate=0.7, order=2, channels=512, lr=1e-4,
        max_epochs=300, patience=20, seed=0, sgc_activation=True,
    )
    model, _ = pretrain(cfg, ds.graph, ds.features)
    h = encoder_forward(
        model.encoder, ds.graph, normalized_adjacency(ds.graph), ds.features
    )
    accuracy = evaluate.linear_probe(h, ds.labels, ds.masks)
    ok = accuracy >= 0.81
    assert note("C11 Cora node classification", ok, f"accuracy={accuracy:.4f}")
