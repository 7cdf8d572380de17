"""Command-line entry point.

Exit codes: 0 ok, 2 usage error, 3 data error, 4 numerical failure.
Every run writes metrics.json (with the fully resolved config and seed)
under --out; training runs add history.jsonl and checkpoint.bin.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data_io, evaluate, transform
from .errors import DataError, NumericalError
from .graph_core import build_graph
from .model import load_checkpoint, save_checkpoint
from .training import (
    TrainConfig,
    count_parameters,
    evaluate_type_accuracy,
    forward_loss,
    grad_check,
    init_model,
    pretrain,
    pretrain_collection,
    sample_epoch,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p, rate):
    p.add_argument("--rate", type=float, default=rate, help="edge perturbation rate")
    p.add_argument("--order", type=int, default=2, help="propagation order k")
    p.add_argument("--channels", type=int, default=512, help="output channels F")
    p.add_argument("--lr", type=float, default=1e-4, help="Adam learning rate")
    p.add_argument("--epochs", type=int, default=500, help="max training epochs")
    p.add_argument("--patience", type=int, default=20, help="early stopping patience")
    p.add_argument("--seed", type=int, default=0, help="rng seed")
    p.add_argument(
        "--encoder", choices=("sgc", "gcn", "gin"), default="sgc", help="encoder family"
    )
    p.add_argument("--hidden", type=int, default=32, help="hidden width (gcn/gin)")
    p.add_argument("--num-layers", type=int, default=2, help="stack depth (gcn/gin)")
    p.add_argument(
        "--slope", type=float, default=0.1, help="LeakyReLU negative slope"
    )
    p.add_argument("--out", required=True, help="output directory")


def _add_data_source(p):
    p.add_argument("--dataset", default=None, help="dataset directory")
    p.add_argument("--sbm-blocks", type=int, default=None)
    p.add_argument("--sbm-block-size", type=int, default=None)
    p.add_argument("--sbm-p-in", type=float, default=None)
    p.add_argument("--sbm-p-out", type=float, default=None)
    p.add_argument("--sbm-dim", type=int, default=None)
    p.add_argument("--sbm-shift", type=float, default=None)


_SBM_DEFAULTS = dict(blocks=3, block_size=100, p_in=0.1, p_out=0.01, dim=16, shift=1.0)


def _sbm_spec_from_args(args) -> data_io.SbmSpec:
    return data_io.SbmSpec(
        num_blocks=args.sbm_blocks or _SBM_DEFAULTS["blocks"],
        block_size=args.sbm_block_size or _SBM_DEFAULTS["block_size"],
        p_in=args.sbm_p_in if args.sbm_p_in is not None else _SBM_DEFAULTS["p_in"],
        p_out=args.sbm_p_out if args.sbm_p_out is not None else _SBM_DEFAULTS["p_out"],
        feature_dim=args.sbm_dim or _SBM_DEFAULTS["dim"],
        feature_shift=(
            args.sbm_shift if args.sbm_shift is not None else _SBM_DEFAULTS["shift"]
        ),
    )


def _resolve_dataset(args, rng) -> data_io.Dataset:
    sbm_given = any(
        getattr(args, name) is not None
        for name in (
            "sbm_blocks",
            "sbm_block_size",
            "sbm_p_in",
            "sbm_p_out",
            "sbm_dim",
            "sbm_shift",
        )
    )
    if args.dataset is not None and sbm_given:
        raise UsageError("--dataset and --sbm-* flags are mutually exclusive")
    if args.dataset is not None:
        return data_io.load_citation_dataset(args.dataset)
    return data_io.generate_sbm(_sbm_spec_from_args(args), rng)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        rate=args.rate,
        order=args.order,
        channels=args.channels,
        lr=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
        encoder=args.encoder,
        hidden=args.hidden,
        num_layers=args.num_layers,
        negative_slope=args.slope,
    )


def _config_dict(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_metrics(out_dir, payload: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_history(out_dir, history) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "history.jsonl"), "w", encoding="utf-8") as fh:
        for entry in history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")


def _cmd_pretrain(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = _resolve_dataset(args, rng)
    config = _train_config(args)
    model, history = pretrain(config, dataset.graph, dataset.features, rng)
    accuracy = evaluate_type_accuracy(
        model, dataset.graph, dataset.features, config.rate, rng
    )
    if args.dump_plan:
        _, labeled = sample_epoch(dataset.graph, config.rate, rng)
        os.makedirs(args.out, exist_ok=True)
        transform.write_labeled_pairs(os.path.join(args.out, "plan.csv"), labeled)
    _write_history(args.out, history)
    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), model)
    _write_metrics(
        args.out,
        {
            "task": "pretrain",
            "seed": args.seed,
            "accuracy": accuracy,
            "loss": history[-1]["loss"] if history else None,
            "epochs_run": len(history),
            "config": _config_dict(args),
        },
    )
    print(f"pretrain: epochs={len(history)} type_acc={accuracy:.4f}")
    return 0


def _encode_frozen(model, dataset):
    from .encoder import encoder_forward
    from .graph_core import normalized_adjacency

    s_hat = normalized_adjacency(dataset.graph)
    return encoder_forward(model.encoder, dataset.graph, s_hat, dataset.features)


def _cmd_probe(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = _resolve_dataset(args, rng)
    if dataset.labels is None or dataset.masks is None:
        raise DataError("probe needs a dataset with labels and split masks")
    config = _train_config(args)
    model = init_model(config, dataset.features.shape[1], np.random.default_rng(args.seed))
    if not args.random_init:
        if args.checkpoint is None:
            raise UsageError("probe needs --checkpoint or --random-init")
        model = load_checkpoint(args.checkpoint, model)
    h = _encode_frozen(model, dataset)
    h_eval = None
    if args.noise_level > 0:
        noisy = evaluate.inject_noise(
            dataset.features, args.noise_kind, args.noise_level, rng
        )
        h_eval = _encode_frozen(model, data_io.Dataset(dataset.graph, noisy))
    probe_cfg = evaluate.ProbeConfig(epochs=args.probe_epochs, lr=args.probe_lr)
    accuracy = evaluate.linear_probe(h, dataset.labels, dataset.masks, probe_cfg, h_eval)
    _write_metrics(
        args.out,
        {
            "task": "probe",
            "seed": args.seed,
            "accuracy": accuracy,
            "config": _config_dict(args),
        },
    )
    print(f"probe: accuracy={accuracy:.4f}")
    return 0


def _cmd_graphclass(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.dataset is not None:
        graphs, features, labels = data_io.load_graph_collection(args.dataset)
    else:
        graphs, features, labels = data_io.synthetic_graph_collection(rng)
    config = _train_config(args)
    config.encoder = "gin"
    model, history = pretrain_collection(
        config, graphs, features, rng, batch_size=args.batch_size
    )
    from .encoder import encoder_forward

    pooled = np.stack(
        [
            evaluate.global_add_pool(
                encoder_forward(model.encoder, g, None, x),
                np.zeros(g.num_nodes, dtype=np.int64),
            )[0]
            for g, x in zip(graphs, features)
        ]
    )
    n_graphs = len(graphs)
    perm = rng.permutation(n_graphs)
    n_train = int(np.floor(0.6 * n_graphs + 0.5))
    n_val = int(np.floor(0.2 * n_graphs + 0.5))
    masks = data_io.SplitMasks(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train : n_train + n_val]),
        np.sort(perm[n_train + n_val :]),
    )
    probe_cfg = evaluate.ProbeConfig(epochs=args.probe_epochs, lr=args.probe_lr)
    accuracy = evaluate.linear_probe(pooled, labels, masks, probe_cfg)
    _write_history(args.out, history)
    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), model)
    _write_metrics(
        args.out,
        {
            "task": "graphclass",
            "seed": args.seed,
            "accuracy": accuracy,
            "config": _config_dict(args),
        },
    )
    print(f"graphclass: accuracy={accuracy:.4f}")
    return 0


def _cmd_linkpred(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = _resolve_dataset(args, rng)
    split = data_io.link_split(dataset.graph, rng)
    train_graph = build_graph(split.train_edges, dataset.graph.num_nodes)
    config = _train_config(args)
    model = init_model(config, dataset.features.shape[1], rng)
    if args.pretrain_epochs > 0:
        pre_cfg = _train_config(args)
        pre_cfg.max_epochs = args.pretrain_epochs
        model, _ = pretrain(pre_cfg, train_graph, dataset.features, rng, model=model)
    model, history = evaluate.fine_tune_link(
        model,
        train_graph,
        dataset.features,
        split.train_edges,
        args.finetune_epochs,
        args.finetune_lr,
        rng,
    )
    h = _encode_frozen(model, data_io.Dataset(train_graph, dataset.features))
    metrics = {}
    for name, pos, neg in (
        ("val", split.val_edges, split.val_neg),
        ("test", split.test_edges, split.test_neg),
    ):
        # Rank on raw inner products: same order as the sigmoid scores but
        # immune to float saturation collapsing large logits into ties.
        scores = np.concatenate(
            [evaluate.inner_products(h, pos), evaluate.inner_products(h, neg)]
        )
        y = np.concatenate([np.ones(pos.shape[0]), np.zeros(neg.shape[0])])
        rm = evaluate.ranking_metrics(scores, y.astype(np.int64))
        metrics[name] = rm
    _write_history(args.out, history)
    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), model)
    _write_metrics(
        args.out,
        {
            "task": "linkpred",
            "seed": args.seed,
            "auc": metrics["test"].auc,
            "ap": metrics["test"].ap,
            "val_auc": metrics["val"].auc,
            "val_ap": metrics["val"].ap,
            "config": _config_dict(args),
        },
    )
    print(f"linkpred: auc={metrics['test'].auc:.4f} ap={metrics['test'].ap:.4f}")
    return 0


def _cmd_temporal(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.dataset is not None:
        graphs, features_list, _ = data_io.load_graph_collection(args.dataset)
        if len(graphs) < 2:
            raise DataError("temporal task needs at least two snapshots")
        snapshots = graphs
        x = features_list[0]
    else:
        sbm_dataset, drifted = data_io.drifting_sbm(
            _sbm_spec_from_args(args), args.drift, rng
        )
        snapshots = [sbm_dataset.graph, drifted]
        x = sbm_dataset.features
    config = _train_config(args)
    model = init_model(config, x.shape[1], rng)
    from .training import AdamState, adam_step, backward

    state = AdamState(lr=config.lr)
    history = []
    for epoch in range(config.max_epochs):
        epoch_loss = 0.0
        hits = 0.0
        total = 0
        for t in range(1, len(snapshots)):
            prev, nxt = snapshots[t - 1], snapshots[t]
            _, _, labeled = evaluate.temporal_delta(prev, nxt, rng)
            loss, grads, probs = backward(model, prev, nxt, x, labeled)
            adam_step(model, grads, state)
            epoch_loss += loss * labeled.pairs.shape[0]
            hits += float((probs.argmax(axis=1) == labeled.labels).sum())
            total += labeled.pairs.shape[0]
        history.append(
            {
                "epoch": epoch,
                "loss": epoch_loss / max(total, 1),
                "type_acc": hits / max(total, 1),
            }
        )
    prev = snapshots[-2]
    target = snapshots[-1]
    h = _encode_frozen(model, data_io.Dataset(prev, x))
    neg = transform.sample_non_edges(target, target.num_edges, rng)
    scores = np.concatenate(
        [evaluate.inner_products(h, target.edges), evaluate.inner_products(h, neg)]
    )
    y = np.concatenate([np.ones(target.num_edges), np.zeros(neg.shape[0])])
    rm = evaluate.ranking_metrics(scores, y.astype(np.int64))
    _write_history(args.out, history)
    save_checkpoint(os.path.join(args.out, "checkpoint.bin"), model)
    _write_metrics(
        args.out,
        {
            "task": "temporal",
            "seed": args.seed,
            "auc": rm.auc,
            "ap": rm.ap,
            "config": _config_dict(args),
        },
    )
    print(f"temporal: auc={rm.auc:.4f} ap={rm.ap:.4f}")
    return 0


def _cmd_equivariance(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = _resolve_dataset(args, rng)
    config = _train_config(args)
    config.encoder = "sgc"
    config.order = 1
    model, _ = pretrain(config, dataset.graph, dataset.features, rng)
    tg, labeled = sample_epoch(dataset.graph, config.rate, rng)
    _, probs = forward_loss(model, dataset.graph, tg.transformed, dataset.features, labeled)
    predicted = probs.argmax(axis=1)
    est_add = labeled.pairs[predicted == transform.ADD]
    est_rem = labeled.pairs[predicted == transform.REMOVE]
    est_pairs = np.concatenate([est_add, est_rem], axis=0)
    est_signs = np.concatenate(
        [
            np.ones(est_add.shape[0], dtype=np.int64),
            -np.ones(est_rem.shape[0], dtype=np.int64),
        ]
    )
    report_est = evaluate.equivariance_report(
        model.encoder,
        dataset.graph,
        tg.transformed,
        dataset.features,
        est_pairs,
        est_signs,
        out_dir=args.out,
    )
    report_true = evaluate.equivariance_report(
        model.encoder,
        dataset.graph,
        tg.transformed,
        dataset.features,
        tg.delta_pairs,
        tg.delta_signs,
    )
    type_acc = float((predicted == labeled.labels).mean())
    _write_metrics(
        args.out,
        {
            "task": "equivariance",
            "seed": args.seed,
            "residual_estimated": report_est["residual"],
            "residual_true": report_true["residual"],
            "type_accuracy": type_acc,
            "config": _config_dict(args),
        },
    )
    print(
        "equivariance: residual_est="
        f"{report_est['residual']:.4f} residual_true={report_true['residual']:.4f}"
    )
    return 0


GRADCHECK_TOL = 1e-5


def _cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    spec = data_io.SbmSpec(
        num_blocks=2,
        block_size=max(args.nodes // 2, 2),
        p_in=0.4,
        p_out=0.15,
        feature_dim=args.features_dim,
    )
    dataset = data_io.generate_sbm(spec, rng)
    tg, labeled = sample_epoch(dataset.graph, 0.5, rng)
    configs = [
        ("sgc-k1", TrainConfig(encoder="sgc", order=1, channels=args.channels)),
        ("sgc-k2", TrainConfig(encoder="sgc", order=2, channels=args.channels)),
        (
            "gcn-2layer",
            TrainConfig(
                encoder="gcn", channels=args.channels, hidden=args.channels, num_layers=2
            ),
        ),
        (
            "gin-1layer",
            TrainConfig(
                encoder="gin", channels=args.channels, hidden=args.channels, num_layers=1
            ),
        ),
    ]
    worst = 0.0
    per_encoder = {}
    for name, config in configs:
        model = init_model(config, args.features_dim, rng)
        err = grad_check(
            model, dataset.graph, tg.transformed, dataset.features, labeled, h=args.step
        )
        per_encoder[name] = err
        worst = max(worst, err)
        print(f"gradcheck[{name}]: max_rel_error={err:.3e}")
    _write_metrics(
        args.out,
        {
            "task": "gradcheck",
            "seed": args.seed,
            "max_rel_error": worst,
            "per_encoder": per_encoder,
            "config": _config_dict(args),
        },
    )
    print(f"gradcheck: max_rel_error={worst:.3e} tol={GRADCHECK_TOL:.0e}")
    if worst >= GRADCHECK_TOL:
        raise NumericalError(
            f"gradient check failed: {worst:.3e} >= {GRADCHECK_TOL:.0e}"
        )
    return 0


def _cmd_paramcount(args) -> int:
    config = TrainConfig(channels=args.channels_out, order=args.order)
    model = init_model(config, args.channels_in, np.random.default_rng(0))
    count = count_parameters(model)
    if args.out is not None:
        _write_metrics(
            args.out,
            {
                "task": "paramcount",
                "seed": 0,
                "parameter_count": count,
                "config": _config_dict(args),
            },
        )
    print(count)
    return 0


def _cmd_gen_sbm(args) -> int:
    rng = np.random.default_rng(args.seed)
    dataset = data_io.generate_sbm(_sbm_spec_from_args(args), rng)
    data_io.save_dataset(args.out, dataset)
    _write_metrics(
        args.out,
        {
            "task": "gen-sbm",
            "seed": args.seed,
            "num_nodes": dataset.graph.num_nodes,
            "num_edges": dataset.graph.num_edges,
            "config": _config_dict(args),
        },
    )
    print(f"gen-sbm: n={dataset.graph.num_nodes} m={dataset.graph.num_edges}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topolearn", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)

    def sub(name, help_text):
        return subparsers.add_parser(
            name,
            help=help_text,
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    p = sub("pretrain", "self-supervised pretraining")
    _add_common(p, rate=0.7)
    _add_data_source(p)
    p.add_argument(
        "--dump-plan", action="store_true",
        help="write a sampled plan as plan.csv (i,j,label lines) for audit",
    )
    p.set_defaults(func=_cmd_pretrain)

    p = sub("probe", "linear-probe node classification")
    _add_common(p, rate=0.7)
    _add_data_source(p)
    p.add_argument("--checkpoint", default=None, help="checkpoint to probe")
    p.add_argument(
        "--random-init", action="store_true", help="probe an untrained encoder"
    )
    p.add_argument("--probe-epochs", type=int, default=300)
    p.add_argument("--probe-lr", type=float, default=0.05)
    p.add_argument(
        "--noise-kind", choices=("gaussian", "laplace"), default="gaussian"
    )
    p.add_argument("--noise-level", type=float, default=0.0)
    p.set_defaults(func=_cmd_probe)

    p = sub("graphclass", "graph classification via pooled probe")
    _add_common(p, rate=0.5)
    p.add_argument("--dataset", default=None, help="graph collection directory")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--probe-epochs", type=int, default=300)
    p.add_argument("--probe-lr", type=float, default=0.05)
    p.set_defaults(func=_cmd_graphclass)

    p = sub("linkpred", "static link prediction")
    _add_common(p, rate=0.5)
    _add_data_source(p)
    p.add_argument("--pretrain-epochs", type=int, default=200)
    p.add_argument("--finetune-epochs", type=int, default=100)
    p.add_argument("--finetune-lr", type=float, default=0.01)
    p.set_defaults(func=_cmd_linkpred)

    p = sub("temporal", "temporal link prediction")
    _add_common(p, rate=0.5)
    p.add_argument("--dataset", default=None, help="time-ordered collection")
    p.add_argument("--sbm-blocks", type=int, default=None)
    p.add_argument("--sbm-block-size", type=int, default=None)
    p.add_argument("--sbm-p-in", type=float, default=None)
    p.add_argument("--sbm-p-out", type=float, default=None)
    p.add_argument("--sbm-dim", type=int, default=None)
    p.add_argument("--sbm-shift", type=float, default=None)
    p.add_argument("--drift", type=float, default=0.1, help="snapshot flip rate")
    p.set_defaults(func=_cmd_temporal)

    p = sub("equivariance", "equivariance residual report")
    _add_common(p, rate=0.5)
    _add_data_source(p)
    p.set_defaults(func=_cmd_equivariance)

    p = sub("gradcheck", "finite-difference gradient check")
    p.add_argument("--nodes", type=int, default=20)
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--features-dim", type=int, default=6)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub("paramcount", "parameter count for a configuration")
    p.add_argument("--channels-in", type=int, required=True)
    p.add_argument("--channels-out", type=int, required=True)
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_paramcount)

    p = sub("gen-sbm", "generate a synthetic block-model dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--sbm-blocks", type=int, default=None)
    p.add_argument("--sbm-block-size", type=int, default=None)
    p.add_argument("--sbm-p-in", type=float, default=None)
    p.add_argument("--sbm-p-out", type=float, default=None)
    p.add_argument("--sbm-dim", type=int, default=None)
    p.add_argument("--sbm-shift", type=float, default=None)
    p.set_defaults(func=_cmd_gen_sbm)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as err:
        print(f"error: usage: {err}", file=sys.stderr)
        return 2
    except (DataError, OSError) as err:
        print(f"error: data: {err}", file=sys.stderr)
        return 3
    except NumericalError as err:
        print(f"error: numeric: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
