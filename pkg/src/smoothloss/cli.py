"""Command-line front end: train, eval, sweep, corrupt-eval, embed.

Configuration comes from flags and/or a flat key-value config file
(``--config``): one ``key = value`` per line, ``#`` starts a comment, keys
are the long option names with dashes replaced by underscores (e.g.
``batch_size = 100``, ``hidden = 64,64``, ``k = max``).  Precedence is
explicit flags > config file > built-in defaults.

Machine-readable outputs are NDJSON (one JSON object per line, each with a
versioned ``schema`` field; schemas live under ``schemas/`` in the repo)
or CSV for embeddings.  Outputs are deterministic given config + seed; the
only field that varies between identical runs is ``wall_time_s``.

Exit codes: 0 success, 1 runtime failure (divergence, unreadable files),
2 usage or configuration error.  ``SMOOTHLOSS_THREADS`` caps how many
sweep points run in parallel worker processes (default: serial).
"""

import argparse
import concurrent.futures
import json
import os
import sys
import time

import numpy as np

from . import data, evaluate, model
from .evaluate import EmbeddingIndex
from .model import MlpConfig
from .optim import OptimConfig
from .train import ConfigError, DivergenceError, TrainConfig, embed, train

HEAD_ALIASES = {"l2": "l2_normalize", "bn": "batch_norm",
                "identity": "identity"}
LOSS_ALIASES = {"smooth": "graph_smoothness", "ce": "cross_entropy"}

DATASET_DEFAULTS = {
    "dataset": "blobs",
    "classes": 3,
    "per_class": 100,
    "test_per_class": 100,
    "dim": 8,
    "spread": 0.5,
    "center_scale": 3.0,
    "clusters_per_class": 2,
    "per_cluster": 50,
    "test_per_cluster": 50,
    "label_column": "label",
    "train_path": None,
    "test_path": None,
    "train_images": None,
    "train_labels": None,
    "test_images": None,
    "test_labels": None,
}

TRAIN_DEFAULTS = {
    **DATASET_DEFAULTS,
    "loss": "smooth",
    "k": "max",
    "alpha": 2.0,
    "d": None,
    "epochs": 200,
    "batch_size": 100,
    "hidden": [64, 64],
    "head": None,
    "optim": "sgd",
    "lr": None,
    "momentum": 0.9,
    "weight_decay": 1e-4,
    "milestones": [100, 150],
    "gamma": 0.1,
    "eval_every": 10,
    "seed": 0,
}


def _parse_int_list(text):
    text = text.strip()
    if not text:
        return []
    return [int(v) for v in text.split(",")]


def _parse_k(text):
    text = str(text).strip()
    return "max" if text == "max" else int(text)


CONVERTERS = {
    "classes": int, "per_class": int, "test_per_class": int, "dim": int,
    "spread": float, "center_scale": float, "clusters_per_class": int,
    "per_cluster": int, "test_per_cluster": int,
    "loss": str, "k": _parse_k, "alpha": float, "d": int, "epochs": int,
    "batch_size": int, "hidden": _parse_int_list, "head": str, "optim": str,
    "lr": float, "momentum": float, "weight_decay": float,
    "milestones": _parse_int_list, "gamma": float, "eval_every": int,
    "seed": int, "dataset": str, "label_column": str,
    "train_path": str, "test_path": str, "train_images": str,
    "train_labels": str, "test_images": str, "test_labels": str,
    "axis": str, "values": str, "knn": int, "split": str,
    "checkpoint": str, "baseline": str,
}


def _read_config_file(path):
    """Parse the flat key = value config grammar."""
    settings = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = line.split("=", 1)
                key = key.strip().replace("-", "_")
                if key not in CONVERTERS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    settings[key] = CONVERTERS[key](value.strip())
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return settings


def _merge(defaults, args):
    """defaults < config file < explicit flags; returns a plain namespace."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_settings = _read_config_file(args.config)
        merged.update({k: v for k, v in file_settings.items()
                       if k in merged})
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return argparse.Namespace(**merged)


def _add_dataset_args(p):
    p.add_argument("--dataset", choices=["blobs", "multicluster", "csv", "idx"])
    p.add_argument("--classes", type=int)
    p.add_argument("--per-class", type=int, dest="per_class")
    p.add_argument("--test-per-class", type=int, dest="test_per_class")
    p.add_argument("--dim", type=int)
    p.add_argument("--spread", type=float)
    p.add_argument("--center-scale", type=float, dest="center_scale")
    p.add_argument("--clusters-per-class", type=int, dest="clusters_per_class")
    p.add_argument("--per-cluster", type=int, dest="per_cluster")
    p.add_argument("--test-per-cluster", type=int, dest="test_per_cluster")
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--train-path", dest="train_path")
    p.add_argument("--test-path", dest="test_path")
    p.add_argument("--train-images", dest="train_images")
    p.add_argument("--train-labels", dest="train_labels")
    p.add_argument("--test-images", dest="test_images")
    p.add_argument("--test-labels", dest="test_labels")


def _add_train_args(p):
    p.add_argument("--loss", choices=["smooth", "ce"])
    p.add_argument("--k", type=_parse_k)
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int, dest="batch_size")
    p.add_argument("--hidden", type=_parse_int_list)
    p.add_argument("--head", choices=sorted(HEAD_ALIASES))
    p.add_argument("--optim", choices=["sgd", "adam"])
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float, dest="weight_decay")
    p.add_argument("--milestones", type=_parse_int_list)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eval-every", type=int, dest="eval_every")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="smoothloss",
        description="Train and evaluate MLP embeddings with the graph "
                    "smoothness loss or its cross-entropy twin.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = dict(config=("--config", "path to a flat key=value config file"),
                  seed=("--seed", "base random seed"),
                  out=("--out", "output directory"))

    def new_cmd(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help=common["config"][1])
        p.add_argument("--seed", type=int, help=common["seed"][1])
        p.add_argument("--out", required=True, help=common["out"][1])
        return p

    p = new_cmd("train", "train one model and log metrics")
    _add_dataset_args(p)
    _add_train_args(p)

    p = new_cmd("eval", "clean-test evaluation of a checkpoint")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--knn", type=int, help="k for the k-NN classifier")

    p = new_cmd("sweep", "train/eval once per hyperparameter value")
    _add_dataset_args(p)
    _add_train_args(p)
    p.add_argument("--axis", choices=["k", "d", "alpha"], required=True)
    p.add_argument("--values", required=True,
                   help="comma list, e.g. 1,2,5,max (k) or 0.5,2,100 (alpha)")

    p = new_cmd("corrupt-eval", "corruption grid + MCE for a checkpoint pair")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True, help="method checkpoint")
    p.add_argument("--baseline", required=True, help="baseline checkpoint")
    p.add_argument("--knn", type=int, help="k for the k-NN classifier")

    p = new_cmd("embed", "dump embeddings of a split as plot-ready CSV")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "test"], default="train")

    return parser


def _make_datasets(ns):
    """Build (train, test) splits per the dataset flags, standardized."""
    seed = ns.seed
    if ns.dataset == "blobs":
        tr = data.gen_blobs(ns.classes, ns.per_class, ns.dim, ns.spread,
                            (seed, 0), ns.center_scale, split="train")
        te = data.gen_blobs(ns.classes, ns.test_per_class, ns.dim, ns.spread,
                            (seed, 1), ns.center_scale, split="test")
    elif ns.dataset == "multicluster":
        tr = data.gen_multicluster(ns.classes, ns.clusters_per_class,
                                   ns.per_cluster, ns.dim, ns.spread,
                                   (seed, 0), ns.center_scale, split="train")
        te = data.gen_multicluster(ns.classes, ns.clusters_per_class,
                                   ns.test_per_cluster, ns.dim, ns.spread,
                                   (seed, 1), ns.center_scale, split="test")
    elif ns.dataset == "csv":
        if not ns.train_path or not ns.test_path:
            raise ConfigError("csv dataset needs --train-path and --test-path")
        tr = data.load_csv(ns.train_path, ns.label_column, split="train")
        te = data.load_csv(ns.test_path, ns.label_column,
                           num_classes=tr.num_classes, split="test")
    else:
        paths = [ns.train_images, ns.train_labels, ns.test_images,
                 ns.test_labels]
        if not all(paths):
            raise ConfigError("idx dataset needs --train-images/--train-labels"
                              "/--test-images/--test-labels")
        tr = data.load_idx(ns.train_images, ns.train_labels, split="train")
        te = data.load_idx(ns.test_images, ns.test_labels,
                           num_classes=tr.num_classes, split="test")
    tr, te, _ = data.standardize(tr, te)
    return tr, te


def _train_config(ns, num_classes, input_dim):
    loss_kind = LOSS_ALIASES[ns.loss]
    d = ns.d if ns.d is not None else num_classes
    head = HEAD_ALIASES[ns.head] if ns.head else (
        "identity" if loss_kind == "cross_entropy" else "l2_normalize")
    lr = ns.lr if ns.lr is not None else (0.1 if ns.optim == "sgd" else 0.001)
    optim_cfg = OptimConfig(
        kind="sgd_nesterov" if ns.optim == "sgd" else "adam",
        lr0=lr, momentum=ns.momentum, weight_decay=ns.weight_decay,
        milestones=list(ns.milestones), gamma=ns.gamma)
    mlp = MlpConfig(input_dim=input_dim, hidden_dims=list(ns.hidden),
                    output_dim=d, head=head, seed=ns.seed)
    return TrainConfig(loss_kind=loss_kind, k=ns.k, alpha=ns.alpha, d=d,
                       epochs=ns.epochs, batch_size=ns.batch_size,
                       optim=optim_cfg, model=mlp, seed=ns.seed,
                       eval_every=ns.eval_every)


def _write_record(path, record, mode="a"):
    with open(path, mode, encoding="utf-8") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def _final_metrics(params, loss_kind, train_ds, test_ds):
    """Full-protocol evaluation: 1-NN and 10-NN over the complete train
    reference, plus the loss-appropriate headline classifier."""
    ref = embed(params, train_ds)
    queries = embed(params, test_ds)
    index = EmbeddingIndex(embeddings=ref, labels=train_ds.labels,
                           num_classes=train_ds.num_classes)
    acc = {f"test_accuracy_{k}nn": evaluate.accuracy(
               evaluate.knn_predict(index, queries, min(k, train_ds.n)),
               test_ds.labels)
           for k in (1, 10)}
    if loss_kind == "cross_entropy":
        headline = evaluate.accuracy(evaluate.argmax_predict(queries),
                                     test_ds.labels)
        classifier = "argmax"
    else:
        headline = acc["test_accuracy_10nn"]
        classifier = "10nn"
    return {"classifier": classifier, "test_accuracy": headline,
            "test_error": 1.0 - headline, **acc}


def cmd_train(ns, out_dir):
    train_ds, test_ds = _make_datasets(ns)
    cfg = _train_config(ns, train_ds.num_classes, train_ds.input_dim)
    resolved = cfg.resolved(train_ds.num_classes)  # fail fast
    t0 = time.perf_counter()
    metrics_path = os.path.join(out_dir, "metrics.ndjson")
    with open(metrics_path, "w", encoding="utf-8") as sink:
        params, _ = train(cfg, train_ds, test_ds, out_dir=out_dir,
                          log_sink=sink)
    record = {"schema": "final_metrics.v1",
              "loss": resolved.loss_kind,
              "seed": ns.seed,
              "wall_time_s": time.perf_counter() - t0,
              **_final_metrics(params, resolved.loss_kind,
                               train_ds, test_ds)}
    _write_record(metrics_path, record)
    print(f"trained {record['loss']}: test accuracy "
          f"{record['test_accuracy']:.4f} ({record['classifier']})")
    return 0


def _load_checkpoint_model(path):
    try:
        params, meta = model.load_checkpoint(path)
    except (OSError, ValueError, KeyError) as exc:
        raise RuntimeError(f"cannot load checkpoint {path}: {exc}") from None
    return params, (meta or {})


def _checkpoint_predictor(params, meta, train_ds, knn_k):
    """Classifier for a checkpoint: argmax for a cross-entropy model,
    k-NN over clean train-split embeddings otherwise."""
    if meta.get("loss_kind") == "cross_entropy" or \
            params.config.head == "identity":
        return lambda x: evaluate.argmax_predict(
            model.forward(params, x, training=False).data), "argmax"
    index = EmbeddingIndex(
        embeddings=embed(params, train_ds),
        labels=train_ds.labels, num_classes=train_ds.num_classes)
    k = min(knn_k, train_ds.n)

    def predict(x):
        return evaluate.knn_predict(index, _embed_matrix(params, x), k)
    return predict, f"{k}nn"


def _embed_matrix(params, x, batch_size=256):
    x = np.asarray(x, dtype=np.float64)
    return np.vstack([model.forward(params, x[i:i + batch_size],
                                    training=False).data
                      for i in range(0, x.shape[0], batch_size)])


def cmd_eval(ns, out_dir):
    train_ds, test_ds = _make_datasets(ns)
    params, meta = _load_checkpoint_model(ns.checkpoint)
    if params.config.input_dim != train_ds.input_dim:
        raise RuntimeError(f"checkpoint expects input_dim "
                           f"{params.config.input_dim}, dataset has "
                           f"{train_ds.input_dim}")
    loss_kind = meta.get("loss_kind", "graph_smoothness")
    metrics = _final_metrics(params, loss_kind, train_ds, test_ds)
    record = {"schema": "eval_report.v1", "seed": ns.seed, **metrics}
    _write_record(os.path.join(out_dir, "eval.ndjson"), record, mode="w")
    print(f"clean test error {record['test_error']:.4f} "
          f"({record['classifier']})")
    return 0


def _sweep_point_config(ns, axis, value, num_classes, input_dim):
    """Per-axis protocol: the two non-swept hyperparameters are pinned
    (d = class count and alpha = 2 when sweeping k; k = max and alpha = 2
    when sweeping d; d = class count and k = max when sweeping alpha)."""
    point = argparse.Namespace(**vars(ns))
    point.loss = "smooth"
    if axis == "k":
        point.k = _parse_k(value)
        point.d = num_classes
        point.alpha = 2.0
    elif axis == "d":
        point.k = "max"
        point.d = int(value)
        point.alpha = 2.0
    else:
        point.k = "max"
        point.d = num_classes
        point.alpha = float(value)
    return _train_config(point, num_classes, input_dim)


def _run_sweep_point(payload):
    ns = argparse.Namespace(**payload["ns"])
    train_ds, test_ds = _make_datasets(ns)
    cfg = _sweep_point_config(ns, payload["axis"], payload["value"],
                              train_ds.num_classes, train_ds.input_dim)
    params, _ = train(cfg, train_ds, test_ds)
    metrics = _final_metrics(params, "graph_smoothness", train_ds, test_ds)
    value = payload["value"]
    value_out = value if value == "max" else (
        int(value) if payload["axis"] in ("k", "d") else float(value))
    return {"schema": "sweep_point.v1", "axis": payload["axis"],
            "value": value_out, "test_accuracy": metrics["test_accuracy_10nn"],
            "seed": ns.seed}


def cmd_sweep(ns, out_dir):
    values = [v.strip() for v in ns.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values must list at least one value")
    # validate every point before running any
    probe_tr, _ = _make_datasets(ns)
    for v in values:
        _sweep_point_config(ns, ns.axis, v, probe_tr.num_classes,
                            probe_tr.input_dim).resolved(probe_tr.num_classes)
    payloads = [{"ns": vars(ns), "axis": ns.axis, "value": v}
                for v in values]
    workers = int(os.environ.get("SMOOTHLOSS_THREADS", "1"))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=min(workers, len(payloads))) as pool:
            records = list(pool.map(_run_sweep_point, payloads))
    else:
        records = [_run_sweep_point(p) for p in payloads]
    sweep_path = os.path.join(out_dir, "sweep.ndjson")
    with open(sweep_path, "w", encoding="utf-8") as fh:
        for record in records:  # written in axis order: deterministic bytes
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    print(f"swept {ns.axis} over {len(values)} values -> {sweep_path}")
    return 0


def cmd_corrupt_eval(ns, out_dir):
    train_ds, test_ds = _make_datasets(ns)
    m_params, m_meta = _load_checkpoint_model(ns.checkpoint)
    b_params, b_meta = _load_checkpoint_model(ns.baseline)
    knn_k = ns.knn or 10
    m_predict, _ = _checkpoint_predictor(m_params, m_meta, train_ds, knn_k)
    b_predict, _ = _checkpoint_predictor(b_params, b_meta, train_ds, knn_k)
    clean_m = 1.0 - evaluate.accuracy(m_predict(test_ds.inputs),
                                      test_ds.labels)
    clean_b = 1.0 - evaluate.accuracy(b_predict(test_ds.inputs),
                                      test_ds.labels)
    grid_m = evaluate.corruption_grid(m_predict, test_ds.inputs,
                                      test_ds.labels, ns.seed)
    grid_b = evaluate.corruption_grid(b_predict, test_ds.inputs,
                                      test_ds.labels, ns.seed)
    mce_val, rel_mce = evaluate.mce(grid_m, grid_b, clean_m, clean_b)
    report = evaluate.RobustnessReport(
        clean_error_method=clean_m, clean_error_baseline=clean_b,
        method_errors=grid_m, baseline_errors=grid_b,
        mce=mce_val, relative_mce=rel_mce, seed=ns.seed)
    _write_record(os.path.join(out_dir, "robustness.ndjson"),
                  report.to_record(), mode="w")
    print(f"mce {mce_val:.2f}  relative mce {rel_mce:.2f}  "
          f"(clean error {clean_m:.4f} vs baseline {clean_b:.4f})")
    return 0


def cmd_embed(ns, out_dir):
    train_ds, test_ds = _make_datasets(ns)
    ds = train_ds if ns.split == "train" else test_ds
    params, _ = _load_checkpoint_model(ns.checkpoint)
    if params.config.input_dim != ds.input_dim:
        raise RuntimeError(f"checkpoint expects input_dim "
                           f"{params.config.input_dim}, dataset has "
                           f"{ds.input_dim}")
    emb = _embed_matrix(params, ds.inputs)
    path = os.path.join(out_dir, "embeddings.csv")
    d = emb.shape[1]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join([f"x_{i + 1}" for i in range(d)] + ["label"]) + "\n")
        for row, label in zip(emb, ds.labels):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{label}\n")
    print(f"wrote {emb.shape[0]} embeddings to {path}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        if command == "train":
            ns = _merge(TRAIN_DEFAULTS, args)
        elif command == "sweep":
            ns = _merge({**TRAIN_DEFAULTS, "axis": None, "values": None},
                        args)
        elif command in ("eval", "corrupt-eval"):
            ns = _merge({**DATASET_DEFAULTS, "seed": 0, "checkpoint": None,
                         "baseline": None, "knn": 10}, args)
        else:
            ns = _merge({**DATASET_DEFAULTS, "seed": 0, "checkpoint": None,
                         "split": "train"}, args)
        os.makedirs(args.out, exist_ok=True)
        handler = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep,
                   "corrupt-eval": cmd_corrupt_eval, "embed": cmd_embed}
        return handler[command](ns, args.out)
    except (ConfigError, data.ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, RuntimeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
