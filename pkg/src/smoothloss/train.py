"""End-to-end training: epochs over stratified mini-batches, a fresh
similarity graph per batch, optimizer steps on the stepped schedule,
progress probes, checkpointing and NDJSON metric logging.

Everything is deterministic given the config seed: parameter init, batch
order and the evaluation probe all derive from it, so rerunning a config
reproduces the run log byte-for-byte (the wall_time_s field excepted).
"""

import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff, evaluate, losses, model, optim
from .data import BatchPlan, make_batches
from .model import MlpConfig
from .optim import OptimConfig

LOSS_KINDS = ("graph_smoothness", "cross_entropy")
DIVERGENCE_CAP = 1e8
PROBE_REFERENCE_CAP = 1000


class DivergenceError(RuntimeError):
    """Training produced a non-finite or runaway loss/parameter."""


class ConfigError(ValueError):
    """Invalid or inconsistent training configuration."""


@dataclass
class TrainConfig:
    loss_kind: str = "graph_smoothness"
    k: object = "max"  # int, or "max" for batch_size - 1
    alpha: float = 2.0
    d: int = None      # output dimension; defaults to the class count
    epochs: int = 200
    batch_size: int = 100
    optim: OptimConfig = field(default_factory=OptimConfig)
    model: MlpConfig = None
    seed: int = 0
    eval_every: int = 10

    def resolved(self, num_classes):
        """Fill dataset-dependent defaults and validate; returns a copy."""
        cfg = replace(self)
        if cfg.d is None:
            cfg.d = num_classes
        if cfg.loss_kind not in LOSS_KINDS:
            raise ConfigError(f"loss_kind must be one of {LOSS_KINDS}, "
                              f"got {cfg.loss_kind!r}")
        if cfg.model is None:
            raise ConfigError("model config is required")
        if cfg.model.output_dim != cfg.d:
            raise ConfigError(f"model output_dim {cfg.model.output_dim} "
                              f"!= d {cfg.d}")
        if cfg.loss_kind == "cross_entropy":
            if cfg.d != num_classes:
                raise ConfigError("cross_entropy requires d == num_classes "
                                  f"(d={cfg.d}, C={num_classes})")
            if cfg.model.head != "identity":
                raise ConfigError("cross_entropy requires the identity head")
        else:
            if cfg.model.head not in ("l2_normalize", "batch_norm"):
                raise ConfigError("graph_smoothness requires the "
                                  "l2_normalize or batch_norm head")
        if cfg.k != "max":
            k = int(cfg.k)
            if not 1 <= k <= cfg.batch_size - 1:
                raise ConfigError(f"k must satisfy 1 <= k <= batch_size-1 "
                                  f"({cfg.batch_size - 1}), got {k}")
            cfg.k = k
        if cfg.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if cfg.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")
        if cfg.eval_every < 1:
            raise ConfigError("eval_every must be >= 1")
        cfg.model.validate()
        cfg.optim.validate()
        return cfg


@dataclass
class RunLog:
    """Per-epoch records (epoch, lr, mean train loss, probe accuracy, time)."""

    records: list = field(default_factory=list)

    def append(self, record, sink=None):
        self.records.append(record)
        if sink is not None:
            sink.write(json.dumps(record, sort_keys=True) + "\n")
            sink.flush()


def _probe_accuracy(params, cfg, train_ds, eval_ds):
    """1-NN accuracy against a capped train-split reference (fast progress probe).

    The cross-entropy twin is probed with its own classifier (argmax).
    """
    if cfg.loss_kind == "cross_entropy":
        logits = embed(params, eval_ds)
        return evaluate.accuracy(evaluate.argmax_predict(logits),
                                 eval_ds.labels)
    cap = min(PROBE_REFERENCE_CAP, train_ds.n)
    index = evaluate.EmbeddingIndex(
        embeddings=embed(params, train_ds, rows=cap),
        labels=train_ds.labels[:cap],
        num_classes=train_ds.num_classes)
    queries = embed(params, eval_ds)
    return evaluate.accuracy(evaluate.knn_predict(index, queries, k=1),
                             eval_ds.labels)


def train(config, train_ds, eval_ds, out_dir=None, log_sink=None,
          batch_callback=None):
    """Train a model per the config; returns (params, run_log).

    One similarity graph per mini-batch for the smoothness loss; optimizer
    steps use lr_at(epoch).  Checkpoints go to ``out_dir/checkpoint.npz``
    at every probe point and at the end when ``out_dir`` is given.  A
    non-finite or runaway loss (or non-finite parameter) aborts with a
    DivergenceError naming the epoch and batch.  ``batch_callback``
    receives (epoch, batch_index, loss_value) after each step.
    """
    cfg = config.resolved(train_ds.num_classes)
    params = model.init(cfg.model)
    trainables = params.trainable()
    state = optim.OptimState(trainables)
    decay_mask = None
    if not cfg.optim.decay_all_params:
        decay_mask = [any(t is w for w in params.weights) for t in trainables]
    plan = BatchPlan(seed=cfg.seed, batch_size=cfg.batch_size,
                     stratified=cfg.loss_kind == "graph_smoothness")
    run_log = RunLog()
    meta = {"loss_kind": cfg.loss_kind, "k": cfg.k, "alpha": cfg.alpha,
            "seed": cfg.seed}

    def checkpoint():
        if out_dir is not None:
            model.save_checkpoint(f"{out_dir}/checkpoint.npz", params, meta)

    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        lr = optim.lr_at(cfg.optim, epoch)
        batch_losses = []
        for b, (xb, yb) in enumerate(make_batches(train_ds, plan, epoch)):
            out = model.forward(params, xb, training=True)
            if cfg.loss_kind == "graph_smoothness":
                k_eff = cfg.k if cfg.k != "max" else len(yb) - 1
                k_eff = min(k_eff, len(yb) - 1)  # short final batch
                lv = losses.graph_smoothness_loss(out, yb, k_eff, cfg.alpha)
            else:
                lv = losses.cross_entropy_loss(out, yb)
            loss = float(lv.value.data)
            if not np.isfinite(loss) or loss > DIVERGENCE_CAP:
                raise DivergenceError(f"loss diverged at epoch {epoch} "
                                      f"batch {b}: {loss}")
            autodiff.zero_grads(trainables)
            autodiff.backward(lv.value)
            if cfg.optim.kind == "sgd_nesterov":
                optim.sgd_step(trainables, state, lr, cfg.optim.momentum,
                               cfg.optim.weight_decay, decay_mask)
            else:
                optim.adam_step(trainables, state, lr, cfg.optim.adam_betas,
                                cfg.optim.adam_eps, cfg.optim.weight_decay,
                                decay_mask)
            if not params.all_finite():
                raise DivergenceError(f"non-finite parameters after epoch "
                                      f"{epoch} batch {b}")
            batch_losses.append(loss)
            if batch_callback is not None:
                batch_callback(epoch, b, lv)
        probe = None
        if (epoch + 1) % cfg.eval_every == 0 or epoch == cfg.epochs - 1:
            probe = _probe_accuracy(params, cfg, train_ds, eval_ds)
            checkpoint()
        run_log.append({"schema": "run_log.v1",
                        "epoch": epoch,
                        "lr": lr,
                        "train_loss": float(np.mean(batch_losses)),
                        "eval_accuracy": probe,
                        "wall_time_s": time.perf_counter() - t0},
                       sink=log_sink)
    checkpoint()
    return params, run_log


def embed(params, ds, batch_size=256, rows=None):
    """Evaluation-mode embeddings of a dataset (or its first ``rows`` rows)."""
    x = ds.inputs if rows is None else ds.inputs[:rows]
    if x.shape[1] != params.config.input_dim:
        raise ValueError(f"dataset width {x.shape[1]} != model input_dim "
                         f"{params.config.input_dim}")
    chunks = [model.forward(params, x[i:i + batch_size], training=False).data
              for i in range(0, x.shape[0], batch_size)]
    return np.vstack(chunks)
