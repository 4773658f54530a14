"""Configurable MLP embedding network with a selectable output head.

The body is a linear/ReLU stack; the head is one of

* ``l2_normalize`` — project onto the unit sphere, confining outputs to a
  compact set (the standard head for metric training),
* ``batch_norm``   — per-dimension normalization with running statistics
  (useful for 2-D embeddings, where L2 normalization would collapse the
  output space to a circle),
* ``identity``     — raw affine outputs (logits for the cross-entropy twin).

Checkpoint format (``save_checkpoint``/``load_checkpoint``): a .npz
container, key ``format_version`` = 1, key ``config_json`` = the MlpConfig
as a JSON string, keys ``w0``/``b0``..``w{L}``/``b{L}`` = per-layer weight
matrices and bias vectors, and for the batch_norm head ``bn_scale``,
``bn_shift``, ``bn_mean``, ``bn_var``.  An optional ``meta_json`` carries
caller metadata (e.g. which loss trained the model).  The layout is stable:
readers must reject any other ``format_version``.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import Tensor

HEADS = ("l2_normalize", "batch_norm", "identity")

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class MlpConfig:
    input_dim: int
    hidden_dims: list
    output_dim: int
    head: str = "l2_normalize"
    seed: int = 0

    def validate(self):
        dims = [self.input_dim, *self.hidden_dims, self.output_dim]
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all layer dims must be >= 1, got {dims}")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")


@dataclass
class ModelParams:
    """Trainable tensors plus the batch-norm running statistics."""

    config: MlpConfig
    weights: list
    biases: list
    bn_scale: Tensor = None
    bn_shift: Tensor = None
    bn_mean: np.ndarray = None
    bn_var: np.ndarray = None

    def trainable(self):
        params = [*self.weights, *self.biases]
        if self.bn_scale is not None:
            params += [self.bn_scale, self.bn_shift]
        return params

    def all_finite(self):
        return all(np.isfinite(p.data).all() for p in self.trainable())


def init(config):
    """He-initialized parameters: W ~ N(0, 2/fan_in), biases zero.

    Deterministic given config.seed (PCG64 stream).
    """
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    dims = [config.input_dim, *config.hidden_dims, config.output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        weights.append(Tensor(w))
        biases.append(Tensor(np.zeros(fan_out)))
    params = ModelParams(config=config, weights=weights, biases=biases)
    if config.head == "batch_norm":
        d = config.output_dim
        params.bn_scale = Tensor(np.ones(d))
        params.bn_shift = Tensor(np.zeros(d))
        params.bn_mean = np.zeros(d)
        params.bn_var = np.ones(d)
    return params


def forward(params, x, training=False):
    """Run the batch through the linear/ReLU stack and the output head.

    ``x`` may be a Tensor or a plain (n, input_dim) array.  The batch_norm
    head uses batch statistics when training, running statistics otherwise.
    """
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.data.ndim != 2 or x.data.shape[1] != params.config.input_dim:
        raise ValueError(f"input shape {x.data.shape} does not match "
                         f"input_dim={params.config.input_dim}")
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = autodiff.add_row_bias(autodiff.matmul(h, w), b)
        if i < last:
            h = autodiff.relu(h)
    head = params.config.head
    if head == "l2_normalize":
        return autodiff.l2_normalize_rows(h)
    if head == "batch_norm":
        return autodiff.batch_norm_rows(h, params.bn_scale, params.bn_shift,
                                        params.bn_mean, params.bn_var,
                                        training, BN_MOMENTUM, BN_EPS)
    return h


def save_checkpoint(path, params, meta=None):
    """Write parameters to ``path`` in the documented .npz layout."""
    arrays = {"format_version": np.int64(1),
              "config_json": np.array(json.dumps({
                  "input_dim": params.config.input_dim,
                  "hidden_dims": list(params.config.hidden_dims),
                  "output_dim": params.config.output_dim,
                  "head": params.config.head,
                  "seed": params.config.seed,
              }, sort_keys=True))}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"w{i}"] = w.data
        arrays[f"b{i}"] = b.data
    if params.bn_scale is not None:
        arrays["bn_scale"] = params.bn_scale.data
        arrays["bn_shift"] = params.bn_shift.data
        arrays["bn_mean"] = params.bn_mean
        arrays["bn_var"] = params.bn_var
    if meta is not None:
        arrays["meta_json"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Read a checkpoint written by ``save_checkpoint``; returns (params, meta)."""
    with np.load(path, allow_pickle=False) as npz:
        version = int(npz["format_version"])
        if version != 1:
            raise ValueError(f"unsupported checkpoint format_version {version}")
        cfg = json.loads(str(npz["config_json"]))
        config = MlpConfig(input_dim=cfg["input_dim"],
                           hidden_dims=list(cfg["hidden_dims"]),
                           output_dim=cfg["output_dim"],
                           head=cfg["head"], seed=cfg["seed"])
        n_layers = len(cfg["hidden_dims"]) + 1
        weights = [Tensor(npz[f"w{i}"]) for i in range(n_layers)]
        biases = [Tensor(npz[f"b{i}"]) for i in range(n_layers)]
        params = ModelParams(config=config, weights=weights, biases=biases)
        if "bn_scale" in npz:
            params.bn_scale = Tensor(npz["bn_scale"])
            params.bn_shift = Tensor(npz["bn_shift"])
            params.bn_mean = np.array(npz["bn_mean"])
            params.bn_var = np.array(npz["bn_var"])
        meta = json.loads(str(npz["meta_json"])) if "meta_json" in npz else None
    return params, meta
