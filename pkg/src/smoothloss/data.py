"""Datasets: synthetic generators, file ingestion, normalization, batching,
and a parametric corruption suite for robustness evaluation.

All randomness goes through numpy's PCG64 generator seeded explicitly, so
every dataset, batch order and corruption is bit-reproducible from its seed
(PCG64 is a fixed, documented algorithm, not a platform default).  Seeds
may be ints or tuples of ints (tuples derive independent streams, e.g.
``(seed, 0)`` for a train split and ``(seed, 1)`` for its test split).

File formats:

* CSV — header row, a ``label`` column (integer class ids), every other
  column a numeric feature; UTF-8, comma-separated.
* IDX — the standard big-endian containers: magic 0x00000803 for uint8
  image tensors, 0x00000801 for uint8 label vectors.  Pixels are scaled
  to [0, 1] on load.
"""

import csv
import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

CORRUPTION_KINDS = ("gaussian", "salt_pepper", "uniform")
GAUSSIAN_SIGMAS = (0.04, 0.08, 0.12, 0.16, 0.20)   # x feature std per severity
SALT_PEPPER_FRACTIONS = (0.01, 0.02, 0.03, 0.04, 0.05)
UNIFORM_HALF_WIDTHS = (0.07, 0.14, 0.21, 0.28, 0.35)  # x feature std


class ParseError(ValueError):
    """Malformed dataset file; the message names the offending location."""


def _rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


@dataclass
class Dataset:
    """Dense input matrix with integer labels and split metadata."""

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int
    split: str = "train"
    name: str = ""
    cluster_ids: np.ndarray = None  # generator metadata, when applicable

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels disagree on example count")
        if not np.isfinite(self.inputs).all():
            raise ValueError("inputs contain non-finite values")
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def input_dim(self):
        return self.inputs.shape[1]


@dataclass
class BatchPlan:
    """Deterministic batching policy: one permutation per (seed, epoch)."""

    seed: int
    batch_size: int
    stratified: bool = True


def _cluster_centers(count, dim, scale):
    """Deterministic well-spread arrangement of cluster centers.

    Orthogonal axes when the dimension allows (pairwise distance
    scale*sqrt(2), a simplex-like layout), a circle in the first two
    coordinates otherwise, equally spaced points on a line for dim 1.
    """
    centers = np.zeros((count, dim))
    if dim >= count:
        for t in range(count):
            centers[t, t] = scale
    elif dim >= 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        centers[:, 0] = scale * np.cos(angles)
        centers[:, 1] = scale * np.sin(angles)
    else:
        centers[:, 0] = scale * np.arange(count)
    return centers


def gen_multicluster(num_classes, clusters_per_class, per_cluster, dim,
                     spread, seed, center_scale=3.0, split="train"):
    """Classes made of spatially separated isotropic Gaussian clusters.

    Cluster t (t = 0..C*clusters_per_class-1) is centered on a deterministic
    arrangement and assigned to class t mod C, so neighboring centers carry
    different classes.  Cluster ids are kept as metadata so tests can check
    that training preserves within-class cluster structure.
    ``clusters_per_class=1`` is exactly ``gen_blobs``.
    """
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if clusters_per_class < 1 or per_cluster < 1:
        raise ValueError("clusters_per_class and per_cluster must be >= 1")
    total = num_classes * clusters_per_class
    centers = _cluster_centers(total, dim, center_scale)
    rng = _rng(seed)
    inputs, labels, cluster_ids = [], [], []
    for t in range(total):
        pts = centers[t] + spread * rng.standard_normal((per_cluster, dim))
        inputs.append(pts)
        labels.append(np.full(per_cluster, t % num_classes, dtype=np.int64))
        cluster_ids.append(np.full(per_cluster, t, dtype=np.int64))
    return Dataset(inputs=np.vstack(inputs), labels=np.concatenate(labels),
                   num_classes=num_classes, split=split, name="multicluster",
                   cluster_ids=np.concatenate(cluster_ids))


def gen_blobs(num_classes, per_class, dim, spread, seed, center_scale=3.0,
              split="train"):
    """One isotropic Gaussian cluster per class on a deterministic layout."""
    ds = gen_multicluster(num_classes, 1, per_class, dim, spread, seed,
                          center_scale=center_scale, split=split)
    ds.name = "blobs"
    return ds


def load_csv(path, label_column="label", num_classes=None, split="train"):
    """Load a CSV dataset (header row, integer ``label`` column, numeric features)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise ParseError(f"{path}: header has no {label_column!r} column "
                             f"(columns: {header})")
        label_idx = header.index(label_column)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} "
                                 f"fields, got {len(row)}")
            try:
                label = int(row[label_idx])
                feats = [float(row[i]) for i in feat_idx]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
            if not all(np.isfinite(feats)):
                raise ParseError(f"{path}:{lineno}: non-finite feature value")
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise ParseError(f"{path}: negative label {labels.min()}")
    c = num_classes if num_classes is not None else int(labels.max()) + 1
    if labels.max() >= c:
        raise ParseError(f"{path}: label {labels.max()} out of range for "
                         f"{c} classes")
    return Dataset(inputs=np.asarray(rows, dtype=np.float64), labels=labels,
                   num_classes=c, split=split, name=path)


def _read_exact(fh, count, path, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise ParseError(f"{path}: truncated {what}: expected {count} bytes, "
                         f"got {len(buf)}")
    return buf


def load_idx(images_path, labels_path, num_classes=None, split="train"):
    """Load the standard big-endian IDX image/label container pair."""
    with open(images_path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII",
                                             _read_exact(fh, 16, images_path,
                                                         "header"))
        if magic != IDX_IMAGE_MAGIC:
            raise ParseError(f"{images_path}: bad magic 0x{magic:08x}, "
                             f"expected 0x{IDX_IMAGE_MAGIC:08x}")
        raw = _read_exact(fh, n * rows * cols, images_path, "pixel data")
        images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    with open(labels_path, "rb") as fh:
        magic, n_labels = struct.unpack(">II",
                                        _read_exact(fh, 8, labels_path,
                                                    "header"))
        if magic != IDX_LABEL_MAGIC:
            raise ParseError(f"{labels_path}: bad magic 0x{magic:08x}, "
                             f"expected 0x{IDX_LABEL_MAGIC:08x}")
        raw = _read_exact(fh, n_labels, labels_path, "label data")
        labels = np.frombuffer(raw, dtype=np.uint8).astype(np.int64)
    if n_labels != n:
        raise ParseError(f"{labels_path}: {n_labels} labels for {n} images")
    c = num_classes if num_classes is not None else int(labels.max()) + 1
    return Dataset(inputs=images.astype(np.float64) / 255.0, labels=labels,
                   num_classes=c, split=split, name=images_path)


def save_idx(images_path, labels_path, images, labels):
    """Write uint8 images (N, rows, cols) and labels (N,) as IDX containers."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABEL_MAGIC, n))
        fh.write(labels.tobytes())


def standardize(train, test):
    """Per-feature zero-mean/unit-variance transform fit on train only.

    Zero-variance features pass through untouched (no shift, scale 1).
    Returns the transformed datasets and the {mean, std} statistics.
    """
    if train.input_dim != test.input_dim:
        raise ValueError("train and test input widths differ")
    mean = train.inputs.mean(axis=0)
    std = train.inputs.std(axis=0)
    constant = std < 1e-12
    mean = np.where(constant, 0.0, mean)
    std = np.where(constant, 1.0, std)

    def apply(ds):
        return Dataset(inputs=(ds.inputs - mean) / std, labels=ds.labels,
                       num_classes=ds.num_classes, split=ds.split,
                       name=ds.name, cluster_ids=ds.cluster_ids)

    return apply(train), apply(test), {"mean": mean, "std": std}


def corrupt(x, kind, severity, seed):
    """Perturb a feature matrix at one of five severities.

    gaussian     — additive N(0, sigma) noise, sigma in {0.04..0.20} x the
                   per-feature std of ``x``;
    salt_pepper  — each entry flips to its feature's min or max with
                   probability {1..5}%;
    uniform      — additive U(-a, a) noise, a in {0.07..0.35} x feature std.

    Deterministic given (seed, kind, severity); shape-preserving.
    """
    x = np.asarray(x, dtype=np.float64)
    if kind not in CORRUPTION_KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}")
    if not 1 <= severity <= 5:
        raise ValueError(f"severity must lie in [1, 5], got {severity}")
    rng = _rng((seed, CORRUPTION_KINDS.index(kind), severity))
    feature_std = x.std(axis=0)
    if kind == "gaussian":
        sigma = GAUSSIAN_SIGMAS[severity - 1] * feature_std
        return x + sigma * rng.standard_normal(x.shape)
    if kind == "uniform":
        half = UNIFORM_HALF_WIDTHS[severity - 1] * feature_std
        return x + half * rng.uniform(-1.0, 1.0, size=x.shape)
    frac = SALT_PEPPER_FRACTIONS[severity - 1]
    lo = np.broadcast_to(x.min(axis=0), x.shape)
    hi = np.broadcast_to(x.max(axis=0), x.shape)
    flip = rng.random(x.shape) < frac
    salt = rng.random(x.shape) < 0.5
    out = x.copy()
    out[flip & salt] = hi[flip & salt]
    out[flip & ~salt] = lo[flip & ~salt]
    return out


def make_batches(ds, plan, epoch):
    """Deterministic mini-batches for one epoch.

    Plain mode chunks a shuffled permutation.  Stratified mode shuffles
    within each class and deals classes round-robin before chunking, then
    repairs any single-class batch by swapping with an earlier one, so every
    batch sees >= 2 classes whenever the dataset has >= 2.  A trailing batch
    with fewer than 2 examples is dropped (a graph needs two vertices).
    """
    if plan.batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    rng = _rng((plan.seed, epoch))
    if plan.stratified and ds.num_classes >= 2:
        per_class = [rng.permutation(np.flatnonzero(ds.labels == c))
                     for c in range(ds.num_classes)]
        order = np.empty(ds.n, dtype=np.int64)
        pos = 0
        cursors = [0] * ds.num_classes
        while pos < ds.n:
            for c, idx in enumerate(per_class):
                if cursors[c] < len(idx):
                    order[pos] = idx[cursors[c]]
                    cursors[c] += 1
                    pos += 1
    else:
        order = rng.permutation(ds.n)
    chunks = [order[i:i + plan.batch_size]
              for i in range(0, ds.n, plan.batch_size)]
    if len(chunks[-1]) < 2:
        chunks.pop()
    if plan.stratified and ds.num_classes >= 2:
        for chunk in chunks:
            if len(np.unique(ds.labels[chunk])) >= 2:
                continue
            lone = ds.labels[chunk[0]]
            for other in chunks:  # steal one differently-labeled example
                if other is chunk:
                    continue
                donors = np.flatnonzero(ds.labels[other] != lone)
                if donors.size >= 2:  # donor batch keeps >= 2 classes
                    j = donors[0]
                    chunk[0], other[j] = other[j], chunk[0]
                    break
    return [(ds.inputs[c], ds.labels[c]) for c in chunks]
