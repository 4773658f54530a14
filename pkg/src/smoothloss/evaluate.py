"""Classification over learned embeddings and corruption-robustness metrics.

k-NN prediction is fully deterministic: distance ties break toward the
lower reference index, vote ties toward the smaller class id.  The mean
corruption error (MCE) aggregates corrupted-test errors across a grid of
(corruption kind, severity) cells, normalized per kind by a baseline model;
the relative variant first subtracts each model's clean error, isolating
the degradation from the starting point.  A model scored against itself
gets exactly 100 / 100.
"""

from dataclasses import dataclass

import numpy as np

from . import backend, data


@dataclass
class EmbeddingIndex:
    """Frozen reference embeddings with their labels."""

    embeddings: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.embeddings.ndim != 2 or self.embeddings.shape[0] < 1:
            raise ValueError("reference embeddings must be a nonempty matrix")
        if not np.isfinite(self.embeddings).all():
            raise ValueError("reference embeddings contain non-finite values")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError(f"labels must lie in [0, {self.num_classes})")


def knn_predict(index, queries, k):
    """Majority vote over the k Euclidean-nearest references per query."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.shape[1] != index.embeddings.shape[1]:
        raise ValueError(f"query dim {queries.shape[1]} != reference dim "
                         f"{index.embeddings.shape[1]}")
    if not 1 <= k <= index.embeddings.shape[0]:
        raise ValueError(f"k must lie in [1, {index.embeddings.shape[0]}], "
                         f"got {k}")
    # squared distances: same ordering, same tie structure, no sqrt
    sq = backend.cross_sq_dists(queries, index.embeddings)
    return backend.knn_vote(sq, index.labels, k, index.num_classes)


def argmax_predict(logits):
    """Class of the largest logit per row (the cross-entropy twin's classifier)."""
    return np.argmax(np.asarray(logits), axis=1).astype(np.int64)


def accuracy(pred, truth):
    """Fraction of matching predictions, in [0, 1]."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    return float(np.mean(pred == truth))


def corruption_grid(predict, inputs, labels, seed,
                    kinds=data.CORRUPTION_KINDS, severities=range(1, 6)):
    """Error rate of ``predict`` on every (kind, severity) corruption cell.

    ``predict`` maps an input matrix to predicted labels.  The corrupted
    inputs are a deterministic function of (seed, kind, severity), so two
    models evaluated with the same seed see identical corruptions.
    """
    grid = {}
    for kind in kinds:
        for severity in severities:
            xc = data.corrupt(inputs, kind, severity, seed)
            grid[(kind, int(severity))] = 1.0 - accuracy(predict(xc), labels)
    return grid


def mce(method_errors, baseline_errors, method_clean, baseline_clean):
    """Mean corruption error and its clean-error-relative variant.

    mce = 100 * mean over kinds of
          [sum over severities of E_method / same sum of E_baseline];
    relative_mce uses (E - clean error of the respective model) instead of
    E.  Requires matching grids and positive baseline denominators.
    """
    if set(method_errors) != set(baseline_errors):
        raise ValueError("method and baseline corruption grids differ")
    kinds = sorted({kind for kind, _ in method_errors})
    ratios, rel_ratios = [], []
    for kind in kinds:
        cells = sorted(sev for knd, sev in method_errors if knd == kind)
        m_sum = sum(method_errors[(kind, s)] for s in cells)
        b_sum = sum(baseline_errors[(kind, s)] for s in cells)
        if b_sum <= 0:
            raise ValueError(f"baseline error sum for {kind!r} is not positive")
        ratios.append(m_sum / b_sum)
        m_rel = sum(method_errors[(kind, s)] - method_clean for s in cells)
        b_rel = sum(baseline_errors[(kind, s)] - baseline_clean for s in cells)
        if b_rel <= 0:
            raise ValueError(f"baseline relative error sum for {kind!r} "
                             "is not positive")
        rel_ratios.append(m_rel / b_rel)
    return (100.0 * sum(ratios) / len(ratios),
            100.0 * sum(rel_ratios) / len(rel_ratios))


@dataclass
class RobustnessReport:
    """Clean errors, the corruption grid for both models, and MCE scores."""

    clean_error_method: float
    clean_error_baseline: float
    method_errors: dict
    baseline_errors: dict
    mce: float
    relative_mce: float
    seed: int = 0

    def to_record(self):
        """Flatten to a JSON-serializable dict (one NDJSON record)."""
        cells = [{"kind": kind, "severity": sev,
                  "error_method": self.method_errors[(kind, sev)],
                  "error_baseline": self.baseline_errors[(kind, sev)]}
                 for kind, sev in sorted(self.method_errors)]
        return {"schema": "robustness_report.v1",
                "clean_error_method": self.clean_error_method,
                "clean_error_baseline": self.clean_error_baseline,
                "grid": cells,
                "mce": self.mce,
                "relative_mce": self.relative_mce,
                "seed": self.seed}
