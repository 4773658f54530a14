"""Similarity graphs over mini-batch embeddings and graph-signal smoothness.

A batch of n embeddings induces a k-nearest-neighbor graph whose edges are
weighted by exp(-alpha * distance).  Class membership becomes a binary
"label signal" per class, and the smoothness of those signals (the
Laplacian quadratic form) measures how much edge weight crosses class
boundaries.  Everything here is plain numpy; batches are small, so dense
matrices throughout.
"""

from dataclasses import dataclass

import numpy as np

from . import backend

# Smoothing added under the sqrt of every distance computation so the
# differentiable path in the loss module and the graphs built here agree
# exactly (coincident points get distance sqrt(DISTANCE_EPS), not 0).
DISTANCE_EPS = 1e-12


@dataclass
class SimilarityGraph:
    """Symmetric weighted adjacency over a batch with its k-NN mask.

    weights[u, v] = exp(-alpha * distance(u, v)) where the mask is set,
    0 elsewhere; the diagonal is zero and every off-diagonal weight lies in
    (0, 1].  Union symmetrization means each vertex keeps between k and n-1
    neighbors.
    """

    n: int
    weights: np.ndarray
    knn_mask: np.ndarray
    k: int


@dataclass
class LabelSignal:
    """Binary indicator vector of one class over batch vertices."""

    class_id: int
    values: np.ndarray


def pairwise_distances(x, eps=DISTANCE_EPS):
    """Eps-smoothed Euclidean distance matrix sqrt(||x_u - x_v||^2 + eps)."""
    return np.sqrt(backend.pairwise_sq_dists(x) + eps)


def knn_mask(distances, k):
    """Union-symmetrized k-NN selection mask of a distance matrix.

    Each row picks its k smallest off-diagonal distances (ties broken by
    lower vertex index) and the directed result is symmetrized with
    mask = max(mask, mask.T).
    """
    return backend.knn_edge_mask(distances, k)


def build_similarity_graph(embeddings, k, alpha):
    """k-NN graph over embedding rows with exp(-alpha * distance) weights."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    d = pairwise_distances(np.asarray(embeddings, dtype=np.float64))
    mask = knn_mask(d, k)
    weights = np.exp(-alpha * d) * mask
    np.fill_diagonal(weights, 0.0)
    return SimilarityGraph(n=d.shape[0], weights=weights, knn_mask=mask, k=k)


def laplacian(g):
    """Combinatorial Laplacian L = D - W (degree matrix minus adjacency).

    Symmetric, rows sum to zero, positive semidefinite for nonnegative W.
    """
    lap = -np.array(g.weights, dtype=np.float64)
    np.fill_diagonal(lap, g.weights.sum(axis=1))
    return lap


def smoothness(g, s):
    """Laplacian quadratic form s^T L s of a signal on the graph.

    Computed as half the symmetric double sum
    sum_{u,v} W[u, v] (s[u] - s[v])^2, which equals s^T L s; zero exactly
    when the signal is constant across every positively weighted edge.
    """
    values = np.asarray(s.values if isinstance(s, LabelSignal) else s,
                        dtype=np.float64)
    if values.shape != (g.n,):
        raise ValueError(f"signal length {values.shape} != vertex count {g.n}")
    diff = values[:, None] - values[None, :]
    return 0.5 * float(np.sum(g.weights * diff * diff))


def label_signals(labels, num_classes):
    """One binary indicator signal per class; together they partition vertices."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes})")
    return [LabelSignal(class_id=c, values=(labels == c).astype(np.float64))
            for c in range(num_classes)]
