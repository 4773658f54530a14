"""Differentiable training objectives.

Two losses: the graph smoothness loss (sum of kernel weights over k-NN
edges joining distinct classes, which pushes cross-class pairs apart while
leaving same-class geometry free) and the softmax cross-entropy baseline.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff, graph
from .autodiff import Tensor


@dataclass
class LossValue:
    """Scalar loss tensor plus graph diagnostics.

    cross_edges counts ordered cross-class pairs in the k-NN mask;
    mean_cross_weight is the loss per such pair (0 when there are none).
    """

    value: Tensor
    cross_edges: int
    mean_cross_weight: float


def graph_smoothness_loss(embeddings, labels, k, alpha):
    """Sum of exp(-alpha * distance) over ordered cross-class k-NN pairs.

    The k-NN mask is built from the current forward distances and treated as
    a constant (neighbor selection is piecewise constant, so no gradient
    flows through it); gradients reach the embeddings through the distances
    and the kernel.  A single-class batch yields loss exactly 0 with zero
    gradient.  Equals sum_c s_c^T L s_c on the batch similarity graph.
    """
    n = embeddings.data.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 vertices, got {n}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    dists = autodiff.pairwise_euclidean(embeddings, eps=graph.DISTANCE_EPS)
    mask = graph.knn_mask(dists.data, k)  # validates 1 <= k <= n-1
    labels = np.asarray(labels, dtype=np.int64)
    cross = labels[:, None] != labels[None, :]
    cross_mask = (mask.astype(bool) & cross).astype(np.float64)
    weights = autodiff.exp_neg_scale(dists, alpha)
    value = autodiff.masked_sum(weights, cross_mask)
    edges = int(cross_mask.sum())
    mean_w = float(value.data) / edges if edges else 0.0
    return LossValue(value=value, cross_edges=edges, mean_cross_weight=mean_w)


def cross_entropy_loss(logits, labels):
    """Mean softmax cross-entropy against integer labels."""
    value = autodiff.softmax_cross_entropy(logits, labels)
    return LossValue(value=value, cross_edges=0, mean_cross_weight=0.0)
