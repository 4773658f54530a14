"""Pure-numpy implementations of the hot kernels.

Semantics are the contract shared with the compiled extension in
``_kernels.pyx``; the two are interchangeable and tested for exact
agreement.  All distance ties break toward the lower index, all vote ties
toward the smaller class id, so every result is deterministic.
"""

import numpy as np


def pairwise_sq_dists(x):
    """Squared Euclidean distances between all rows of x.

    Returns an exactly symmetric (n, n) float64 matrix with zero diagonal.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d, 0.0, out=d)
    d = 0.5 * (d + d.T)  # gemm output is symmetric only up to rounding
    np.fill_diagonal(d, 0.0)
    return d


def cross_sq_dists(a, b):
    """Squared Euclidean distances between rows of a (queries) and b (references)."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    sa = np.einsum("ij,ij->i", a, a)
    sb = np.einsum("ij,ij->i", b, b)
    d = sa[:, None] + sb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d


def knn_edge_mask(dists, k):
    """Union-symmetrized k-nearest-neighbor mask of a square distance matrix.

    Each row selects its k smallest off-diagonal entries (ties broken by
    lower column index), then the directed selection is symmetrized with
    ``mask | mask.T``.  Returns a uint8 (n, n) matrix with zero diagonal.
    """
    dists = np.asarray(dists, dtype=np.float64)
    n = dists.shape[0]
    if dists.shape != (n, n):
        raise ValueError(f"distance matrix must be square, got {dists.shape}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= n-1, got k={k} for n={n}")
    d = dists.copy()
    np.fill_diagonal(d, np.inf)
    # stable sort keeps equal distances in index order -> lower index wins
    nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
    mask = np.zeros((n, n), dtype=np.uint8)
    mask[np.arange(n)[:, None], nearest] = 1
    np.maximum(mask, mask.T, out=mask)
    return mask


def knn_vote(dists, ref_labels, k, num_classes):
    """Predict a class per query row by majority vote over its k nearest references.

    ``dists`` is a (q, m) matrix of query-to-reference distances (any
    monotone transform of the metric works).  Distance ties break toward
    the lower reference index; vote ties toward the smaller class id.
    """
    dists = np.asarray(dists, dtype=np.float64)
    ref_labels = np.asarray(ref_labels, dtype=np.int64)
    m = dists.shape[1]
    if ref_labels.shape[0] != m:
        raise ValueError("reference label count does not match distance columns")
    if not 1 <= k <= m:
        raise ValueError(f"k must satisfy 1 <= k <= {m}, got {k}")
    if m and not (0 <= ref_labels.min() and ref_labels.max() < num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")
    nearest = np.argsort(dists, axis=1, kind="stable")[:, :k]
    votes = ref_labels[nearest]
    counts = np.zeros((dists.shape[0], num_classes), dtype=np.int64)
    for j in range(k):
        np.add.at(counts, (np.arange(dists.shape[0]), votes[:, j]), 1)
    return np.argmax(counts, axis=1).astype(np.int64)  # first max = smallest class
