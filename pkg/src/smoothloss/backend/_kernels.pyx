# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: pairwise distances, k-NN selection, k-NN voting.

Contract matches smoothloss.backend.numpy_backend exactly (same tie-break
rules, same dtypes); the test suite asserts bitwise agreement.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def pairwise_sq_dists(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] xv = x
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for t in range(d):
                diff = xv[i, t] - xv[j, t]
                acc += diff * diff
            ov[i, j] = acc
            ov[j, i] = acc
    return out


def cross_sq_dists(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, ::1] bv = b
    if av.shape[1] != bv.shape[1]:
        raise ValueError("row width mismatch")
    cdef Py_ssize_t q = av.shape[0], m = bv.shape[0], d = av.shape[1]
    out = np.zeros((q, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef double acc, diff
    for i in range(q):
        for j in range(m):
            acc = 0.0
            for t in range(d):
                diff = av[i, t] - bv[j, t]
                acc += diff * diff
            ov[i, j] = acc
    return out


cdef inline void _select_k_smallest(const double[:, ::1] dv, Py_ssize_t row,
                                    Py_ssize_t skip, Py_ssize_t k,
                                    double* best_d, Py_ssize_t* best_i) nogil:
    # Insertion selection of the k smallest (distance, index) pairs in a row,
    # ordered by distance then index; `skip` excludes the diagonal (-1 keeps all).
    cdef Py_ssize_t m = dv.shape[1]
    cdef Py_ssize_t filled = 0, j, pos, t
    cdef double dj
    for j in range(m):
        if j == skip:
            continue
        dj = dv[row, j]
        if filled == k:
            if dj > best_d[k - 1] or (dj == best_d[k - 1] and j > best_i[k - 1]):
                continue
        pos = filled if filled < k else k - 1
        while pos > 0 and (best_d[pos - 1] > dj or
                           (best_d[pos - 1] == dj and best_i[pos - 1] > j)):
            if pos < k:
                best_d[pos] = best_d[pos - 1]
                best_i[pos] = best_i[pos - 1]
            pos -= 1
        best_d[pos] = dj
        best_i[pos] = j
        if filled < k:
            filled += 1


def knn_edge_mask(dists, k):
    dists = np.ascontiguousarray(dists, dtype=np.float64)
    cdef double[:, ::1] dv = dists
    cdef Py_ssize_t n = dv.shape[0]
    if dv.shape[1] != n:
        raise ValueError(f"distance matrix must be square, got {dists.shape}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must satisfy 1 <= k <= n-1, got k={k} for n={n}")
    mask = np.zeros((n, n), dtype=np.uint8)
    cdef unsigned char[:, ::1] mv = mask
    buf_d = np.empty(k, dtype=np.float64)
    buf_i = np.empty(k, dtype=np.intp)
    cdef double[::1] bd = buf_d
    cdef Py_ssize_t[::1] bi = buf_i
    cdef Py_ssize_t i, t
    for i in range(n):
        _select_k_smallest(dv, i, i, k, &bd[0], &bi[0])
        for t in range(k):
            mv[i, bi[t]] = 1
    for i in range(n):
        for t in range(i + 1, n):
            if mv[i, t] or mv[t, i]:
                mv[i, t] = 1
                mv[t, i] = 1
    return mask


def knn_vote(dists, ref_labels, k, num_classes):
    dists = np.ascontiguousarray(dists, dtype=np.float64)
    ref_labels = np.ascontiguousarray(ref_labels, dtype=np.int64)
    cdef double[:, ::1] dv = dists
    cdef long long[::1] lv = ref_labels
    cdef Py_ssize_t q = dv.shape[0], m = dv.shape[1]
    cdef Py_ssize_t nc = num_classes
    if lv.shape[0] != m:
        raise ValueError("reference label count does not match distance columns")
    if not 1 <= k <= m:
        raise ValueError(f"k must satisfy 1 <= k <= {m}, got {k}")
    if m and not (0 <= ref_labels.min() and ref_labels.max() < nc):
        raise ValueError(f"labels must lie in [0, {nc})")
    pred = np.empty(q, dtype=np.int64)
    cdef long long[::1] pv = pred
    buf_d = np.empty(k, dtype=np.float64)
    buf_i = np.empty(k, dtype=np.intp)
    counts = np.zeros(nc, dtype=np.int64)
    cdef double[::1] bd = buf_d
    cdef Py_ssize_t[::1] bi = buf_i
    cdef long long[::1] cv = counts
    cdef Py_ssize_t i, t, best_c
    cdef long long best_n
    for i in range(q):
        _select_k_smallest(dv, i, -1, k, &bd[0], &bi[0])
        for t in range(nc):
            cv[t] = 0
        for t in range(k):
            cv[lv[bi[t]]] += 1
        best_c = 0
        best_n = cv[0]
        for t in range(1, nc):
            if cv[t] > best_n:  # strict: ties keep the smaller class id
                best_n = cv[t]
                best_c = t
        pv[i] = best_c
    return pred
