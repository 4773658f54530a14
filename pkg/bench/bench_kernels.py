#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Runs each hot kernel on a range of sizes and reports the best-of-repeats
wall time for both implementations plus the speedup.  Usage:

    python bench/bench_kernels.py [--repeats N]

The numpy fallback leans on BLAS for the distance matrices and on stable
argsorts for selection, so the compiled core mainly wins on the selection
kernels (k-NN masks and votes) and on small/medium batches where Python
dispatch overhead dominates.
"""

import argparse
import time

import numpy as np

from smoothloss.backend import numpy_backend

try:
    from smoothloss.backend import _kernels as ext
except ImportError:
    ext = None


def best_time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name, make_args, kernels, repeats):
    args = make_args()
    rows = []
    for label, fn in kernels:
        t_np = best_time(lambda: fn(numpy_backend, *args), repeats)
        if ext is not None:
            t_ext = best_time(lambda: fn(ext, *args), repeats)
            rows.append((f"{label} {name}", t_np, t_ext, t_np / t_ext))
        else:
            rows.append((f"{label} {name}", t_np, None, None))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=7)
    opts = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = []
    for n, d in [(100, 8), (100, 64), (500, 16), (2000, 16)]:
        x = rng.normal(size=(n, d))
        q = rng.normal(size=(max(n // 4, 1), d))
        labels = rng.integers(0, 10, size=n)
        sq = numpy_backend.pairwise_sq_dists(x)
        dists = np.sqrt(sq)
        cross = numpy_backend.cross_sq_dists(q, x)
        k = max(min(10, n - 1), 1)
        kernels = [
            ("pairwise ", lambda impl, *_: impl.pairwise_sq_dists(x)),
            ("cross    ", lambda impl, *_: impl.cross_sq_dists(q, x)),
            ("knn mask ", lambda impl, *_: impl.knn_edge_mask(dists, k)),
            ("knn vote ", lambda impl, *_: impl.knn_vote(cross, labels, k,
                                                         10)),
        ]
        cases += bench_case(f"n={n:<5d} d={d:<3d}", lambda: (), kernels,
                            opts.repeats)

    header = f"{'kernel / size':<32s} {'numpy':>10s} {'compiled':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, t_np, t_ext, speedup in cases:
        if t_ext is None:
            print(f"{name:<32s} {t_np * 1e3:>8.3f}ms {'n/a':>10s} {'n/a':>8s}")
        else:
            print(f"{name:<32s} {t_np * 1e3:>8.3f}ms {t_ext * 1e3:>8.3f}ms "
                  f"{speedup:>7.2f}x")
    if ext is None:
        print("\ncompiled extension not available; showing fallback only")


if __name__ == "__main__":
    main()
