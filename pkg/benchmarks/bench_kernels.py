#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the scoring scan (float32 rows, float64 accumulation) and the k-means
assignment step on retrieval-shaped workloads.  The numba variants are warmed
up first so JIT compilation is excluded from the timings.

Run:  python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from topicshard import kernels


def _time(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_dot_scores(n, dim, rng):
    vectors = rng.standard_normal((n, dim)).astype(np.float32)
    query = rng.standard_normal(dim)
    rows = [("numpy", kernels._dot_scores_numpy)]
    if kernels.USE_NUMBA:
        kernels._dot_scores_numba(vectors, query)  # warmup / compile
        rows.append(("numba", kernels._dot_scores_numba))
    print(f"\nscoring scan: {n} x {dim} float32 rows, float64 accumulation")
    baseline = None
    for name, fn in rows:
        t = _time(fn, vectors, query)
        baseline = baseline or t
        print(f"  {name:6s} {t * 1e3:9.3f} ms   ({baseline / t:4.2f}x vs numpy)")


def bench_nearest_centroids(n, dim, t, rng):
    points = rng.standard_normal((n, dim))
    points /= np.linalg.norm(points, axis=1, keepdims=True)
    centroids = rng.standard_normal((t, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    rows = [("numpy", kernels._nearest_centroids_numpy)]
    if kernels.USE_NUMBA:
        kernels._nearest_centroids_numba(points, centroids)  # warmup / compile
        rows.append(("numba", kernels._nearest_centroids_numba))
    print(f"\nk-means assignment: {n} points, dim {dim}, {t} centroids")
    baseline = None
    for name, fn in rows:
        best = _time(fn, points, centroids)
        baseline = baseline or best
        print(f"  {name:6s} {best * 1e3:9.3f} ms   ({baseline / best:4.2f}x vs numpy)")


def main():
    print(f"active backend: {kernels.backend()}"
          f" (set TOPICSHARD_NUMBA=0 to force the numpy path)")
    if not kernels.USE_NUMBA:
        print("numba backend disabled; timing the numpy path only")
    rng = np.random.default_rng(0)
    for n, dim in ((20_000, 64), (200_000, 128), (500_000, 768)):
        bench_dot_scores(n, dim, rng)
    for n, dim, t in ((50_000, 64, 8), (200_000, 128, 16)):
        bench_nearest_centroids(n, dim, t, rng)


if __name__ == "__main__":
    main()
