"""Hot numeric kernels with two interchangeable backends.

The scoring scan (float32 storage, float64 accumulation) and the k-means
assignment step dominate runtime.  Both exist as a numba ``@njit`` kernel and
as a pure-numpy implementation; the active backend is picked once at import:

* ``TOPICSHARD_NUMBA=0`` (also ``false``/``off``/``no``) forces pure numpy;
* otherwise numba is used when importable, numpy when not.

Each backend is deterministic for fixed inputs.  Across backends the float64
results may differ in the last ulps (BLAS vs. sequential summation), which is
why callers must never mix backends inside one comparison.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("TOPICSHARD_NUMBA", "").strip().lower()
_numba_wanted = _flag not in {"0", "false", "off", "no"}

if _numba_wanted:
    try:
        from numba import njit

        _numba_available = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _numba_available = False
else:
    _numba_available = False

USE_NUMBA = _numba_wanted and _numba_available


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return "numba" if USE_NUMBA else "numpy"


def _dot_scores_numpy(vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    # float32 storage promoted to float64 before the product, so every dot
    # accumulates at 64-bit precision.
    return vectors.astype(np.float64) @ query


def _nearest_centroids_numpy(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # argmax keeps the first (lowest-index) maximum, matching the tie rule.
    return np.argmax(points @ centroids.T, axis=1).astype(np.int64)


if USE_NUMBA:

    @njit(cache=True)
    def _dot_scores_numba(vectors, query):  # pragma: no cover - jitted
        n, d = vectors.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(d):
                acc += np.float64(vectors[i, j]) * query[j]
            out[i] = acc
        return out

    @njit(cache=True)
    def _nearest_centroids_numba(points, centroids):  # pragma: no cover - jitted
        n, d = points.shape
        t = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = -np.inf
            best_t = 0
            for c in range(t):
                acc = 0.0
                for j in range(d):
                    acc += points[i, j] * centroids[c, j]
                if acc > best:  # strict: ties stay at the lowest index
                    best = acc
                    best_t = c
            labels[i] = best_t
        return labels


def dot_scores(vectors: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Row-wise dot products of a float32 matrix against a float64 query.

    Returns one float64 score per row, accumulated at 64-bit precision.
    """
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    query = np.ascontiguousarray(query, dtype=np.float64)
    if vectors.shape[0] == 0:
        return np.empty(0, dtype=np.float64)
    if USE_NUMBA:
        return _dot_scores_numba(vectors, query)
    return _dot_scores_numpy(vectors, query)


def nearest_centroids(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the highest-dot-product centroid for each point (ties: lowest).

    Both arguments are float64; for unit-norm rows this is nearest-by-cosine.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if USE_NUMBA:
        return _nearest_centroids_numba(points, centroids)
    return _nearest_centroids_numpy(points, centroids)
