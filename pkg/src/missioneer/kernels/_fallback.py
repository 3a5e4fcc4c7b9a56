"""Pure numpy/scipy implementations of the point-cloud kernels.

These are the reference semantics; the Cython module in _native.pyx must
agree with them (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

BACKEND = "python"


class NeighborIndex:
    """Fixed-radius nearest-neighbour queries against a static target cloud."""

    def __init__(self, target: np.ndarray, radius: float):
        self.target = np.ascontiguousarray(target, dtype=np.float64)
        self.radius = float(radius)
        self._tree = cKDTree(self.target) if len(self.target) else None

    def nearest_within(self, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Index of the nearest target point within radius, inclusive, per query
        (-1 if none), plus the squared distance (inf if none)."""
        queries = np.ascontiguousarray(queries, dtype=np.float64)
        n = len(queries)
        if self._tree is None or n == 0:
            return np.full(n, -1, dtype=np.int64), np.full(n, np.inf)
        # scipy's upper bound is exclusive; nudge it so d == radius still hits
        bound = np.nextafter(self.radius, np.inf)
        dist, idx = self._tree.query(queries, k=1, distance_upper_bound=bound)
        miss = ~np.isfinite(dist)
        idx = np.where(miss, -1, idx).astype(np.int64)
        d2 = np.where(miss, np.inf, dist * dist)
        return idx, d2


def cluster_labels(points: np.ndarray, tolerance: float) -> np.ndarray:
    """Connected-component labels linking points within `tolerance` (inclusive).

    Labels are normalised to first-occurrence order: the component containing
    the lowest point index gets label 0, and so on.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(points)
    pairs = tree.query_pairs(tolerance, output_type="ndarray")
    if len(pairs):
        data = np.ones(len(pairs), dtype=np.int8)
        adj = sparse.coo_matrix((data, (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, raw = connected_components(adj, directed=False)
    else:
        raw = np.arange(n)
    return _normalize_labels(raw)


def _normalize_labels(raw: np.ndarray) -> np.ndarray:
    order = np.full(raw.max() + 1, -1, dtype=np.int64)
    out = np.empty(len(raw), dtype=np.int64)
    next_label = 0
    for i, r in enumerate(raw):
        if order[r] < 0:
            order[r] = next_label
            next_label += 1
        out[i] = order[r]
    return out


def neighborhood_moments(points: np.ndarray, radius: float):
    """Per-point neighbourhood statistics within `radius` (inclusive, self included).

    Returns (counts (N,), means (N,3), covariances (N,3,3)); covariance is the
    biased (divide by count) second moment about the neighbourhood mean.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = len(points)
    counts = np.ones(n, dtype=np.int64)
    sums = points.copy()
    outer = points[:, :, None] * points[:, None, :]
    sq = outer.copy()
    if n:
        tree = cKDTree(points)
        pairs = tree.query_pairs(radius, output_type="ndarray")
        if len(pairs):
            i, j = pairs[:, 0], pairs[:, 1]
            np.add.at(counts, i, 1)
            np.add.at(counts, j, 1)
            np.add.at(sums, i, points[j])
            np.add.at(sums, j, points[i])
            np.add.at(sq, i, outer[j])
            np.add.at(sq, j, outer[i])
    means = sums / counts[:, None]
    covs = sq / counts[:, None, None] - means[:, :, None] * means[:, None, :]
    return counts, means, covs
