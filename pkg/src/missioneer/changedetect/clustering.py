"""Segmentation of changed points into objects and cross-mission matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..kernels import cluster_labels
from ..pointcloud import PointCloud

ADDED = "added"
REMOVED = "removed"

DEFAULT_MATCH_CUTOFF = 0.5


@dataclass(frozen=True)
class ObjectCluster:
    """A connected blob of changed points treated as one physical object."""

    id: int
    points: PointCloud
    centroid: np.ndarray
    bbox_min: np.ndarray
    bbox_max: np.ndarray
    change_kind: str

    @staticmethod
    def from_points(points: PointCloud, change_kind: str, cluster_id: int) -> "ObjectCluster":
        if len(points) == 0:
            raise InvalidInput("an object cluster needs at least one point")
        if change_kind not in (ADDED, REMOVED):
            raise InvalidInput(f"unknown change kind {change_kind!r}")
        data = points.points
        return ObjectCluster(
            id=cluster_id,
            points=points,
            centroid=data.mean(axis=0),
            bbox_min=data.min(axis=0),
            bbox_max=data.max(axis=0),
            change_kind=change_kind,
        )

    @property
    def size(self) -> int:
        return len(self.points)

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "change_kind": self.change_kind,
            "size": self.size,
            "centroid": [float(v) for v in self.centroid],
            "bbox_min": [float(v) for v in self.bbox_min],
            "bbox_max": [float(v) for v in self.bbox_max],
        }


def euclidean_cluster(
    cloud: PointCloud,
    tolerance: float,
    min_size: int = 1,
    change_kind: str = ADDED,
) -> list[ObjectCluster]:
    """Split a cloud into connected components at the given linking distance.

    Two points belong to the same cluster when a chain of hops, each no
    longer than ``tolerance``, connects them. Components below ``min_size``
    are dropped. Output is ordered largest first; equal sizes fall back to
    lexicographic centroid order so the listing is deterministic.
    """
    if tolerance <= 0.0:
        raise InvalidInput("cluster tolerance must be positive")
    if min_size < 1:
        raise InvalidInput("min_size must be at least 1")
    points = cloud.points
    if len(points) == 0:
        return []

    labels = cluster_labels(points, tolerance)
    groups: list[tuple[int, np.ndarray]] = []
    for label in range(labels.max() + 1):
        idx = np.flatnonzero(labels == label)
        if len(idx) >= min_size:
            groups.append((label, idx))

    def sort_key(entry: tuple[int, np.ndarray]):
        _, idx = entry
        centroid = points[idx].mean(axis=0)
        return (-len(idx), tuple(centroid))

    groups.sort(key=sort_key)
    return [
        ObjectCluster.from_points(PointCloud(points[idx]), change_kind, i)
        for i, (_, idx) in enumerate(groups)
    ]


def cluster_descriptor(cluster: ObjectCluster | PointCloud) -> np.ndarray:
    """Five-number signature of a cluster, unchanged by rigid motion.

    Components: the three covariance eigenvalues in descending order, the
    point count, and the volume of the bounding box taken in the covariance
    eigenbasis. Eigenvalues and the eigenbasis rotate with the cluster, so
    every component is invariant under rotation and translation.
    """
    points = cluster.points.points if isinstance(cluster, ObjectCluster) else cluster.points
    if len(points) == 0:
        raise InvalidInput("cannot describe an empty cluster")
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(points)
    eigvals, eigvecs = np.linalg.eigh(cov)
    aligned = centered @ eigvecs
    extents = aligned.max(axis=0) - aligned.min(axis=0)
    return np.array(
        [
            float(eigvals[2]),
            float(eigvals[1]),
            float(eigvals[0]),
            float(len(points)),
            float(np.prod(extents)),
        ]
    )


def descriptor_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Worst per-component relative difference between two descriptors.

    Scale-free so that eigenvalues (m²), counts, and volumes (m³) compare on
    an equal footing; 0 means identical, 1 means some component differs by
    its own magnitude.
    """
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b) / denom))


def match_objects(
    added: list[ObjectCluster],
    removed: list[ObjectCluster],
    cutoff: float = DEFAULT_MATCH_CUTOFF,
) -> list[tuple[int | None, int | None, float | None]]:
    """Pair added against removed clusters by descriptor similarity.

    Greedy on the globally smallest remaining distance, which makes every
    accepted pair mutual nearest neighbours among the still-unmatched
    clusters. Pairs beyond ``cutoff`` stay unmatched and are listed with a
    missing counterpart so every cluster appears exactly once.
    """
    distances = np.empty((len(added), len(removed)))
    for i, a in enumerate(added):
        da = cluster_descriptor(a)
        for j, r in enumerate(removed):
            distances[i, j] = descriptor_distance(da, cluster_descriptor(r))

    free_added = set(range(len(added)))
    free_removed = set(range(len(removed)))
    pairs: list[tuple[int, int, float]] = []
    while free_added and free_removed:
        d, i, j = min(
            (distances[i, j], i, j) for i in sorted(free_added) for j in sorted(free_removed)
        )
        if d > cutoff:
            break
        pairs.append((i, j, float(d)))
        free_added.remove(i)
        free_removed.remove(j)

    out: list[tuple[int | None, int | None, float | None]] = []
    for i, j, d in sorted(pairs):
        out.append((added[i].id, removed[j].id, d))
    for i in sorted(free_added):
        out.append((added[i].id, None, None))
    for j in sorted(free_removed):
        out.append((None, removed[j].id, None))
    return out


def kmeans_group(
    clusters: list[ObjectCluster],
    k: int,
    seed: int = 0,
    iterations: int = 50,
) -> np.ndarray:
    """Group cluster descriptors into k families with plain Lloyd iterations.

    An optional coarse grouping mode; matching across missions uses
    ``match_objects`` instead. Descriptor components are normalised to unit
    spread first so no single component dominates the geometry.
    """
    if k < 1:
        raise InvalidInput("k must be at least 1")
    if not clusters:
        return np.empty(0, dtype=np.intp)
    if k > len(clusters):
        raise InvalidInput("k cannot exceed the number of clusters")

    data = np.stack([cluster_descriptor(c) for c in clusters])
    spread = data.std(axis=0)
    spread[spread == 0.0] = 1.0
    data = (data - data.mean(axis=0)) / spread

    rng = np.random.default_rng(seed)
    centers = data[rng.choice(len(data), size=k, replace=False)]
    labels = np.zeros(len(data), dtype=np.intp)
    for _ in range(iterations):
        dists = np.linalg.norm(data[:, None, :] - centers[None, :, :], axis=2)
        new_labels = dists.argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            member = data[labels == j]
            if len(member):
                centers[j] = member.mean(axis=0)
    return labels
