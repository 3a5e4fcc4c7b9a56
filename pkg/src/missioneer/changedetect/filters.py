"""Ground removal and surface smoothing applied before volumetric differencing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInput
from ..kernels import neighborhood_moments
from ..pointcloud import PointCloud

# Below this the two smallest covariance eigenvalues are treated as zero,
# i.e. the neighbourhood is collinear and has no well-defined plane.
_RANK_EPS = 1e-12

# A neighbourhood only counts as a surface sample when the variance along the
# candidate normal is at most this fraction of the next eigenvalue. Volumetric
# neighbourhoods (all three eigenvalues comparable) have no surface to project
# onto; projecting them would flatten solid objects into sheets.
_SURFACE_RATIO = 0.1


@dataclass(frozen=True)
class GroundFilterParams:
    distance_threshold: float = 0.05
    max_iterations: int = 200
    min_inlier_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.distance_threshold <= 0.0:
            raise InvalidInput("distance_threshold must be positive")
        if self.max_iterations < 1:
            raise InvalidInput("max_iterations must be at least 1")
        if not 0.0 < self.min_inlier_fraction <= 1.0:
            raise InvalidInput("min_inlier_fraction must be in (0, 1]")


@dataclass(frozen=True)
class GroundFilterResult:
    """Split of a cloud into a dominant plane and everything else.

    When no plane reaches the inlier threshold ``found`` is False, ``ground``
    is empty and ``nonground`` carries the input unmodified, so downstream
    stages degrade gracefully instead of aborting.
    """

    ground: PointCloud
    nonground: PointCloud
    normal: np.ndarray | None
    offset: float | None
    found: bool
    ground_indices: np.ndarray


def _canonical_normal(normal: np.ndarray) -> np.ndarray:
    if normal[2] != 0.0:
        return normal if normal[2] > 0.0 else -normal
    for component in normal:
        if component != 0.0:
            return normal if component > 0.0 else -normal
    return normal


def ransac_ground_filter(
    cloud: PointCloud,
    params: GroundFilterParams | None = None,
    seed: int = 0,
) -> GroundFilterResult:
    """Find the best-consensus plane from 3-point samples and split the cloud.

    The plane is exactly the sampled plane with the most inliers; no
    least-squares refit is applied, so the result is reproducible from the
    seed alone. Clouds with fewer than three points cannot define a plane
    and come back unmodified as nonground.
    """
    params = params or GroundFilterParams()
    points = cloud.points
    n = len(points)
    empty = PointCloud(np.empty((0, 3)))
    if n < 3:
        return GroundFilterResult(
            ground=empty,
            nonground=cloud,
            normal=None,
            offset=None,
            found=False,
            ground_indices=np.empty(0, dtype=np.intp),
        )

    rng = np.random.default_rng(seed)
    best_count = -1
    best_plane: tuple[np.ndarray, float] | None = None
    for _ in range(params.max_iterations):
        sample = rng.choice(n, size=3, replace=False)
        a, b, c = points[sample]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        offset = -float(normal @ a)
        count = int(np.count_nonzero(np.abs(points @ normal + offset) <= params.distance_threshold))
        if count > best_count:
            best_count = count
            best_plane = (normal, offset)

    if best_plane is None or best_count / n < params.min_inlier_fraction:
        return GroundFilterResult(
            ground=empty,
            nonground=cloud,
            normal=None,
            offset=None,
            found=False,
            ground_indices=np.empty(0, dtype=np.intp),
        )

    normal, offset = best_plane
    flipped = _canonical_normal(normal)
    if flipped is not normal:
        normal, offset = flipped, -offset
    inlier = np.abs(points @ normal + offset) <= params.distance_threshold
    ground_indices = np.flatnonzero(inlier)
    return GroundFilterResult(
        ground=PointCloud(points[inlier]),
        nonground=PointCloud(points[~inlier]),
        normal=normal,
        offset=offset,
        found=True,
        ground_indices=ground_indices,
    )


def mls_smooth(cloud: PointCloud, radius: float) -> PointCloud:
    """Project each point onto the least-squares plane of its neighbourhood.

    Order-1 moving least squares: the plane passes through the neighbourhood
    mean with the smallest-variance covariance eigenvector as its normal.
    Points whose neighbourhood (self included) has fewer than three members,
    is collinear, or is volumetric rather than surface-like pass through
    unchanged. Point count and order are preserved so indices stay valid
    across the call.
    """
    if radius <= 0.0:
        raise InvalidInput("smoothing radius must be positive")
    points = cloud.points
    if len(points) == 0:
        return cloud

    counts, means, covs = neighborhood_moments(points, radius)
    eigvals, eigvecs = np.linalg.eigh(covs)
    normals = eigvecs[:, :, 0]
    planar = (
        (counts >= 3)
        & (eigvals[:, 1] > _RANK_EPS)
        & (eigvals[:, 0] <= _SURFACE_RATIO * eigvals[:, 1])
    )

    out = points.copy()
    if np.any(planar):
        offsets = np.einsum("ij,ij->i", points[planar] - means[planar], normals[planar])
        out[planar] = points[planar] - offsets[:, None] * normals[planar]
    return PointCloud(out)
