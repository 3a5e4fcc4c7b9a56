"""End-to-end change detection between two registered point clouds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, TypeVar

from ..errors import InvalidInput, StageError
from ..pointcloud import PointCloud
from .clustering import ADDED, REMOVED, DEFAULT_MATCH_CUTOFF, ObjectCluster, euclidean_cluster, match_objects
from .filters import GroundFilterParams, mls_smooth, ransac_ground_filter
from .voxel import VoxelGrid, diff_grids, morph_open, voxelize

T = TypeVar("T")


@dataclass(frozen=True)
class ChangeParams:
    """Knobs for every stage; flags allow ablating individual stages."""

    resolution: float = 0.1
    min_points_per_voxel: int = 1
    ground: GroundFilterParams = field(default_factory=GroundFilterParams)
    enable_ground_filter: bool = True
    mls_radius: float = 0.3
    enable_mls: bool = True
    opening_radius: int = 1
    cluster_tolerance: float = 0.3
    min_cluster_size: int = 10
    match_cutoff: float = DEFAULT_MATCH_CUTOFF
    seed: int = 0

    def __post_init__(self) -> None:
        if self.resolution <= 0.0:
            raise InvalidInput("resolution must be positive")
        if self.opening_radius < 0:
            raise InvalidInput("opening_radius must be non-negative")

    def to_document(self) -> dict:
        return {
            "resolution": self.resolution,
            "min_points_per_voxel": self.min_points_per_voxel,
            "ground": {
                "distance_threshold": self.ground.distance_threshold,
                "max_iterations": self.ground.max_iterations,
                "min_inlier_fraction": self.ground.min_inlier_fraction,
            },
            "enable_ground_filter": self.enable_ground_filter,
            "mls_radius": self.mls_radius,
            "enable_mls": self.enable_mls,
            "opening_radius": self.opening_radius,
            "cluster_tolerance": self.cluster_tolerance,
            "min_cluster_size": self.min_cluster_size,
            "match_cutoff": self.match_cutoff,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class ChangeReport:
    """Object-level differences between a before and an after cloud."""

    added: list[ObjectCluster]
    removed: list[ObjectCluster]
    correspondences: list[tuple[int | None, int | None, float | None]]
    params: ChangeParams

    @property
    def empty(self) -> bool:
        return not self.added and not self.removed


def _stage(name: str, fn: Callable[[], T]) -> T:
    try:
        return fn()
    except Exception as exc:
        raise StageError(name, exc) from exc


def _changed_points(
    grid: VoxelGrid,
    cells,
    original: PointCloud,
) -> PointCloud:
    idx = grid.points_in(cells)
    return PointCloud(original.points[idx])


def run_pipeline(before: PointCloud, after: PointCloud, params: ChangeParams | None = None) -> ChangeReport:
    """Detect object-level additions and removals between two clouds.

    Both clouds must already share a global frame. Stages run in a fixed
    order: ground removal, smoothing, voxel occupancy differencing, an
    opening pass to drop speckle, back-projection of difference cells onto
    the unsmoothed points, clustering, and descriptor matching. Any stage
    failure surfaces with the stage name attached.

    Smoothing only steers voxel occupancy; clusters are built from the
    original measurements so reported geometry is never displaced by the
    smoother. Both clouds are filtered with the same seed, which makes the
    self-difference of any cloud exactly empty.
    """
    params = params or ChangeParams()

    if params.enable_ground_filter:
        nonground_before = _stage(
            "ground_filter",
            lambda: ransac_ground_filter(before, params.ground, seed=params.seed).nonground,
        )
        nonground_after = _stage(
            "ground_filter",
            lambda: ransac_ground_filter(after, params.ground, seed=params.seed).nonground,
        )
    else:
        nonground_before, nonground_after = before, after

    if params.enable_mls:
        smooth_before = _stage("mls_smooth", lambda: mls_smooth(nonground_before, params.mls_radius))
        smooth_after = _stage("mls_smooth", lambda: mls_smooth(nonground_after, params.mls_radius))
    else:
        smooth_before, smooth_after = nonground_before, nonground_after

    grid_before = _stage(
        "voxelize",
        lambda: voxelize(smooth_before, params.resolution, min_points_per_voxel=params.min_points_per_voxel),
    )
    grid_after = _stage(
        "voxelize",
        lambda: voxelize(smooth_after, params.resolution, min_points_per_voxel=params.min_points_per_voxel),
    )

    diff = _stage("diff_grids", lambda: diff_grids(grid_before, grid_after))

    added_cells = diff.added
    removed_cells = diff.removed
    if params.opening_radius > 0:
        added_cells = _stage(
            "morph_open",
            lambda: morph_open(grid_after.with_occupied(added_cells), params.opening_radius).occupied,
        )
        removed_cells = _stage(
            "morph_open",
            lambda: morph_open(grid_before.with_occupied(removed_cells), params.opening_radius).occupied,
        )

    added_points = _stage(
        "back_project", lambda: _changed_points(grid_after, added_cells, nonground_after)
    )
    removed_points = _stage(
        "back_project", lambda: _changed_points(grid_before, removed_cells, nonground_before)
    )

    added_clusters = _stage(
        "euclidean_cluster",
        lambda: euclidean_cluster(added_points, params.cluster_tolerance, params.min_cluster_size, ADDED),
    )
    removed_clusters = _stage(
        "euclidean_cluster",
        lambda: euclidean_cluster(removed_points, params.cluster_tolerance, params.min_cluster_size, REMOVED),
    )

    correspondences = _stage(
        "match_objects",
        lambda: match_objects(added_clusters, removed_clusters, params.match_cutoff),
    )

    return ChangeReport(
        added=added_clusters,
        removed=removed_clusters,
        correspondences=correspondences,
        params=params,
    )


def cluster_file_name(cluster: ObjectCluster) -> str:
    """Deterministic per-cluster point cloud file name used by exports."""
    return f"{cluster.change_kind}-{cluster.id:03d}.pcd"


def report_to_document(report: ChangeReport) -> dict:
    """Serializable summary of a report, pointing at per-cluster cloud files."""
    def entry(cluster: ObjectCluster) -> dict:
        doc = cluster.to_document()
        doc["cloud_file"] = cluster_file_name(cluster)
        return doc

    return {
        "params": report.params.to_document(),
        "added": [entry(c) for c in report.added],
        "removed": [entry(c) for c in report.removed],
        "correspondences": [
            {"added": a, "removed": r, "distance": d} for a, r, d in report.correspondences
        ],
    }
