"""Object-level 3D change detection between per-mission point clouds."""

from .voxel import VoxelGrid, GridDiff, voxelize, diff_grids, morph_open
from .filters import GroundFilterParams, GroundFilterResult, ransac_ground_filter, mls_smooth
from .clustering import (
    ObjectCluster,
    cluster_descriptor,
    descriptor_distance,
    euclidean_cluster,
    kmeans_group,
    match_objects,
)
from .pipeline import (
    ChangeParams,
    ChangeReport,
    cluster_file_name,
    report_to_document,
    run_pipeline,
)

__all__ = [
    "VoxelGrid",
    "GridDiff",
    "voxelize",
    "diff_grids",
    "morph_open",
    "GroundFilterParams",
    "GroundFilterResult",
    "ransac_ground_filter",
    "mls_smooth",
    "ObjectCluster",
    "cluster_descriptor",
    "descriptor_distance",
    "euclidean_cluster",
    "kmeans_group",
    "match_objects",
    "ChangeParams",
    "ChangeReport",
    "cluster_file_name",
    "run_pipeline",
    "report_to_document",
]
