"""Occupancy voxel grids and set-based grid differencing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import GridMismatch, InvalidInput
from ..pointcloud import PointCloud

Index = tuple[int, int, int]

# 6-connected (face-adjacent) structuring element for the morphological
# operators.
_FACES: tuple[Index, ...] = (
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
)


@dataclass(frozen=True)
class VoxelGrid:
    """Sparse occupancy grid plus the point indices that fell in each cell.

    ``occupied`` only contains cells that met the population threshold;
    ``members`` retains every populated cell so the original points behind
    a voxel can be recovered later.
    """

    resolution: float
    origin: np.ndarray
    occupied: frozenset[Index]
    members: dict[Index, np.ndarray] = field(repr=False)

    def compatible_with(self, other: "VoxelGrid") -> bool:
        return (
            self.resolution == other.resolution
            and bool(np.array_equal(self.origin, other.origin))
        )

    def points_in(self, cells: set[Index] | frozenset[Index]) -> np.ndarray:
        """Indices (into the voxelized cloud) of points inside ``cells``."""
        chunks = [self.members[c] for c in sorted(cells) if c in self.members]
        if not chunks:
            return np.empty(0, dtype=np.intp)
        return np.concatenate(chunks)

    def with_occupied(self, cells: set[Index] | frozenset[Index]) -> "VoxelGrid":
        """Same lattice and membership, different occupancy set."""
        return VoxelGrid(
            resolution=self.resolution,
            origin=self.origin,
            occupied=frozenset(cells),
            members=self.members,
        )

    def centers(self, cells: set[Index] | frozenset[Index] | None = None) -> np.ndarray:
        """Metric centre of each cell, one row per cell in sorted index order."""
        use = self.occupied if cells is None else cells
        idx = np.array(sorted(use), dtype=np.float64).reshape(-1, 3)
        return self.origin + (idx + 0.5) * self.resolution


@dataclass(frozen=True)
class GridDiff:
    """Cells occupied on one side of a comparison but not the other."""

    added: frozenset[Index]
    removed: frozenset[Index]


def voxelize(
    cloud: PointCloud,
    resolution: float,
    origin: np.ndarray | None = None,
    min_points_per_voxel: int = 1,
) -> VoxelGrid:
    """Bin points into cubic cells of side ``resolution`` anchored at ``origin``.

    A cell counts as occupied once it holds at least ``min_points_per_voxel``
    points. The default origin is the world origin so that grids built from
    different clouds line up without coordination.
    """
    if resolution <= 0.0 or not np.isfinite(resolution):
        raise InvalidInput(f"voxel resolution must be positive, got {resolution!r}")
    if min_points_per_voxel < 1:
        raise InvalidInput("min_points_per_voxel must be at least 1")
    anchor = np.zeros(3) if origin is None else np.asarray(origin, dtype=np.float64)
    if anchor.shape != (3,):
        raise InvalidInput("voxel origin must be a 3-vector")

    points = cloud.points
    members: dict[Index, np.ndarray] = {}
    occupied: set[Index] = set()
    if len(points):
        cells = np.floor((points - anchor) / resolution).astype(np.int64)
        order = np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
        sorted_cells = cells[order]
        boundaries = np.flatnonzero(np.any(np.diff(sorted_cells, axis=0), axis=1)) + 1
        for group in np.split(order, boundaries):
            key: Index = tuple(int(v) for v in cells[group[0]])  # type: ignore[assignment]
            members[key] = np.sort(group)
            if len(group) >= min_points_per_voxel:
                occupied.add(key)
    return VoxelGrid(
        resolution=float(resolution),
        origin=anchor,
        occupied=frozenset(occupied),
        members=members,
    )


def diff_grids(before: VoxelGrid, after: VoxelGrid) -> GridDiff:
    """Set difference of occupancy between two grids on the same lattice."""
    if not before.compatible_with(after):
        raise GridMismatch(
            "grids use different lattices: "
            f"resolution {before.resolution} vs {after.resolution}, "
            f"origin {before.origin.tolist()} vs {after.origin.tolist()}"
        )
    return GridDiff(
        added=after.occupied - before.occupied,
        removed=before.occupied - after.occupied,
    )


def _erode(cells: frozenset[Index]) -> frozenset[Index]:
    keep = set()
    for c in cells:
        if all((c[0] + dx, c[1] + dy, c[2] + dz) in cells for dx, dy, dz in _FACES):
            keep.add(c)
    return frozenset(keep)


def _dilate(cells: frozenset[Index]) -> frozenset[Index]:
    grown = set(cells)
    for c in cells:
        for dx, dy, dz in _FACES:
            grown.add((c[0] + dx, c[1] + dy, c[2] + dz))
    return frozenset(grown)


def morph_open(grid: VoxelGrid, radius: int) -> VoxelGrid:
    """Morphological opening with a 6-connected structuring element.

    Erodes ``radius`` times then dilates ``radius`` times, removing isolated
    specks narrower than the structuring element while keeping bulkier
    regions close to their original extent. Opening with an origin-centred
    element never adds cells, so the result is a subset of the input.
    """
    if radius < 0:
        raise InvalidInput("opening radius must be non-negative")
    out = grid.occupied
    for _ in range(radius):
        out = _erode(out)
    for _ in range(radius):
        out = _dilate(out)
    return grid.with_occupied(out)
