"""Point clouds and ASCII PCD I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, ParseError

PCD_HEADER = """\
# .PCD v0.7 - Point Cloud Data file format
VERSION 0.7
FIELDS x y z
SIZE 4 4 4
TYPE F F F
COUNT 1 1 1
WIDTH {n}
HEIGHT 1
VIEWPOINT 0 0 0 1 0 0 0
POINTS {n}
DATA ascii
"""


@dataclass
class PointCloud:
    points: np.ndarray
    frame_id: str = "map"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidInput(f"point array must be (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidInput("point cloud contains non-finite coordinates")
        self.points = pts

    def __len__(self):
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    @staticmethod
    def empty(frame_id: str = "map") -> "PointCloud":
        return PointCloud(np.zeros((0, 3)), frame_id)

    def transformed(self, pose) -> "PointCloud":
        return PointCloud(pose.apply(self.points), self.frame_id)


def save_pcd(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="ascii") as f:
        f.write(PCD_HEADER.format(n=len(cloud)))
        np.savetxt(f, cloud.points, fmt="%.6f")


def load_pcd(path, frame_id: str = "map") -> PointCloud:
    """Parse an ASCII PCD file (FIELDS x y z...; extra fields are ignored)."""
    n_points = None
    fields = None
    with open(path, "r", encoding="ascii", errors="replace") as f:
        lines = f.readlines()

    data_start = None
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        key = parts[0].upper()
        if key == "FIELDS":
            fields = [p.lower() for p in parts[1:]]
        elif key == "POINTS":
            try:
                n_points = int(parts[1])
            except (IndexError, ValueError):
                raise ParseError(f"{path}:{i + 1}: malformed POINTS line: {stripped!r}")
        elif key == "DATA":
            if len(parts) < 2 or parts[1].lower() != "ascii":
                raise ParseError(f"{path}:{i + 1}: only DATA ascii is supported")
            data_start = i + 1
            break
    if data_start is None:
        raise ParseError(f"{path}: no DATA section found")
    if fields is None or fields[:3] != ["x", "y", "z"]:
        raise ParseError(f"{path}: FIELDS must start with 'x y z', got {fields}")
    if n_points is None:
        raise ParseError(f"{path}: missing POINTS header")

    rows = []
    for i, line in enumerate(lines[data_start:], start=data_start + 1):
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) < 3:
            raise ParseError(f"{path}:{i}: expected at least 3 values, got {stripped!r}")
        try:
            rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
        except ValueError:
            raise ParseError(f"{path}:{i}: non-numeric point data: {stripped!r}")
    if len(rows) != n_points:
        raise ParseError(f"{path}: header promises {n_points} points, found {len(rows)}")
    pts = np.array(rows, dtype=np.float64).reshape(len(rows), 3)
    if not np.isfinite(pts).all():
        raise ParseError(f"{path}: non-finite point coordinates")
    return PointCloud(pts, frame_id)


def voxel_downsample(cloud: PointCloud, resolution: float) -> PointCloud:
    """Replace all points in each voxel by their centroid."""
    if resolution <= 0:
        raise InvalidInput("resolution must be positive")
    if cloud.is_empty:
        return PointCloud.empty(cloud.frame_id)
    idx = np.floor(cloud.points / resolution).astype(np.int64)
    _, inverse, counts = np.unique(idx, axis=0, return_inverse=True, return_counts=True)
    sums = np.zeros((counts.shape[0], 3))
    np.add.at(sums, inverse, cloud.points)
    return PointCloud(sums / counts[:, None], cloud.frame_id)
