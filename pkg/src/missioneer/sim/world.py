"""Static world model: prior map, transient objects, and scripted faults."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import InvalidInput, ParseError
from ..pointcloud import PointCloud, load_pcd
from ..schedule import parse_timestamp


def sample_box_surface(center, extents, spacing: float = 0.05) -> np.ndarray:
    """Deterministic grid of points covering all six faces of a box."""
    center = np.asarray(center, dtype=np.float64)
    extents = np.asarray(extents, dtype=np.float64)
    if center.shape != (3,) or extents.shape != (3,):
        raise InvalidInput("box centre and extents must be 3-vectors")
    if np.any(extents <= 0.0):
        raise InvalidInput("box extents must be positive")
    half = extents / 2.0
    axes = []
    for dim in range(3):
        n = max(2, int(np.ceil(extents[dim] / spacing)) + 1)
        axes.append(np.linspace(-half[dim], half[dim], n))
    faces = []
    for dim in range(3):
        u, v = [d for d in range(3) if d != dim]
        gu, gv = np.meshgrid(axes[u], axes[v], indexing="ij")
        for side in (-half[dim], half[dim]):
            face = np.empty((gu.size, 3))
            face[:, dim] = side
            face[:, u] = gu.ravel()
            face[:, v] = gv.ravel()
            faces.append(face)
    return np.unique(np.vstack(faces), axis=0) + center


@dataclass(frozen=True)
class SimObject:
    """A box that exists in the world during an optional time window."""

    id: str
    center: np.ndarray
    extents: np.ndarray
    present_from: float | None = None
    present_until: float | None = None
    surface: np.ndarray = field(default=None, repr=False)  # filled in __post_init__

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        extents = np.asarray(self.extents, dtype=np.float64)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "extents", extents)
        if self.surface is None:
            object.__setattr__(self, "surface", sample_box_surface(center, extents))

    def present_at(self, t: float) -> bool:
        if self.present_from is not None and t < self.present_from:
            return False
        if self.present_until is not None and t >= self.present_until:
            return False
        return True


@dataclass(frozen=True)
class FaultScript:
    """Scripted failures: edges that block and scan dropouts, by interval."""

    blocked_edges: tuple[tuple[tuple[str, str, str], float, float], ...] = ()
    scan_dropouts: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        for _, t0, t1 in self.blocked_edges:
            if t1 < t0:
                raise InvalidInput("blocked interval must be well-ordered")
        for t0, t1 in self.scan_dropouts:
            if t1 < t0:
                raise InvalidInput("dropout interval must be well-ordered")

    def first_block(self, edge_key: tuple[str, str, str], t0: float, t1: float) -> float | None:
        """Earliest instant in [t0, t1] at which the edge is blocked."""
        hits = [
            max(b0, t0)
            for key, b0, b1 in self.blocked_edges
            if key == edge_key and b0 <= t1 and b1 >= t0
        ]
        return min(hits) if hits else None

    def in_dropout(self, t: float) -> bool:
        return any(t0 <= t < t1 for t0, t1 in self.scan_dropouts)


@dataclass(frozen=True)
class SimWorld:
    prior_map: PointCloud = field(default_factory=lambda: PointCloud(np.empty((0, 3))))
    objects: tuple[SimObject, ...] = ()
    faults: FaultScript = field(default_factory=FaultScript)

    def object_points(self, t: float) -> np.ndarray:
        present = [o.surface for o in self.objects if o.present_at(t)]
        if not present:
            return np.empty((0, 3))
        return np.vstack(present)

    @staticmethod
    def from_document(doc: dict, base_dir: Path | str = ".") -> "SimWorld":
        base = Path(base_dir)
        try:
            prior = PointCloud(np.empty((0, 3)))
            if doc.get("prior_map"):
                prior = load_pcd(base / str(doc["prior_map"]))
            objects = tuple(
                SimObject(
                    id=str(o["id"]),
                    center=np.asarray(o["centre"], dtype=np.float64),
                    extents=np.asarray(o["extents"], dtype=np.float64),
                    present_from=(
                        parse_timestamp(o["present_from"]) if o.get("present_from") is not None else None
                    ),
                    present_until=(
                        parse_timestamp(o["present_until"]) if o.get("present_until") is not None else None
                    ),
                )
                for o in doc.get("objects", [])
            )
            fault_doc = doc.get("faults", {})
            blocked = tuple(
                (
                    (str(b["source"]), str(b["target"]), str(b.get("action", "walk"))),
                    parse_timestamp(b["from"]),
                    parse_timestamp(b["until"]),
                )
                for b in fault_doc.get("blocked_edges", [])
            )
            dropouts = tuple(
                (parse_timestamp(d["from"]), parse_timestamp(d["until"]))
                for d in fault_doc.get("scan_dropouts", [])
            )
            return SimWorld(
                prior_map=prior,
                objects=objects,
                faults=FaultScript(blocked_edges=blocked, scan_dropouts=dropouts),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed world document: {exc}") from exc
