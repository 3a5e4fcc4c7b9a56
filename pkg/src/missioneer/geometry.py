"""Rigid-body poses: translation + unit quaternion.

Quaternions are stored (x, y, z, w), matching scipy.spatial.transform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import InvalidInput

_QUAT_TOL = 1e-9


@dataclass(frozen=True)
class Pose:
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)
    quaternion: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)

    def __post_init__(self):
        t = tuple(float(v) for v in self.translation)
        q = tuple(float(v) for v in self.quaternion)
        if len(t) != 3 or len(q) != 4:
            raise InvalidInput("pose needs a 3-vector translation and 4-vector quaternion")
        if not all(math.isfinite(v) for v in t + q):
            raise InvalidInput("pose components must be finite")
        norm = math.sqrt(sum(v * v for v in q))
        if abs(norm - 1.0) > _QUAT_TOL:
            if norm == 0.0:
                raise InvalidInput("zero quaternion")
            q = tuple(v / norm for v in q)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "quaternion", q)

    @staticmethod
    def identity() -> "Pose":
        return Pose()

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        q = Rotation.from_matrix(m[:3, :3]).as_quat()
        return Pose(tuple(m[:3, 3]), tuple(q))

    def rotation(self) -> Rotation:
        return Rotation.from_quat(self.quaternion)

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation().as_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N, 3) array of points by this pose."""
        pts = np.asarray(points, dtype=float)
        return self.rotation().apply(pts) + np.asarray(self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` first, then self."""
        r = self.rotation()
        t = r.apply(np.asarray(other.translation)) + np.asarray(self.translation)
        q = (r * other.rotation()).as_quat()
        return Pose(tuple(t), tuple(q))

    def inverse(self) -> "Pose":
        rinv = self.rotation().inv()
        t = -rinv.apply(np.asarray(self.translation))
        return Pose(tuple(t), tuple(rinv.as_quat()))

    def delta_to(self, other: "Pose") -> "Pose":
        """Relative pose d with other = self ∘ d."""
        return self.inverse().compose(other)

    def rotation_angle_deg(self) -> float:
        """Magnitude of this pose's rotation, degrees."""
        return float(np.degrees(self.rotation().magnitude()))

    def translation_array(self) -> np.ndarray:
        return np.asarray(self.translation, dtype=float)

    def to_document(self) -> dict:
        return {"translation": list(self.translation), "quaternion": list(self.quaternion)}

    @staticmethod
    def from_document(doc: dict) -> "Pose":
        return Pose(tuple(doc["translation"]), tuple(doc["quaternion"]))


def pose_difference(a: Pose, b: Pose) -> tuple[float, float]:
    """(translation distance m, rotation angle deg) between two poses."""
    dt = np.linalg.norm(a.translation_array() - b.translation_array())
    dr = a.delta_to(b).rotation_angle_deg()
    return float(dt), float(dr)
