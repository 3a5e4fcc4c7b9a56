"""Point-to-point ICP with fixed-radius correspondences and SVD alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyCloud, InvalidInput, NoOverlap
from .geometry import Pose
from .pointcloud import PointCloud


@dataclass(frozen=True)
class IcpParams:
    max_iterations: int = 50
    correspondence_radius: float = 1.0  # m
    convergence_eps: float = 1e-6  # translation m + rotation rad per iteration

    def __post_init__(self):
        if self.max_iterations < 1 or self.correspondence_radius <= 0 or self.convergence_eps <= 0:
            raise InvalidInput("ICP parameters must be positive")


@dataclass
class IcpResult:
    pose: Pose
    fitness: float  # mean squared correspondence distance, m^2
    iterations: int
    converged: bool
    fitness_history: tuple  # pre-alignment fitness per iteration, then final


def _best_rigid(p: np.ndarray, q: np.ndarray) -> Pose:
    """Least-squares rigid transform taking points p onto q (Kabsch/SVD)."""
    cp = p.mean(axis=0)
    cq = q.mean(axis=0)
    h = (p - cp).T @ (q - cq)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    t = cq - r @ cp
    m = np.eye(4)
    m[:3, :3] = r
    m[:3, 3] = t
    return Pose.from_matrix(m)


def icp_register(
    source: PointCloud,
    target: PointCloud,
    init: Pose = Pose.identity(),
    params: IcpParams = IcpParams(),
) -> IcpResult:
    """Register `source` onto `target`, seeded with `init`.

    The returned pose maps source coordinates into the target frame. Raises
    NoOverlap if no source point finds a correspondence within the radius.
    """
    if source.is_empty or target.is_empty:
        raise EmptyCloud("both clouds must be non-empty")

    index = kernels.NeighborIndex(target.points, params.correspondence_radius)
    pose = init
    history = []
    converged = False
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        moved = pose.apply(source.points)
        idx, d2 = index.nearest_within(moved)
        mask = idx >= 0
        if not mask.any():
            raise NoOverlap(
                f"no correspondences within {params.correspondence_radius} m "
                f"at iteration {iterations}"
            )
        history.append(float(d2[mask].mean()))
        delta = _best_rigid(moved[mask], target.points[idx[mask]])
        pose = delta.compose(pose)
        step = float(np.linalg.norm(delta.translation_array())) + float(
            np.radians(delta.rotation_angle_deg())
        )
        if step < params.convergence_eps:
            converged = True
            break

    moved = pose.apply(source.points)
    idx, d2 = index.nearest_within(moved)
    mask = idx >= 0
    if not mask.any():
        raise NoOverlap("registration diverged out of correspondence range")
    fitness = float(d2[mask].mean())
    history.append(fitness)
    return IcpResult(pose, fitness, iterations, converged, tuple(history))
