"""Simulated robot: graph kinematics, battery, docking, and synthetic scans.

Battery settlement is lazy: idle drain and dock charging are integrated
whenever state is observed or changed, so the model stays exact no matter
how coarsely time advances. Walking drain is applied explicitly per step
during traversals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AdapterPreconditionViolated, DockFailed, ScanUnavailable
from ..geometry import Pose
from ..navigation import ABORTED, BLOCKED, SUCCEEDED, CancelToken, TraversalOutcome
from ..pointcloud import PointCloud
from ..topomap import DOCK, DOOR, STAIRS, Edge
from .world import SimWorld

POSITION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class SimRobotParams:
    speed_m_s: float = 1.0
    drain_per_m: float = 0.001
    idle_drain_per_h: float = 0.02
    charge_per_h: float = 0.5
    scan_radius_m: float = 15.0
    scan_noise_m: float = 0.005
    dock_radius_m: float = 0.5
    step_s: float = 1.0
    slow_duration_factor: float = 2.0  # stairs and door edges take this much longer


class SimRobot:
    def __init__(
        self,
        world: SimWorld,
        map_provider,
        timeline,
        params: SimRobotParams = SimRobotParams(),
        events=None,
        seed: int = 0,
        initial_pose: Pose | None = None,
        battery: float = 1.0,
    ):
        self.world = world
        self.map_provider = map_provider
        self.timeline = timeline
        self.params = params
        self.events = events
        self.rng = np.random.default_rng(seed)
        self._pose = initial_pose or Pose.identity()
        self._battery = float(np.clip(battery, 0.0, 1.0))
        self._docked = False
        self._settled_at = timeline.now()
        self._odom_reference = self._pose

    # -- observation ---------------------------------------------------------

    def current_pose(self) -> Pose:
        return self._pose

    @property
    def docked(self) -> bool:
        return self._docked

    @property
    def battery(self) -> float:
        self._settle()
        return self._battery

    def odometry_delta(self) -> Pose:
        delta = self._odom_reference.inverse().compose(self._pose)
        self._odom_reference = self._pose
        return delta

    def teleport(self, pose: Pose) -> None:
        """Place the robot without walking it there (setup only)."""
        self._pose = pose
        self._odom_reference = pose
        self._docked = False
        self._emit_pose()

    # -- battery model -------------------------------------------------------

    def _settle(self) -> None:
        now = self.timeline.now()
        hours = (now - self._settled_at) / 3600.0
        if hours > 0.0:
            if self._docked:
                self._battery += self.params.charge_per_h * hours
            else:
                self._battery -= self.params.idle_drain_per_h * hours
            self._battery = float(np.clip(self._battery, 0.0, 1.0))
            self._settled_at = now

    def _drain_walk(self, metres: float) -> None:
        self._battery = float(np.clip(self._battery - self.params.drain_per_m * metres, 0.0, 1.0))

    # -- motion --------------------------------------------------------------

    def _emit_pose(self) -> None:
        if self.events is not None:
            self.events.publish(
                "pose",
                {
                    "position": [float(v) for v in self._pose.translation],
                    "battery": round(self._battery, 6),
                    "docked": self._docked,
                },
            )

    def _walk(self, origin, direction, distance: float, duration: float, cancel=None) -> float:
        """Advance along `direction` for up to `duration`; returns covered time.

        Stops early when the cancel token trips. Pose and battery update per
        step so monitors sampling mid-walk see consistent interpolated state.
        """
        if duration <= 0.0:
            return 0.0
        rate = distance / duration
        elapsed = 0.0
        while elapsed < duration:
            step = min(self.params.step_s, duration - elapsed)
            self.timeline.advance_by(step)
            elapsed += step
            self._pose = Pose(origin + direction * (rate * elapsed), self._pose.quaternion)
            self._drain_walk(rate * step)
            self._settled_at = self.timeline.now()
            self._emit_pose()
            if cancel is not None and cancel.cancelled and elapsed < duration:
                break
        return elapsed

    def traverse(self, edge: Edge, cancel: CancelToken | None = None) -> TraversalOutcome:
        self._settle()
        if self._docked:
            raise AdapterPreconditionViolated("cannot traverse while docked")
        tmap = self.map_provider()
        source_p = tmap.node(edge.source).position_array()
        target_p = tmap.node(edge.target).position_array()
        here = np.asarray(self._pose.translation)
        if float(np.linalg.norm(here - source_p)) > POSITION_TOLERANCE:
            raise AdapterPreconditionViolated(
                f"robot is not at {edge.source!r} to traverse {edge.key()}"
            )

        length = float(np.linalg.norm(target_p - source_p))
        factor = self.params.slow_duration_factor if edge.action in (STAIRS, DOOR) else 1.0
        duration = length / self.params.speed_m_s * factor

        t0 = self.timeline.now()
        block_at = self.world.faults.first_block(edge.key(), t0, t0 + duration)
        origin = source_p.copy()
        if length > 0.0:
            direction = (target_p - origin) / length
        else:
            direction = np.zeros(3)

        if block_at is not None and block_at <= t0:
            return TraversalOutcome(edge, BLOCKED, 0.0)

        if block_at is not None:
            walk_t = block_at - t0
            covered = length / duration * walk_t if duration > 0 else 0.0
            onward = self._walk(origin, direction, covered, walk_t)
            back = self._walk(np.asarray(self._pose.translation), -direction, covered, onward)
            self._pose = Pose(origin, self._pose.quaternion)
            self._emit_pose()
            return TraversalOutcome(edge, BLOCKED, onward + back)

        covered_t = self._walk(origin, direction, length, duration, cancel=cancel)
        if covered_t < duration:
            # interrupted mid-edge: retrace to the source node
            covered = length / duration * covered_t if duration > 0 else 0.0
            self._walk(np.asarray(self._pose.translation), -direction, covered, covered_t)
            self._pose = Pose(origin, self._pose.quaternion)
            self._emit_pose()
            return TraversalOutcome(edge, ABORTED, covered_t * 2.0)

        self._pose = Pose(target_p, self._pose.quaternion)
        self._emit_pose()
        return TraversalOutcome(edge, SUCCEEDED, duration)

    # -- docking -------------------------------------------------------------

    def dock(self) -> None:
        self._settle()
        if self._docked:
            return
        tmap = self.map_provider()
        here = np.asarray(self._pose.translation)
        for node in sorted(tmap.nodes_of_kind(DOCK), key=lambda n: n.id):
            if float(np.linalg.norm(here - node.position_array())) <= self.params.dock_radius_m:
                self._pose = Pose(node.position, self._pose.quaternion)
                self._docked = True
                self._emit_pose()
                return
        raise DockFailed("no dock node within reach")

    def undock(self) -> None:
        self._settle()
        if self._docked:
            self._docked = False
            self._emit_pose()

    # -- sensing -------------------------------------------------------------

    def scan(self) -> PointCloud:
        """World geometry within sensor range, expressed in the sensor frame.

        Visibility is decided in the global frame; the returned points are
        relative to the robot, as a real sensor would report them, so the
        localizer genuinely has to recover the pose.
        """
        now = self.timeline.now()
        if self.world.faults.in_dropout(now):
            raise ScanUnavailable(f"scan dropout scripted at t={now}")
        here = self._pose.translation
        radius2 = self.params.scan_radius_m**2
        chunks = []
        prior = self.world.prior_map.points
        if len(prior):
            mask = np.einsum("ij,ij->i", prior - here, prior - here) <= radius2
            chunks.append(prior[mask])
        objects = self.world.object_points(now)
        if len(objects):
            mask = np.einsum("ij,ij->i", objects - here, objects - here) <= radius2
            chunks.append(objects[mask])
        points = np.vstack(chunks) if chunks else np.empty((0, 3))
        if len(points):
            points = self._pose.inverse().apply(points)
        if len(points) and self.params.scan_noise_m > 0.0:
            points = points + self.rng.normal(0.0, self.params.scan_noise_m, points.shape)
        return PointCloud(points, frame_id="base")
