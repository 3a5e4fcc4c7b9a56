"""Pose tracking against a prior map: odometry prior + ICP correction.

The tracker is a periodic job on the core timeline. Each tick composes the
platform's odometry delta onto the previous estimate, registers the latest
scan against the (downsampled) prior map, and publishes a LocalizerState.
Persistent bad fitness degrades tracking to odometry alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import NoOverlap, ScanUnavailable
from .geometry import Pose
from .icp import IcpParams, icp_register
from .pointcloud import PointCloud, voxel_downsample


@dataclass(frozen=True)
class TrackerParams:
    rate_hz: float = 2.0
    prior_voxel: float = 0.05  # m; prior map downsample resolution
    lost_fitness: float = 0.05  # m^2; a tick above this is "bad"
    lost_after: int = 4  # consecutive bad ticks before LocalizationLost
    icp: IcpParams = field(default_factory=IcpParams)


@dataclass
class LocalizerState:
    pose: Pose
    fitness: float
    last_update: float
    degraded: bool = False

    def to_payload(self) -> dict:
        return {
            "pose": self.pose.to_document(),
            "fitness": self.fitness,
            "last_update": self.last_update,
            "degraded": self.degraded,
        }


class Localizer:
    def __init__(self, prior_map: PointCloud, adapter, initial_pose: Pose,
                 params: TrackerParams = TrackerParams(), events=None):
        self.params = params
        self.prior = voxel_downsample(prior_map, params.prior_voxel)
        self.adapter = adapter
        self.events = events
        self.state = LocalizerState(initial_pose, 0.0, 0.0)
        self._bad_ticks = 0
        self._lost_announced = False
        self._timer = None

    def start(self, timeline) -> None:
        period = 1.0 / self.params.rate_hz
        self._timer = timeline.call_every(period, lambda: self.tick(timeline.now()))

    def stop(self, timeline) -> None:
        if self._timer is not None:
            timeline.cancel(self._timer)
            self._timer = None

    def tick(self, now: float) -> LocalizerState:
        prior_pose = self.state.pose
        init = prior_pose.compose(self.adapter.odometry_delta())
        try:
            scan = self.adapter.scan()
            result = icp_register(scan, self.prior, init, self.params.icp)
            pose, fitness = result.pose, result.fitness
            bad = fitness > self.params.lost_fitness
        except (ScanUnavailable, NoOverlap):
            pose, fitness = init, float("inf")
            bad = True

        if bad:
            self._bad_ticks += 1
            pose = init  # fall back to the odometry prior for this tick
        else:
            self._bad_ticks = 0
            self._lost_announced = False

        degraded = self._bad_ticks >= self.params.lost_after
        if degraded and not self._lost_announced:
            self._lost_announced = True
            if self.events is not None:
                self.events.publish(
                    "alert",
                    {"event": "localization_lost", "bad_ticks": self._bad_ticks},
                )
        self.state = LocalizerState(pose, fitness, now, degraded)
        if self.events is not None:
            self.events.publish("localizer", self.state.to_payload())
        return self.state
