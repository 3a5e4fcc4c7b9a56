"""Shared builders for the test suite.

Stacks are assembled in-process on a SimClock so whole deployments replay in
milliseconds. The helpers mirror how the CLI wires things up, minus YAML.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import pytest

from missioneer.clock import SimClock, Timeline
from missioneer.core import AutonomyCore, CoreConfig
from missioneer.events import EventLog
from missioneer.geometry import Pose
from missioneer.scheduler import BatteryMonitor
from missioneer.sim.robot import SimRobot, SimRobotParams
from missioneer.sim.world import FaultScript, SimWorld
from missioneer.store import DataStore
from missioneer.topomap import DOCK, WAYPOINT, Node, TopologicalMap, bidirectional


def two_route_map() -> TopologicalMap:
    """Dock plus a short and a long route from a to goal.

        dock - a - b - goal        (short: 1 + 1 + 1)
                \\- c ---/          (long:  1 + 2 + 2)
    """
    nodes = (
        Node("dock", "dock", (0.0, 0.0, 0.0), DOCK),
        Node("a", "a", (1.0, 0.0, 0.0), WAYPOINT),
        Node("b", "b", (2.0, 0.0, 0.0), WAYPOINT),
        Node("c", "c", (1.0, 2.0, 0.0), WAYPOINT),
        Node("goal", "goal", (3.0, 0.0, 0.0), WAYPOINT),
    )
    edges = (
        *bidirectional("dock", "a", cost=1.0),
        *bidirectional("a", "b", cost=1.0),
        *bidirectional("b", "goal", cost=1.0),
        *bidirectional("a", "c", cost=2.0),
        *bidirectional("c", "goal", cost=2.0),
    )
    return TopologicalMap(nodes, edges).validate()


def line_map(n: int = 4, spacing: float = 1.0) -> TopologicalMap:
    """dock - w1 - w2 - ... chain with unit-ish costs."""
    nodes = [Node("dock", "dock", (0.0, 0.0, 0.0), DOCK)]
    nodes += [
        Node(f"w{i}", f"w{i}", (i * spacing, 0.0, 0.0), WAYPOINT) for i in range(1, n + 1)
    ]
    edges = []
    ids = [node.id for node in nodes]
    for a, b in zip(ids, ids[1:]):
        edges.extend(bidirectional(a, b, cost=spacing))
    return TopologicalMap(tuple(nodes), tuple(edges)).validate()


@dataclass
class Stack:
    timeline: Timeline
    store: DataStore
    events: EventLog
    robot: SimRobot
    core: AutonomyCore
    world: SimWorld

    def run_for(self, seconds: float) -> None:
        self.timeline.advance_by(seconds)


@dataclass
class StackSpec:
    tmap: TopologicalMap = field(default_factory=two_route_map)
    start: float = 0.0
    seed: int = 0
    timezone: str = "UTC"
    battery: float = 1.0
    monitor: BatteryMonitor | None = None
    faults: FaultScript = field(default_factory=FaultScript)
    robot_params: SimRobotParams = field(default_factory=SimRobotParams)
    start_at: str = "dock"


def build_stack(data_dir, spec: StackSpec | None = None) -> Stack:
    spec = spec or StackSpec()
    timeline = Timeline(SimClock(start=spec.start))
    store = DataStore(data_dir)
    events = EventLog(timeline.now)
    world = SimWorld(faults=spec.faults)
    core_box: list[AutonomyCore] = []
    robot = SimRobot(
        world,
        map_provider=lambda: core_box[0].tmap,
        timeline=timeline,
        params=spec.robot_params,
        events=events,
        seed=spec.seed,
        initial_pose=None,
        battery=spec.battery,
    )
    monitors = [spec.monitor] if spec.monitor is not None else []
    core = AutonomyCore(
        timeline,
        store,
        robot,
        events=events,
        config=CoreConfig(timezone=spec.timezone, seed=spec.seed),
        monitors=monitors,
        initial_map=spec.tmap,
    )
    core_box.append(core)
    if spec.tmap.nodes and spec.start_at is not None:
        robot.teleport(Pose(translation=spec.tmap.node(spec.start_at).position))
        if spec.tmap.node(spec.start_at).kind == DOCK:
            robot.dock()
    return Stack(timeline, store, events, robot, core, world)


@pytest.fixture
def stack(tmp_path):
    return build_stack(tmp_path / "data")
