"""Long-horizon deployment replays on the discrete-event clock.

Each replay builds a site map, one recurring inspection mission, and a fixed
intervention log, then advances simulated time across the whole deployment
window. The run is deterministic: same seed, same event stream, same metrics.

Two sites are bundled:

* ``b1``: an office-style building, weekday inspections at 11:00 and 15:00
  local time over seven weeks.
* ``jet``: a circular experimental hall, daily inspections at 11:00 and
  15:00 over five weeks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from datetime import datetime
from zoneinfo import ZoneInfo

from .actions import ActionSpec
from .clock import SimClock, Timeline
from .core import AutonomyCore, CoreConfig, SCHEDULE_ORIGIN
from .events import EventLog
from .mission import CONTINUE_REMAINING, Mission, Task
from .schedule import DAILY_AT, Recurrence, Schedule
from .scheduler import BatteryMonitor, InterventionRecord, MINOR, SERIOUS, FATAL, compute_mtbi
from .sim.robot import SimRobot
from .sim.world import SimWorld
from .store import DataStore
from .topomap import DOCK, INSPECTION, WAYPOINT, Edge, Node, TopologicalMap, bidirectional
from .geometry import Pose

HOUR = 3600.0


@dataclass(frozen=True)
class ReplayScenario:
    name: str
    tz: str
    start_local: str  # ISO date-time, midnight of the first day
    end_local: str  # exclusive
    times: tuple[str, ...]
    weekdays_only: bool
    interventions: tuple[str, ...]  # categories, spread evenly over the window


@dataclass
class ReplayResult:
    name: str
    window_hours: float
    scheduled_executions: int
    outcomes: dict = field(default_factory=dict)
    interventions: dict = field(default_factory=dict)
    mtbi_hours: float | None = None
    distance_km: float = 0.0
    events: int = 0
    wall_s: float = 0.0


B1 = ReplayScenario(
    name="b1",
    tz="Europe/London",
    start_local="2023-07-18T00:00:00",
    end_local="2023-09-05T00:00:00",
    times=("11:00", "15:00"),
    weekdays_only=True,
    interventions=(
        MINOR, SERIOUS, MINOR, FATAL, MINOR,
        SERIOUS, MINOR, SERIOUS, MINOR, FATAL,
        SERIOUS, MINOR, MINOR, SERIOUS, MINOR,
        FATAL, SERIOUS, MINOR, SERIOUS, MINOR,
        FATAL, MINOR, SERIOUS, MINOR, SERIOUS,
    ),
)

JET = ReplayScenario(
    name="jet",
    tz="Europe/London",
    start_local="2024-02-21T00:00:00",
    end_local="2024-03-27T00:00:00",
    times=("11:00", "15:00"),
    weekdays_only=False,
    interventions=(
        MINOR, FATAL, MINOR, MINOR, SERIOUS, MINOR, FATAL, MINOR,
        MINOR, FATAL, MINOR, MINOR, FATAL, MINOR, MINOR, FATAL,
    ),
)

SCENARIOS = {"b1": B1, "jet": JET}


# -- site maps ----------------------------------------------------------------


def _walk_pair(nodes: dict, a: str, b: str) -> tuple[Edge, Edge]:
    cost = math.dist(nodes[a], nodes[b])
    return bidirectional(a, b, cost=cost)


def build_b1_map() -> TopologicalMap:
    """Corridor spine with side rooms; 37 nodes, 9 of them inspection points."""
    positions: dict[str, tuple] = {}
    kinds: dict[str, str] = {}

    def put(node_id: str, x: float, y: float, kind: str = WAYPOINT) -> None:
        positions[node_id] = (x, y, 0.0)
        kinds[node_id] = kind

    put("dock", 0.0, -3.0, DOCK)
    for i in range(12):
        put(f"c{i:02d}", 5.0 * i, 0.0)
    for i in range(12):
        put(f"r{i:02d}", 5.0 * i, 4.0 if i % 2 == 0 else -4.0)
    for j, i in enumerate((3, 7, 11)):
        put(f"r{j + 12:02d}", 5.0 * i, -4.0 if i % 2 == 0 else 4.0)
    for j in range(9):
        i = j + 1
        side = 6.5 if i % 2 == 0 else -6.5
        put(f"i{j:02d}", 5.0 * i, -side, INSPECTION)

    edges: list[Edge] = []
    for i in range(11):
        edges.extend(_walk_pair(positions, f"c{i:02d}", f"c{i + 1:02d}"))
    edges.extend(_walk_pair(positions, "dock", "c00"))
    for i in range(12):
        edges.extend(_walk_pair(positions, f"c{i:02d}", f"r{i:02d}"))
    for j, i in enumerate((3, 7, 11)):
        edges.extend(_walk_pair(positions, f"c{i:02d}", f"r{j + 12:02d}"))
    for j in range(9):
        edges.extend(_walk_pair(positions, f"c{j + 1:02d}", f"i{j:02d}"))

    nodes = tuple(
        Node(nid, nid, positions[nid], kinds[nid]) for nid in sorted(positions)
    )
    return TopologicalMap(nodes=nodes, edges=tuple(edges), frame_id="b1", version=1)


def build_jet_map() -> TopologicalMap:
    """Ring gallery around a central hall; 41 nodes, 7 inspection points."""
    positions: dict[str, tuple] = {}
    kinds: dict[str, str] = {}

    def put(node_id: str, x: float, y: float, kind: str = WAYPOINT) -> None:
        positions[node_id] = (x, y, 0.0)
        kinds[node_id] = kind

    ring_n, ring_r = 16, 20.0
    for i in range(ring_n):
        a = 2.0 * math.pi * i / ring_n
        put(f"g{i:02d}", ring_r * math.cos(a), ring_r * math.sin(a))
    for i in range(10):
        a = 2.0 * math.pi * i / 10
        put(f"o{i:02d}", 28.0 * math.cos(a), 28.0 * math.sin(a))
    for j in range(7):
        i = 2 * j
        a = 2.0 * math.pi * i / ring_n
        put(f"i{j:02d}", 15.0 * math.cos(a), 15.0 * math.sin(a), INSPECTION)
    for j in range(7):
        i = 2 * j + 1
        a = 2.0 * math.pi * i / ring_n
        put(f"k{j:02d}", 24.0 * math.cos(a), 24.0 * math.sin(a))
    put("dock", 32.0, 0.0, DOCK)

    edges: list[Edge] = []
    for i in range(ring_n):
        edges.extend(_walk_pair(positions, f"g{i:02d}", f"g{(i + 1) % ring_n:02d}"))
    for j in range(7):
        edges.extend(_walk_pair(positions, f"g{2 * j:02d}", f"i{j:02d}"))
        edges.extend(_walk_pair(positions, f"g{2 * j + 1:02d}", f"k{j:02d}"))
    for i in range(10):
        near = min(range(7), key=lambda j: math.dist(positions[f"o{i:02d}"], positions[f"k{j:02d}"]))
        edges.extend(_walk_pair(positions, f"o{i:02d}", f"k{near:02d}"))
    edges.extend(_walk_pair(positions, "dock", "g00"))

    nodes = tuple(
        Node(nid, nid, positions[nid], kinds[nid]) for nid in sorted(positions)
    )
    return TopologicalMap(nodes=nodes, edges=tuple(edges), frame_id="jet", version=1)


def inspection_mission(tmap: TopologicalMap, mission_id: str) -> Mission:
    """Photograph every inspection node, then return to the charger."""
    tasks = [
        Task(
            node=node.id,
            action=ActionSpec("capture_image", {"camera": "front"}, timeout_s=30.0),
            label=f"photo {node.id}",
        )
        for node in tmap.nodes_of_kind(INSPECTION)
    ]
    dock = tmap.nodes_of_kind(DOCK)[0]
    tasks.append(Task(node=dock.id, action=ActionSpec("dock", {}, timeout_s=120.0), label="recharge"))
    return Mission(
        id=mission_id,
        name=f"{mission_id} inspection round",
        tasks=tuple(tasks),
        failure_policy=CONTINUE_REMAINING,
    )


# -- execution -----------------------------------------------------------------


def run_replay(name: str, data_dir, seed: int = 0) -> ReplayResult:
    scenario = SCENARIOS[name]
    zone = ZoneInfo(scenario.tz)
    start_ts = datetime.fromisoformat(scenario.start_local).replace(tzinfo=zone).timestamp()
    end_ts = datetime.fromisoformat(scenario.end_local).replace(tzinfo=zone).timestamp()
    window_hours = (end_ts - start_ts) / HOUR

    tmap = build_b1_map() if name == "b1" else build_jet_map()
    timeline = Timeline(SimClock(start=start_ts))
    events = EventLog(timeline.now)
    store = DataStore(data_dir)
    world = SimWorld()
    dock = tmap.nodes_of_kind(DOCK)[0]
    robot = SimRobot(
        world,
        map_provider=lambda: core.tmap,
        timeline=timeline,
        events=events,
        seed=seed,
        initial_pose=Pose(translation=dock.position),
    )
    core = AutonomyCore(
        timeline,
        store,
        robot,
        events=events,
        config=CoreConfig(timezone=scenario.tz, seed=seed),
        monitors=[BatteryMonitor()],
        initial_map=tmap,
    )
    robot.dock()

    core.restore()
    core.set_map(tmap)
    mission = inspection_mission(tmap, f"{name}-round")
    core.save_mission(mission)
    core.save_schedule(
        Schedule(
            id=f"{name}-rounds",
            mission_id=mission.id,
            recurrence=Recurrence(
                kind=DAILY_AT, times=scenario.times, weekdays_only=scenario.weekdays_only
            ),
            enabled=True,
            reorder_before_run=False,
        )
    )

    spacing = (end_ts - start_ts) / (len(scenario.interventions) + 1)
    for i, category in enumerate(scenario.interventions):
        at = start_ts + spacing * (i + 1)
        timeline.schedule_at(
            at,
            lambda at=at, category=category, i=i: core.log_intervention(
                InterventionRecord(
                    timestamp=at,
                    category=category,
                    description=f"scripted intervention {i + 1}",
                    operator="replay",
                )
            ),
        )

    core.start()
    began = time.perf_counter()
    timeline.advance_to(end_ts)
    wall_s = time.perf_counter() - began
    core.stop()

    scheduled = [r for r in core.records if r.origin.startswith(SCHEDULE_ORIGIN)]
    outcomes: dict[str, int] = {}
    for record in scheduled:
        outcomes[record.outcome] = outcomes.get(record.outcome, 0) + 1
    categories: dict[str, int] = {}
    for record in core.interventions:
        categories[record.category] = categories.get(record.category, 0) + 1

    return ReplayResult(
        name=name,
        window_hours=window_hours,
        scheduled_executions=len(scheduled),
        outcomes=outcomes,
        interventions=categories,
        mtbi_hours=compute_mtbi(core.interventions, window_hours, end=end_ts),
        distance_km=sum(r.distance_walked for r in scheduled) / 1000.0,
        events=core.events.last_seq,
        wall_s=wall_s,
    )


def format_table(result: ReplayResult) -> str:
    lines = [
        f"replay: {result.name}",
        f"window: {result.window_hours:.0f} h",
        f"scheduled executions: {result.scheduled_executions}",
    ]
    for outcome in sorted(result.outcomes):
        lines.append(f"  outcome {outcome}: {result.outcomes[outcome]}")
    total = sum(result.interventions.values())
    lines.append(f"interventions: {total}")
    for category in (MINOR, SERIOUS, FATAL):
        if category in result.interventions:
            lines.append(f"  {category}: {result.interventions[category]}")
    mtbi = "n/a" if result.mtbi_hours is None else f"{result.mtbi_hours:.2f} h"
    lines.append(f"mtbi: {mtbi}")
    lines.append(f"distance walked: {result.distance_km:.2f} km")
    lines.append(f"events: {result.events}")
    lines.append(f"wall time: {result.wall_s:.1f} s")
    return "\n".join(lines)
