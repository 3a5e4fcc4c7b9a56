"""Schedule firing, system monitors, and the intervention metrics log.

The scheduler is one periodic job at 1 Hz of the system clock. Each tick it
evaluates every monitor against a state snapshot, applies their effects
(inhibit, uninhibit, mission requests), then fires any schedules that have
come due. Monitors never touch the robot directly; everything they cause
flows through the core as ordinary serialized commands.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .actions import ActionSpec
from .errors import InvalidInput, NoPath, ParseError
from .mission import Mission, Task
from .navigation import plan_path
from .schedule import next_fire_time
from .topomap import DOCK, TopologicalMap, nearest_node

MINOR = "minor"
SERIOUS = "serious"
FATAL = "fatal"
CATEGORIES = (MINOR, SERIOUS, FATAL)

INHIBIT = "inhibit"
UNINHIBIT = "uninhibit"
REQUEST_MISSION = "request_mission"
ALERT = "alert"


@dataclass(frozen=True)
class InterventionRecord:
    """A human touched the running system; graded by how bad it was."""

    timestamp: float
    category: str
    description: str = ""
    operator: str = ""

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise InvalidInput(f"unknown intervention category {self.category!r}")

    def to_document(self) -> dict:
        return {
            "t": self.timestamp,
            "category": self.category,
            "description": self.description,
            "operator": self.operator,
        }

    @staticmethod
    def from_document(doc: dict) -> "InterventionRecord":
        try:
            return InterventionRecord(
                timestamp=float(doc["t"]),
                category=str(doc["category"]),
                description=str(doc.get("description", "")),
                operator=str(doc.get("operator", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed intervention record: {exc}") from exc


def compute_mtbi(
    records: list[InterventionRecord], window_hours: float, end: float | None = None
) -> float | None:
    """Mean hours between non-minor interventions over a trailing window.

    Minor interventions do not count as failures of autonomy. With zero
    non-minor records the metric is undefined and None is returned.
    """
    if window_hours <= 0.0:
        raise InvalidInput("window must be positive")
    if end is None:
        if not records:
            return None
        end = max(r.timestamp for r in records)
    start = end - window_hours * 3600.0
    count = sum(1 for r in records if r.category != MINOR and start <= r.timestamp <= end)
    if count == 0:
        return None
    return window_hours / count


@dataclass(frozen=True)
class MonitorEffect:
    kind: str  # inhibit | uninhibit | request_mission | alert
    monitor: str
    reason: str = ""
    mission: Mission | None = None
    urgent: bool = False  # urgent requests may cancel the running task


@dataclass
class SystemSnapshot:
    """What monitors are allowed to see; computed fresh each tick."""

    now: float
    battery: float
    docked: bool
    busy: bool
    inhibited: frozenset[str]
    tmap: TopologicalMap
    position: object  # 3-vector
    _node_cache: str | None = field(default=None, repr=False)

    def robot_node(self) -> str | None:
        """Nearest map node; resolved lazily since most ticks never need it."""
        if self._node_cache is None and len(self.tmap.nodes):
            self._node_cache = nearest_node(self.tmap, self.position)
        return self._node_cache


class BatteryMonitor:
    """Inhibits missions on low charge and sends the robot to a dock.

    Hysteresis: inhibit below ``low``, release at ``resume``. Below
    ``hard_floor`` the dock request is urgent, which cancels the task in
    flight instead of waiting for the task boundary.
    """

    def __init__(self, low: float = 0.2, resume: float = 0.9, hard_floor: float = 0.1):
        if not 0.0 < hard_floor < low < resume <= 1.0:
            raise InvalidInput("battery thresholds must satisfy 0 < floor < low < resume <= 1")
        self.name = "battery"
        self.low = low
        self.resume = resume
        self.hard_floor = hard_floor
        self._holding = False
        self._dock_count = 0

    def _dock_mission(self, snapshot: SystemSnapshot) -> Mission | None:
        docks = snapshot.tmap.nodes_of_kind(DOCK)
        if not docks:
            return None
        start = snapshot.robot_node()
        if start is None:
            return None
        best = None
        for dock in sorted(docks, key=lambda n: n.id):
            try:
                cost = plan_path(snapshot.tmap, start, dock.id).total_cost
            except NoPath:
                continue
            if best is None or cost < best[0]:
                best = (cost, dock.id)
        if best is None:
            return None
        self._dock_count += 1
        return Mission(
            id=f"dock-{self._dock_count}",
            name="return to charger",
            tasks=(Task(node=best[1], action=ActionSpec("dock", timeout_s=120.0), label="dock"),),
        )

    def evaluate(self, snapshot: SystemSnapshot) -> list[MonitorEffect]:
        effects: list[MonitorEffect] = []
        battery = snapshot.battery

        if self._holding and battery >= self.resume:
            self._holding = False
            effects.append(MonitorEffect(UNINHIBIT, self.name, reason=f"battery {battery:.2f}"))
            return effects

        if battery < self.low:
            if not self._holding:
                self._holding = True
                effects.append(
                    MonitorEffect(INHIBIT, self.name, reason=f"battery {battery:.2f} < {self.low}")
                )
            if not snapshot.docked and not snapshot.busy:
                mission = self._dock_mission(snapshot)
                if mission is None:
                    effects.append(
                        MonitorEffect(ALERT, self.name, reason="no reachable dock in map")
                    )
                else:
                    effects.append(
                        MonitorEffect(
                            REQUEST_MISSION,
                            self.name,
                            reason="low battery",
                            mission=mission,
                            urgent=battery < self.hard_floor,
                        )
                    )
            elif snapshot.busy and battery < self.hard_floor:
                mission = self._dock_mission(snapshot)
                effects.append(
                    MonitorEffect(
                        REQUEST_MISSION,
                        self.name,
                        reason="battery below hard floor",
                        mission=mission,
                        urgent=True,
                    )
                )
        return effects


class Scheduler:
    """Fires schedules on time and runs monitors; one tick per clock second."""

    def __init__(self, core, tz: str = "UTC", tick_interval: float = 1.0):
        self.core = core
        self.tz = tz
        self.tick_interval = tick_interval
        self._next_fire: dict[str, float | None] = {}
        self._timer = None

    def start(self, timeline) -> None:
        self._timer = timeline.call_every(self.tick_interval, self.tick)

    def stop(self, timeline) -> None:
        if self._timer is not None:
            timeline.cancel(self._timer)
            self._timer = None

    def forget(self, schedule_id: str) -> None:
        """Drop cached state so the next tick recomputes from scratch."""
        self._next_fire.pop(schedule_id, None)

    def tick(self) -> None:
        now = self.core.timeline.now()
        self._run_monitors(now)
        self._check_schedules(now)

    def _run_monitors(self, now: float) -> None:
        monitors = self.core.monitors
        if not monitors:
            return
        snapshot = self.core.system_snapshot(now)
        for monitor in monitors:
            for effect in monitor.evaluate(snapshot):
                self.core.apply_monitor_effect(effect)

    def _check_schedules(self, now: float) -> None:
        schedules = self.core.schedules
        for schedule_id in sorted(schedules):
            schedule = schedules[schedule_id]
            if not schedule.enabled:
                self._next_fire.pop(schedule_id, None)
                continue
            if schedule_id not in self._next_fire:
                self._next_fire[schedule_id] = next_fire_time(schedule.recurrence, now, self.tz)
            due = self._next_fire[schedule_id]
            if due is None or due > now:
                continue
            self.core.fire_schedule(schedule, due)
            self._next_fire[schedule_id] = next_fire_time(schedule.recurrence, due, self.tz)
