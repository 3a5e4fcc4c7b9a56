"""The autonomy core: one serialized owner of all mutable robot state.

Every mutation (operator command, schedule firing, monitor effect) runs on
the core's timeline thread, so there are no locks and no interleavings to
reason about. Long-running work (missions) advances the shared clock and
re-enters the timeline, which keeps monitors and the scheduler live while
the robot walks.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import mission as mission_mod
from .actions import ActionExecutor, ActionRegistry, builtin_registrations
from .errors import Busy, Conflict, MissionRejected, NotFound
from .events import EventLog
from .mission import ExecutionEnv, Mission, MissionRecord, execute_mission, reorder_tsp
from .navigation import CancelToken, navigate_to
from .schedule import Schedule
from .scheduler import (
    ALERT,
    INHIBIT,
    REQUEST_MISSION,
    UNINHIBIT,
    InterventionRecord,
    MonitorEffect,
    Scheduler,
    SystemSnapshot,
    compute_mtbi,
)
from .store import DataStore
from .topomap import MapEdit, TopologicalMap, apply_edit, nearest_node

SCHEDULE_ORIGIN = "schedule:"
MONITOR_ORIGIN = "monitor:"


@dataclass
class CoreConfig:
    timezone: str = "UTC"
    seed: int = 0
    max_queued_fires: int = 1  # single-slot latest-wins queue for missed firings


class AutonomyCore:
    def __init__(
        self,
        timeline,
        store: DataStore,
        adapter,
        events: EventLog | None = None,
        config: CoreConfig = CoreConfig(),
        monitors: list | None = None,
        initial_map: TopologicalMap | None = None,
    ):
        self.timeline = timeline
        self.store = store
        self.adapter = adapter
        self.config = config
        self.events = events or EventLog(timeline.now)
        self.monitors = monitors or []

        self.tmap: TopologicalMap = initial_map or TopologicalMap()
        self.missions: dict[str, Mission] = {}
        self.schedules: dict[str, Schedule] = {}
        self.records: list[MissionRecord] = []
        self.interventions: list[InterventionRecord] = []

        self.registry = ActionRegistry(events=self.events)
        for registration in builtin_registrations():
            self.registry.register(registration)
        self.executor = ActionExecutor(
            self.registry, timeline, adapter, store.artifacts_root, seed=config.seed
        )
        self.scheduler = Scheduler(self, tz=config.timezone)

        self.inhibits: dict[str, str] = {}
        self.busy = False
        self._cancel = CancelToken()
        self._preempt_reason: str | None = None
        self._queued_fire: tuple[Schedule, float] | None = None
        self._pending_monitor: MonitorEffect | None = None

    # -- lifecycle -------------------------------------------------------------

    def restore(self) -> None:
        """Load persisted state; must run before the scheduler starts."""
        loaded = self.store.load_all(self.timeline.now())
        if loaded.tmap is not None:
            self.tmap = loaded.tmap
        self.missions = loaded.missions
        self.schedules = loaded.schedules
        for registration in loaded.registrations:
            self.registry.register(registration)
        self.records = loaded.records
        self.interventions = loaded.interventions
        if loaded.recovered_record is not None:
            self.records.sort(key=lambda r: r.started_at)
            self.events.publish(
                "alert",
                {
                    "event": "recovered_inflight",
                    "mission": loaded.recovered_record.mission_id,
                    "outcome": loaded.recovered_record.outcome,
                },
            )

    def start(self) -> None:
        self.scheduler.start(self.timeline)

    def stop(self) -> None:
        self.scheduler.stop(self.timeline)

    def map_provider(self) -> TopologicalMap:
        return self.tmap

    # -- map -------------------------------------------------------------------

    def set_map(self, tmap: TopologicalMap, persist: bool = True) -> None:
        tmap.validate()
        self.tmap = tmap
        if persist:
            self.store.save_map(tmap)
        self.events.publish("map_version", {"version": tmap.version, "op": "replace"})

    def apply_map_edit(self, edit: MapEdit, expected_version: int) -> TopologicalMap:
        if expected_version != self.tmap.version:
            raise Conflict(
                f"map version is {self.tmap.version}, edit expected {expected_version}",
                current=self.tmap.version,
                expected=expected_version,
            )
        self.tmap = apply_edit(self.tmap, edit)
        self.store.save_map(self.tmap)
        self.events.publish("map_version", {"version": self.tmap.version, "op": edit.op})
        return self.tmap

    # -- mission lifecycle --------------------------------------------------------

    def robot_node(self) -> str:
        return nearest_node(self.tmap, self.adapter.current_pose().translation)

    def execute_mission_id(self, mission_id: str, origin: str = "operator") -> MissionRecord:
        if mission_id in self.missions:
            return self.run_mission(self.missions[mission_id], origin=origin)
        return self.run_mission(self.store.load_mission(mission_id), origin=origin)

    def run_mission(self, mission: Mission, origin: str = "operator") -> MissionRecord:
        if self.busy:
            raise Busy("a mission is already executing")
        if self.inhibits and not origin.startswith(MONITOR_ORIGIN):
            holders = ", ".join(sorted(self.inhibits))
            raise MissionRejected(f"execution inhibited by: {holders}", monitors=sorted(self.inhibits))

        self.busy = True
        self._cancel = CancelToken()
        self._preempt_reason = None
        marker_statuses = [mission_mod.PENDING] * len(mission.tasks)
        marker = {
            "mission": mission.id,
            "name": mission.name,
            "origin": origin,
            "started_at": self.timeline.now(),
            "tasks": len(mission.tasks),
            "task_statuses": marker_statuses,
        }
        self.store.write_inflight(marker)

        def track(event) -> None:
            if event.kind == "task" and event.payload.get("mission") == mission.id:
                marker_statuses[event.payload["task"]] = event.payload["status"]
                self.store.write_inflight(marker)

        self.events.add_listener(track)
        try:
            env = ExecutionEnv(
                map_provider=self.map_provider,
                adapter=self.adapter,
                actions=self.executor,
                now=self.timeline.now,
                events=self.events,
                cancel=self._cancel,
                preempt_requested=lambda: self._preempt_reason,
                origin=origin,
            )
            record = execute_mission(mission, env)
        finally:
            self.events.remove_listener(track)
            self.busy = False
        self.records.append(record)
        self.store.append_record(record)
        self.store.clear_inflight()
        self.timeline.submit(self._drain_pending)
        return record

    def interrupt(self, reason: str = "operator interrupt") -> dict:
        if not self.busy:
            return {"interrupted": False}
        self._cancel.cancel(reason)
        return {"interrupted": True}

    def navigate(self, goal: str) -> dict:
        if self.busy:
            raise Busy("a mission is already executing")
        self.busy = True
        self._cancel = CancelToken()
        try:
            report = navigate_to(
                self.map_provider, self.adapter, goal, events=self.events, cancel=self._cancel
            )
        finally:
            self.busy = False
        self.timeline.submit(self._drain_pending)
        return {"reached": report.reached, "hops": len(report.outcomes)}

    def _drain_pending(self) -> None:
        """Run deferred work once the robot is idle: monitor mission first."""
        if self.busy:
            return
        if self._pending_monitor is not None:
            effect = self._pending_monitor
            self._pending_monitor = None
            if effect.mission is not None:
                self.run_mission(effect.mission, origin=MONITOR_ORIGIN + effect.monitor)
            return
        if self._queued_fire is not None:
            schedule, due = self._queued_fire
            self._queued_fire = None
            self._start_scheduled(schedule, due)

    # -- scheduling -----------------------------------------------------------------

    def fire_schedule(self, schedule: Schedule, due: float) -> None:
        self.events.publish(
            "schedule",
            {"event": "fired", "schedule": schedule.id, "mission": schedule.mission_id, "due": due},
        )
        mission = self.missions.get(schedule.mission_id)
        if mission is None:
            self.events.publish(
                "schedule",
                {
                    "event": "error",
                    "schedule": schedule.id,
                    "reason": f"mission {schedule.mission_id!r} not found",
                },
            )
            self.set_schedule_enabled(schedule.id, False)
            return
        if self.inhibits:
            self.events.publish(
                "schedule",
                {
                    "event": "suppressed",
                    "schedule": schedule.id,
                    "reason": "inhibited",
                    "monitors": sorted(self.inhibits),
                },
            )
            return
        if self.busy:
            if self._queued_fire is None:
                self._queued_fire = (schedule, due)
                self.events.publish(
                    "schedule", {"event": "queued", "schedule": schedule.id, "due": due}
                )
            else:
                self.events.publish(
                    "schedule",
                    {"event": "suppressed", "schedule": schedule.id, "reason": "queue full"},
                )
            return
        self._start_scheduled(schedule, due)

    def _start_scheduled(self, schedule: Schedule, due: float) -> None:
        mission = self.missions.get(schedule.mission_id)
        if mission is None:
            return
        if self.inhibits:
            self.events.publish(
                "schedule",
                {
                    "event": "suppressed",
                    "schedule": schedule.id,
                    "reason": "inhibited",
                    "monitors": sorted(self.inhibits),
                },
            )
            return
        if schedule.reorder_before_run:
            try:
                mission = reorder_tsp(mission, self.robot_node(), self.tmap)
            except Exception as exc:
                self.events.publish(
                    "schedule",
                    {"event": "reorder_failed", "schedule": schedule.id, "reason": str(exc)},
                )
        self.run_mission(mission, origin=SCHEDULE_ORIGIN + schedule.id)

    # -- monitors ----------------------------------------------------------------

    def system_snapshot(self, now: float) -> SystemSnapshot:
        return SystemSnapshot(
            now=now,
            battery=self.adapter.battery,
            docked=self.adapter.docked,
            busy=self.busy,
            inhibited=frozenset(self.inhibits),
            tmap=self.tmap,
            position=self.adapter.current_pose().translation,
        )

    def apply_monitor_effect(self, effect: MonitorEffect) -> None:
        if effect.kind == INHIBIT:
            self.inhibits[effect.monitor] = effect.reason
            self.events.publish(
                "monitor", {"event": "inhibit", "monitor": effect.monitor, "reason": effect.reason}
            )
        elif effect.kind == UNINHIBIT:
            self.inhibits.pop(effect.monitor, None)
            self.events.publish(
                "monitor", {"event": "uninhibit", "monitor": effect.monitor, "reason": effect.reason}
            )
        elif effect.kind == ALERT:
            self.events.publish(
                "alert", {"event": "monitor_alert", "monitor": effect.monitor, "reason": effect.reason}
            )
        elif effect.kind == REQUEST_MISSION:
            self.events.publish(
                "monitor",
                {
                    "event": "request_mission",
                    "monitor": effect.monitor,
                    "reason": effect.reason,
                    "urgent": effect.urgent,
                },
            )
            if not self.busy:
                if effect.mission is not None:
                    self.run_mission(effect.mission, origin=MONITOR_ORIGIN + effect.monitor)
                return
            if self._pending_monitor is None or (
                effect.urgent and not self._pending_monitor.urgent
            ):
                self._pending_monitor = effect
            self._preempt_reason = f"{effect.monitor}: {effect.reason}"
            if effect.urgent:
                self._cancel.cancel(self._preempt_reason)

    # -- entity commands ------------------------------------------------------------

    def save_mission(self, mission: Mission) -> None:
        self.missions[mission.id] = mission
        self.store.save_mission(mission)

    def delete_mission(self, mission_id: str) -> None:
        self.store.delete_mission(mission_id)
        self.missions.pop(mission_id, None)

    def save_schedule(self, schedule: Schedule) -> None:
        if schedule.mission_id not in self.missions:
            raise NotFound(f"schedule references unknown mission {schedule.mission_id!r}")
        self.schedules[schedule.id] = schedule
        self.store.save_schedule(schedule)
        self.scheduler.forget(schedule.id)
        self.events.publish(
            "schedule", {"event": "saved", "schedule": schedule.id, "enabled": schedule.enabled}
        )

    def delete_schedule(self, schedule_id: str) -> None:
        self.store.delete_schedule(schedule_id)
        self.schedules.pop(schedule_id, None)
        self.scheduler.forget(schedule_id)
        self.events.publish("schedule", {"event": "deleted", "schedule": schedule_id})

    def set_schedule_enabled(self, schedule_id: str, enabled: bool) -> Schedule:
        schedule = self.schedules.get(schedule_id)
        if schedule is None:
            raise NotFound(f"schedule {schedule_id!r} not found")
        schedule = replace(schedule, enabled=enabled)
        self.schedules[schedule_id] = schedule
        self.store.save_schedule(schedule)
        self.scheduler.forget(schedule_id)
        self.events.publish(
            "schedule",
            {"event": "enabled" if enabled else "disabled", "schedule": schedule_id},
        )
        return schedule

    def register_action(self, registration, inline_handler=None) -> None:
        self.registry.register(registration, inline_handler=inline_handler)
        self.store.save_registry(self.registry.to_document())

    def log_intervention(self, record: InterventionRecord) -> None:
        self.interventions.append(record)
        self.store.append_intervention(record)
        self.events.publish(
            "alert",
            {
                "event": "intervention",
                "category": record.category,
                "description": record.description,
                "operator": record.operator,
            },
        )

    def mtbi(self, window_hours: float, end: float | None = None) -> float | None:
        return compute_mtbi(self.interventions, window_hours, end=end)

    def state_summary(self) -> dict:
        return {
            "map_version": self.tmap.version,
            "busy": self.busy,
            "inhibits": dict(self.inhibits),
            "battery": self.adapter.battery,
            "docked": self.adapter.docked,
            "pose": self.adapter.current_pose().to_document(),
            "last_seq": self.events.last_seq,
            "missions": sorted(self.missions),
            "schedules": sorted(self.schedules),
        }
