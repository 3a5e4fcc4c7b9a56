"""Missions: ordered tasks at map nodes, visit-order optimisation, execution.

A task pairs a map node with an action; a mission is an ordered task list
plus a policy for what happens after a failure. Execution walks the graph to
each task node, runs the action, and emits a status event at every
transition, producing a durable record at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from . import actions as actions_mod
from . import tsp
from .errors import (
    InvalidInput,
    NavigationAborted,
    NoPath,
    NotFound,
    ParseError,
    UnreachableTask,
)
from .navigation import SUCCEEDED as HOP_SUCCEEDED
from .navigation import CancelToken, navigate_to, plan_path
from .topomap import TopologicalMap

PENDING = "pending"
NAVIGATING = "navigating"
EXECUTING = "executing"
SUCCEEDED = "succeeded"
FAILED = "failed"
SKIPPED = "skipped"
TASK_STATUSES = (PENDING, NAVIGATING, EXECUTING, SUCCEEDED, FAILED, SKIPPED)

COMPLETED = "completed"
PARTIAL = "partial"
ABORTED = "aborted"
PREEMPTED = "preempted"
OUTCOMES = (COMPLETED, PARTIAL, ABORTED, PREEMPTED)

CONTINUE_REMAINING = "continue_remaining"
ABORT = "abort"
FAILURE_POLICIES = (CONTINUE_REMAINING, ABORT)

# status rank for the monotone-progress invariant
_RANK = {PENDING: 0, NAVIGATING: 1, EXECUTING: 2, SUCCEEDED: 3, FAILED: 3, SKIPPED: 3}


@dataclass(frozen=True)
class Task:
    node: str
    action: actions_mod.ActionSpec
    label: str = ""

    def to_document(self) -> dict:
        return {"node": self.node, "label": self.label, "action": self.action.to_document()}

    @staticmethod
    def from_document(doc: dict) -> "Task":
        try:
            return Task(
                node=str(doc["node"]),
                action=actions_mod.ActionSpec.from_document(doc["action"]),
                label=str(doc.get("label", "")),
            )
        except KeyError as exc:
            raise ParseError(f"task document missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed task document: {exc}") from exc


@dataclass(frozen=True)
class Mission:
    id: str
    name: str
    tasks: tuple[Task, ...] = ()
    failure_policy: str = CONTINUE_REMAINING

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("mission id must be non-empty")
        if self.failure_policy not in FAILURE_POLICIES:
            raise InvalidInput(f"unknown failure policy {self.failure_policy!r}")

    def to_document(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "failure_policy": self.failure_policy,
            "tasks": [t.to_document() for t in self.tasks],
        }

    @staticmethod
    def from_document(doc: dict) -> "Mission":
        try:
            return Mission(
                id=str(doc["id"]),
                name=str(doc.get("name", doc["id"])),
                tasks=tuple(Task.from_document(t) for t in doc.get("tasks", [])),
                failure_policy=str(doc.get("failure_policy", CONTINUE_REMAINING)),
            )
        except KeyError as exc:
            raise ParseError(f"mission document missing {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed mission document: {exc}") from exc


@dataclass
class MissionRecord:
    mission_id: str
    name: str
    origin: str
    started_at: float
    ended_at: float
    task_statuses: list[str]
    distance_walked: float
    outcome: str

    def to_document(self) -> dict:
        return {
            "mission": self.mission_id,
            "name": self.name,
            "origin": self.origin,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "task_statuses": list(self.task_statuses),
            "distance_walked": self.distance_walked,
            "outcome": self.outcome,
        }

    @staticmethod
    def from_document(doc: dict) -> "MissionRecord":
        try:
            return MissionRecord(
                mission_id=str(doc["mission"]),
                name=str(doc.get("name", "")),
                origin=str(doc.get("origin", "operator")),
                started_at=float(doc["started_at"]),
                ended_at=float(doc["ended_at"]),
                task_statuses=[str(s) for s in doc["task_statuses"]],
                distance_walked=float(doc["distance_walked"]),
                outcome=str(doc["outcome"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed mission record: {exc}") from exc


@dataclass
class ExecutionEnv:
    """Everything mission execution needs from the surrounding system."""

    map_provider: object  # callable -> TopologicalMap
    adapter: object
    actions: actions_mod.ActionExecutor
    now: object  # callable -> float
    events: object = None
    cancel: CancelToken = field(default_factory=CancelToken)
    preempt_requested: object = None  # callable -> reason str or None
    origin: str = "operator"


def _walked_distance(outcomes, tmap: TopologicalMap) -> float:
    total = 0.0
    for outcome in outcomes:
        if outcome.status != HOP_SUCCEEDED:
            continue
        edge = outcome.edge
        if tmap.has_node(edge.source) and tmap.has_node(edge.target):
            total += tmap.euclidean(edge.source, edge.target)
    return total


def execute_mission(mission: Mission, env: ExecutionEnv) -> MissionRecord:
    """Run tasks in order: navigate, act, repeat; honour policy and preemption.

    A soft preemption request is honoured between tasks; a cancelled token
    interrupts the task in flight, which then records a failed status. Tasks
    never executed stay pending under preemption but are marked skipped when
    the failure policy aborts the mission.
    """
    statuses = [PENDING] * len(mission.tasks)
    started_at = env.now()
    preempted = False
    aborted = False
    distance = 0.0

    def emit_mission(event: str, **payload) -> None:
        if env.events is not None:
            env.events.publish(
                "mission",
                dict(payload, event=event, mission=mission.id, name=mission.name, origin=env.origin),
            )

    def set_status(index: int, status: str, **payload) -> None:
        assert _RANK[status] > _RANK[statuses[index]], "task status must progress"
        statuses[index] = status
        if env.events is not None:
            task = mission.tasks[index]
            env.events.publish(
                "task",
                dict(
                    payload,
                    mission=mission.id,
                    task=index,
                    node=task.node,
                    label=task.label,
                    status=status,
                ),
            )

    emit_mission("started", tasks=len(mission.tasks))

    for index, task in enumerate(mission.tasks):
        if env.cancel.cancelled:
            preempted = True
            break
        if env.preempt_requested is not None:
            reason = env.preempt_requested()
            if reason:
                emit_mission("preempting", reason=reason)
                preempted = True
                break

        set_status(index, NAVIGATING)
        failure = None
        try:
            report = navigate_to(
                env.map_provider, env.adapter, task.node, events=env.events, cancel=env.cancel
            )
            distance += _walked_distance(report.outcomes, env.map_provider())
            if not report.reached:
                failure = "no_path"
        except NotFound:
            failure = "node_missing"
        except NavigationAborted as exc:
            distance += _walked_distance(exc.report.outcomes, env.map_provider())
            if env.cancel.cancelled:
                set_status(index, FAILED, reason="interrupted")
                preempted = True
                break
            failure = "navigation_aborted"

        if failure is None:
            set_status(index, EXECUTING)
            result = env.actions.execute(task.action, mission.id, index, cancel=env.cancel)
            if result.status == actions_mod.SUCCEEDED:
                set_status(index, SUCCEEDED, payload=result.payload, duration=result.duration)
            elif result.status == actions_mod.CANCELLED:
                set_status(index, FAILED, reason="interrupted")
                preempted = True
                break
            else:
                failure = f"action_{result.status}"

        if failure is not None:
            set_status(index, FAILED, reason=failure)
            if mission.failure_policy == ABORT:
                for rest in range(index + 1, len(mission.tasks)):
                    set_status(rest, SKIPPED)
                aborted = True
                break

    if preempted:
        outcome = PREEMPTED
    elif aborted:
        outcome = ABORTED
    elif any(s == FAILED for s in statuses):
        outcome = PARTIAL
    else:
        outcome = COMPLETED

    record = MissionRecord(
        mission_id=mission.id,
        name=mission.name,
        origin=env.origin,
        started_at=started_at,
        ended_at=env.now(),
        task_statuses=statuses,
        distance_walked=distance,
        outcome=outcome,
    )
    emit_mission("finished", outcome=outcome, distance_walked=distance)
    return record


def _travel_cost(tmap: TopologicalMap, source: str, target: str) -> float:
    if source == target:
        return 0.0
    try:
        return plan_path(tmap, source, target).total_cost
    except NoPath:
        return math.inf


def reorder_tsp(mission: Mission, start: str, tmap: TopologicalMap) -> Mission:
    """Reorder tasks to minimise walking from ``start`` through all of them.

    Travel costs come from fresh shortest-path queries against the given
    map. The result never costs more than the input order; the input mission
    is left untouched.
    """
    tmap.node(start)
    if len(mission.tasks) <= 1:
        return mission

    nodes = [t.node for t in mission.tasks]
    offenders = sorted(
        {node for node in nodes if math.isinf(_travel_cost(tmap, start, node))}
    )
    if offenders:
        raise UnreachableTask(f"task nodes unreachable from {start!r}", offenders=offenders)

    start_costs = [_travel_cost(tmap, start, node) for node in nodes]
    pair_costs = [[_travel_cost(tmap, a, b) for b in nodes] for a in nodes]
    order = tsp.solve_open_path(start_costs, pair_costs)

    original = tuple(range(len(nodes)))
    if tsp.path_cost(order, start_costs, pair_costs) >= tsp.path_cost(
        original, start_costs, pair_costs
    ) and order != original:
        order = original
    return replace(mission, tasks=tuple(mission.tasks[i] for i in order))
