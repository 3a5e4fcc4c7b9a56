"""Shortest-path planning and route execution with autonomous rerouting.

Planning uses only active edges. Ties between equal-cost routes are broken by
hop count, then by the lexicographic order of the edge keys along the route,
so plans are reproducible.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .errors import NavigationAborted, NoPath, NotFound
from .topomap import Edge, TopologicalMap, nearest_node


@dataclass(frozen=True)
class Route:
    start: str
    goal: str
    hops: tuple[Edge, ...] = ()
    total_cost: float = 0.0


@dataclass
class NavigationPolicy:
    goal: str
    next_hop: dict  # node id -> Edge or None when unreachable
    cost_to_goal: dict  # node id -> float


@dataclass(frozen=True)
class TraversalOutcome:
    edge: Edge
    status: str  # succeeded | blocked | aborted
    duration: float = 0.0


@dataclass
class NavigationReport:
    goal: str
    reached: bool = False
    outcomes: list = field(default_factory=list)
    edges_deactivated: list = field(default_factory=list)


SUCCEEDED = "succeeded"
BLOCKED = "blocked"
ABORTED = "aborted"


def _usable_edges(tmap: TopologicalMap, node_id: str, masked: set) -> list[Edge]:
    edges = [e for e in tmap.edges_from(node_id) if e.active and e.key() not in masked]
    return sorted(edges, key=Edge.key)


def plan_path(tmap: TopologicalMap, start: str, goal: str, masked: set | None = None) -> Route:
    """Minimum-cost route over active edges; deterministic tie-breaking."""
    tmap.node(start)
    tmap.node(goal)
    masked = masked or set()
    if start == goal:
        return Route(start, goal, (), 0.0)

    # Dijkstra with labels (cost, hops, path-key) so ties resolve identically
    # on every run.
    best: dict[str, tuple] = {}
    heap = [((0.0, 0, ()), start, ())]
    while heap:
        label, node, hops = heapq.heappop(heap)
        if node in best and best[node] <= label:
            continue
        best[node] = label
        if node == goal:
            return Route(start, goal, hops, label[0])
        cost, nhops, pathkey = label
        for edge in _usable_edges(tmap, node, masked):
            cand = (cost + edge.cost, nhops + 1, pathkey + (edge.key(),))
            if edge.target in best and best[edge.target] <= cand:
                continue
            heapq.heappush(heap, (cand, edge.target, hops + (edge,)))
    raise NoPath(f"no active path {start} -> {goal}")


def compute_policy(tmap: TopologicalMap, goal: str) -> NavigationPolicy:
    """Per-node next edge towards `goal` along some minimum-cost path."""
    tmap.node(goal)
    # Dijkstra over reversed edges from the goal gives cost-to-goal labels;
    # hops participate so zero-cost edges cannot form next-hop cycles.
    incoming: dict[str, list[Edge]] = {}
    for e in tmap.edges:
        if e.active:
            incoming.setdefault(e.target, []).append(e)
    dist: dict[str, tuple[float, int]] = {}
    heap = [((0.0, 0), goal)]
    while heap:
        label, node = heapq.heappop(heap)
        if node in dist and dist[node] <= label:
            continue
        dist[node] = label
        cost, hops = label
        for e in sorted(incoming.get(node, ()), key=Edge.key):
            cand = (cost + e.cost, hops + 1)
            if e.source in dist and dist[e.source] <= cand:
                continue
            heapq.heappush(heap, (cand, e.source))

    next_hop: dict[str, Edge | None] = {}
    costs: dict[str, float] = {}
    for node in tmap.nodes:
        if node.id == goal:
            next_hop[node.id] = None
            costs[node.id] = 0.0
            continue
        if node.id not in dist:
            next_hop[node.id] = None
            continue
        best_edge = None
        best_label = None
        for e in sorted(tmap.edges_from(node.id), key=Edge.key):
            if not e.active or e.target not in dist:
                continue
            tc, th = dist[e.target]
            label = (e.cost + tc, th + 1, e.key())
            if best_label is None or label < best_label:
                best_label = label
                best_edge = e
        next_hop[node.id] = best_edge
        costs[node.id] = dist[node.id][0]
    return NavigationPolicy(goal, next_hop, costs)


class CancelToken:
    """Cooperative cancellation flag shared by navigation and actions."""

    def __init__(self):
        self._cancelled = False
        self.reason = ""

    def cancel(self, reason: str = "") -> None:
        self._cancelled = True
        self.reason = reason or self.reason

    @property
    def cancelled(self) -> bool:
        return self._cancelled


def navigate_to(
    map_provider,
    adapter,
    goal: str,
    *,
    events=None,
    cancel: CancelToken | None = None,
    max_replans: int = 10,
) -> NavigationReport:
    """Walk the robot to `goal`, rerouting around blocked edges.

    Blockages deactivate the offending edge in a call-local overlay only; the
    shared map is never touched and the overlay dies with this call. Replans
    re-read `map_provider`, so operator edits take effect at replan time.
    """
    cancel = cancel or CancelToken()
    report = NavigationReport(goal=goal)
    overlay: set = set()
    replans = 0

    def emit(kind, **payload):
        if events is not None:
            events.publish("navigation", dict(payload, event=kind, goal=goal))

    tmap = map_provider()
    tmap.node(goal)
    current = nearest_node(tmap, adapter.current_pose().translation)

    while True:
        if cancel.cancelled:
            emit("goal_failed", reason="cancelled")
            raise NavigationAborted("navigation cancelled", report=report)
        tmap = map_provider()
        if not tmap.has_node(goal):
            emit("goal_failed", reason="goal removed from map")
            raise NotFound(f"goal {goal!r} no longer in map")
        try:
            route = plan_path(tmap, current, goal, masked=overlay)
        except NoPath:
            emit("goal_failed", reason="no path", map_version=tmap.version)
            return report
        emit(
            "route_planned",
            map_version=tmap.version,
            hops=[list(e.key()) for e in route.hops],
            total_cost=route.total_cost,
        )

        rerouted = False
        for hop in route.hops:
            if cancel.cancelled:
                emit("goal_failed", reason="cancelled")
                raise NavigationAborted("navigation cancelled", report=report)
            if getattr(adapter, "docked", False):
                adapter.undock()
            emit("hop_started", edge=list(hop.key()))
            outcome = adapter.traverse(hop, cancel=cancel)
            report.outcomes.append(outcome)
            emit("hop_finished", edge=list(hop.key()), status=outcome.status,
                 duration=outcome.duration)
            if outcome.status == SUCCEEDED:
                current = hop.target
                continue
            if outcome.status == BLOCKED:
                overlay.add(hop.key())
                report.edges_deactivated.append(hop)
                emit("edge_deactivated", edge=list(hop.key()))
                replans += 1
                if replans > max_replans:
                    emit("goal_failed", reason="replan limit")
                    raise NavigationAborted(
                        f"gave up after {max_replans} replans", report=report
                    )
                current = hop.source
                rerouted = True
                break
            # aborted traversal: interrupt or adapter failure
            emit("goal_failed", reason=f"traversal aborted: {cancel.reason or 'adapter'}")
            raise NavigationAborted("traversal aborted", report=report)
        if rerouted:
            continue
        report.reached = True
        emit("goal_reached", map_version=tmap.version)
        return report
