"""Independent brute-force reference implementations.

Everything here is deliberately naive: exhaustive enumeration, O(n^2) scans,
minute-by-minute calendars. The point is that none of it shares code or
cleverness with the package under test, so agreement is evidence. Do not
"optimise" these; their slowness is the feature.
"""

from __future__ import annotations

import itertools
import math
from datetime import datetime, timedelta
from zoneinfo import ZoneInfo

import numpy as np


# -- graphs -------------------------------------------------------------------


def exhaustive_min_path_cost(edges: dict, start: str, goal: str) -> float | None:
    """Minimum total cost over all simple paths, by full enumeration.

    ``edges`` maps (source, target) -> cost for directed edges. Returns None
    when no simple path exists. Exponential; keep graphs small.
    """
    if start == goal:
        return 0.0
    adjacency: dict[str, list[tuple[str, float]]] = {}
    for (a, b), cost in edges.items():
        adjacency.setdefault(a, []).append((b, cost))

    best: list[float | None] = [None]

    def visit(node: str, seen: frozenset, total: float) -> None:
        if node == goal:
            if best[0] is None or total < best[0]:
                best[0] = total
            return
        for nxt, cost in adjacency.get(node, ()):
            if nxt in seen:
                continue
            visit(nxt, seen | {nxt}, total + cost)

    visit(start, frozenset({start}), 0.0)
    return best[0]


def all_min_cost_paths(edges: dict, start: str, goal: str) -> list[tuple[str, ...]]:
    """Every simple path achieving the minimum cost (node sequences)."""
    adjacency: dict[str, list[tuple[str, float]]] = {}
    for (a, b), cost in edges.items():
        adjacency.setdefault(a, []).append((b, cost))
    results: list[tuple[tuple[str, ...], float]] = []

    def visit(node: str, seen: tuple, total: float) -> None:
        if node == goal:
            results.append((seen, total))
            return
        for nxt, cost in adjacency.get(node, ()):
            if nxt in seen:
                continue
            visit(nxt, seen + (nxt,), total + cost)

    visit(start, (start,), 0.0)
    if not results:
        return []
    best = min(total for _, total in results)
    return [path for path, total in results if math.isclose(total, best, abs_tol=1e-12)]


# -- open-path TSP ------------------------------------------------------------


def brute_force_open_tsp(start_costs: list[float], pair_costs: list[list[float]]) -> float:
    """Minimum open-path cost over all permutations (visit every index once)."""
    n = len(start_costs)
    best = math.inf
    for order in itertools.permutations(range(n)):
        total = start_costs[order[0]]
        for a, b in zip(order, order[1:]):
            total += pair_costs[a][b]
        best = min(best, total)
    return best


def greedy_nearest_route_cost(start_costs: list[float], pair_costs: list[list[float]]) -> float:
    """Cost of the always-pick-nearest-unvisited route (baseline heuristic)."""
    n = len(start_costs)
    unvisited = set(range(n))
    current = min(unvisited, key=lambda i: (start_costs[i], i))
    total = start_costs[current]
    unvisited.remove(current)
    while unvisited:
        nxt = min(unvisited, key=lambda i: (pair_costs[current][i], i))
        total += pair_costs[current][nxt]
        current = nxt
        unvisited.remove(nxt)
    return total


# -- schedules ----------------------------------------------------------------


def minute_scan_daily_fires(
    times: list[str],
    zone: str,
    start_ts: float,
    end_ts: float,
    weekdays_only: bool = False,
    weekdays: list[int] | None = None,
) -> list[float]:
    """All fire instants in (start_ts, end_ts], by scanning every UTC minute.

    A listed wall time fires at the first UTC minute whose local wall clock
    reads that HH:MM on that local date (so a repeated hour fires once, on
    the first pass). A wall time skipped by a forward clock jump fires at the
    first minute whose wall reading is past it on that date, which is the
    transition instant itself.
    """
    tz = ZoneInfo(zone)
    wanted = set(times)
    first_minute = math.floor(start_ts / 60.0) * 60.0 + 60.0
    fires: list[float] = []
    seen: set[tuple[str, str]] = set()  # (local date, listed time) already fired
    pending: dict[str, set[str]] = {}  # local date -> listed times not yet seen today
    t = first_minute
    prev_date = None
    prev_wall = None
    while t <= end_ts:
        local = datetime.fromtimestamp(t, tz)
        date_key = local.date().isoformat()
        day_ok = True
        if weekdays_only and local.weekday() >= 5:
            day_ok = False
        if weekdays is not None and local.weekday() not in weekdays:
            day_ok = False
        if date_key not in pending:
            pending[date_key] = set(wanted) if day_ok else set()
        wall = f"{local.hour:02d}:{local.minute:02d}"
        if wall in pending[date_key] and (date_key, wall) not in seen:
            seen.add((date_key, wall))
            pending[date_key].discard(wall)
            if t > start_ts:
                fires.append(t)
        elif prev_date == date_key and prev_wall is not None:
            # forward jump: wall times between prev_wall and wall never occur
            skipped = {
                listed for listed in pending[date_key] if prev_wall < listed < wall
            }
            for listed in sorted(skipped):
                seen.add((date_key, listed))
                pending[date_key].discard(listed)
                if t > start_ts:
                    fires.append(t)
        prev_date = date_key
        prev_wall = wall
        t += 60.0
    return sorted(set(fires))


def count_weekday_slots(start_day: str, end_day: str, slots_per_day: int) -> int:
    """Number of weekday slots in the inclusive local date range."""
    start = datetime.strptime(start_day, "%Y-%m-%d").date()
    end = datetime.strptime(end_day, "%Y-%m-%d").date()
    count = 0
    day = start
    while day <= end:
        if day.weekday() < 5:
            count += slots_per_day
        day += timedelta(days=1)
    return count


# -- point sets ---------------------------------------------------------------


def union_find_clusters(points: np.ndarray, tolerance: float) -> list[set[int]]:
    """Connected components under the pairwise-distance relation, O(n^2)."""
    n = len(points)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if np.linalg.norm(points[i] - points[j]) <= tolerance:
                parent[find(i)] = find(j)
    groups: dict[int, set[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return list(groups.values())


def brute_nearest_within(
    targets: np.ndarray, queries: np.ndarray, radius: float
) -> tuple[np.ndarray, np.ndarray]:
    """For each query, nearest target index within radius (else -1) and d^2."""
    idx = np.full(len(queries), -1, dtype=np.int64)
    d2 = np.full(len(queries), np.inf)
    for qi, q in enumerate(queries):
        dist2 = np.sum((targets - q) ** 2, axis=1)
        best = int(np.argmin(dist2))
        if dist2[best] <= radius * radius:
            idx[qi] = best
            d2[qi] = dist2[best]
    return idx, d2


def pairwise_pose_edges(positions: np.ndarray, threshold: float) -> set[tuple[int, int]]:
    """Directed index pairs a pose-graph import must connect."""
    n = len(positions)
    pairs: set[tuple[int, int]] = set()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            consecutive = abs(i - j) == 1
            near = np.linalg.norm(positions[i] - positions[j]) < threshold
            if consecutive or near:
                pairs.add((i, j))
    return pairs


def voxel_cells(points: np.ndarray, resolution: float) -> set[tuple[int, int, int]]:
    """Occupied integer cells for a world-origin-anchored grid."""
    cells = np.floor(np.asarray(points, dtype=float) / resolution).astype(np.int64)
    return {tuple(int(v) for v in row) for row in cells}
