"""Open-path travelling-salesperson solvers over an explicit cost matrix.

The path starts at a fixed origin, visits every stop exactly once, and does
not return. Instances up to the exact-solver limit are solved optimally by
dynamic programming over visited subsets; larger ones fall back to nearest
neighbour refined by 2-opt. Costs may be asymmetric, so candidate paths are
always evaluated at full cost rather than by local deltas.
"""

from __future__ import annotations

import math

EXACT_LIMIT = 12


def path_cost(order, start_costs, pair_costs) -> float:
    if not order:
        return 0.0
    total = start_costs[order[0]]
    for a, b in zip(order, order[1:]):
        total += pair_costs[a][b]
    return total


def _held_karp(start_costs, pair_costs) -> tuple[int, ...]:
    n = len(start_costs)
    full = (1 << n) - 1
    # dp[(mask, last)] = cheapest cost visiting `mask` and ending at `last`;
    # strict-less updates with ascending indices keep ties deterministic.
    dp: dict[tuple[int, int], float] = {}
    parent: dict[tuple[int, int], int] = {}
    for i in range(n):
        dp[(1 << i, i)] = start_costs[i]
        parent[(1 << i, i)] = -1
    for mask in range(1, full + 1):
        for last in range(n):
            key = (mask, last)
            if key not in dp or not mask & (1 << last):
                continue
            base = dp[key]
            if math.isinf(base):
                continue
            for nxt in range(n):
                if mask & (1 << nxt):
                    continue
                cand = base + pair_costs[last][nxt]
                nkey = (mask | (1 << nxt), nxt)
                if cand < dp.get(nkey, math.inf):
                    dp[nkey] = cand
                    parent[nkey] = last

    best_last = -1
    best_cost = math.inf
    for last in range(n):
        cost = dp.get((full, last), math.inf)
        if cost < best_cost:
            best_cost = cost
            best_last = last
    if best_last < 0:
        return tuple(range(n))

    order = []
    mask, last = full, best_last
    while last >= 0:
        order.append(last)
        prev = parent[(mask, last)]
        mask &= ~(1 << last)
        last = prev
    order.reverse()
    return tuple(order)


def _nearest_neighbour(start_costs, pair_costs) -> list[int]:
    n = len(start_costs)
    unvisited = set(range(n))
    order: list[int] = []
    current = -1
    while unvisited:
        if current < 0:
            nxt = min(unvisited, key=lambda i: (start_costs[i], i))
        else:
            nxt = min(unvisited, key=lambda i: (pair_costs[current][i], i))
        order.append(nxt)
        unvisited.remove(nxt)
        current = nxt
    return order


def _two_opt(order, start_costs, pair_costs) -> list[int]:
    best = list(order)
    best_cost = path_cost(best, start_costs, pair_costs)
    improved = True
    while improved:
        improved = False
        for i in range(len(best) - 1):
            for j in range(i + 1, len(best)):
                cand = best[:i] + best[i : j + 1][::-1] + best[j + 1 :]
                cost = path_cost(cand, start_costs, pair_costs)
                if cost < best_cost - 1e-12:
                    best, best_cost = cand, cost
                    improved = True
    return best


def solve_open_path(start_costs, pair_costs) -> tuple[int, ...]:
    """Visit order (indices into the cost arrays) minimising total cost.

    Exact for instances up to EXACT_LIMIT stops, heuristic beyond; the
    heuristic result never costs more than plain nearest neighbour.
    """
    n = len(start_costs)
    if n <= 1:
        return tuple(range(n))
    if n <= EXACT_LIMIT:
        return _held_karp(start_costs, pair_costs)
    return tuple(_two_opt(_nearest_neighbour(start_costs, pair_costs), start_costs, pair_costs))
