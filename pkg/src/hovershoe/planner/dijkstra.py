"""8-connected Dijkstra over a costmap.

Edge weight for a move into cell ``c`` is ``step * (1 + cost[c] / 64)`` with
``step`` 1 or sqrt(2) (cell units).  Cells at or above ``blocked`` are not
entered.  The frontier is ordered by (distance, flat cell index), which fixes
tie-breaking; a predecessor is only replaced by a strictly shorter route.
"""
from __future__ import annotations

import heapq
import math

import numba
import numpy as np

from ..faults import Unreachable
from .costmap import INSCRIBED

COST_SCALE = 64.0
SQRT2 = math.sqrt(2.0)

# neighbour order is part of the determinism contract
_DI = np.array([-1, -1, -1, 0, 0, 1, 1, 1], dtype=np.int64)
_DJ = np.array([-1, 0, 1, -1, 1, -1, 0, 1], dtype=np.int64)


@numba.njit(cache=True)
def _search(cost, blocked, start, goal, di, dj):
    h, w = cost.shape
    n = h * w
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.bool_)
    dist[start] = 0.0
    heap = [(0.0, start)]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == goal:
            break
        ui = u // w
        uj = u - ui * w
        for k in range(8):
            vi = ui + di[k]
            vj = uj + dj[k]
            if vi < 0 or vi >= h or vj < 0 or vj >= w:
                continue
            c = cost[vi, vj]
            if c >= blocked:
                continue
            v = vi * w + vj
            if done[v]:
                continue
            step = 1.0 if di[k] == 0 or dj[k] == 0 else 1.4142135623730951
            nd = d + step * (1.0 + c / 64.0)
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, pred


def edge_weight(cost_to: float, diagonal: bool) -> float:
    return (SQRT2 if diagonal else 1.0) * (1.0 + cost_to / COST_SCALE)


def dijkstra_plan(cost, start, goal, blocked: float = INSCRIBED):
    """Minimum-cost 8-connected path of (row, col) cells from ``start`` to ``goal``.

    ``cost`` is a Costmap or a 2-D array.  Returns ``(path, total_cost)``.
    Raises :class:`Unreachable` if the goal cannot be reached.
    """
    arr = np.ascontiguousarray(getattr(cost, "cost", cost), dtype=np.float64)
    h, w = arr.shape
    for name, (i, j) in (("start", start), ("goal", goal)):
        if not (0 <= i < h and 0 <= j < w):
            raise Unreachable(f"{name} cell {(i, j)} outside the map")
        if arr[i, j] >= blocked:
            raise Unreachable(f"{name} cell {(i, j)} is in a lethal cell")
    s = start[0] * w + start[1]
    g = goal[0] * w + goal[1]
    dist, pred = _search(arr, float(blocked), s, g, _DI, _DJ)
    if not np.isfinite(dist[g]):
        raise Unreachable(f"goal {tuple(goal)} not connected to start {tuple(start)}")
    path = [g]
    while path[-1] != s:
        path.append(int(pred[path[-1]]))
    path.reverse()
    return [(p // w, p % w) for p in path], float(dist[g])


def path_cost(cost, path) -> float:
    """Sum of edge weights along a cell path (independent re-evaluation)."""
    arr = getattr(cost, "cost", cost)
    total = 0.0
    for (i0, j0), (i1, j1) in zip(path, path[1:]):
        if max(abs(i1 - i0), abs(j1 - j0)) != 1:
            raise ValueError("path cells are not 8-adjacent")
        total += edge_weight(float(arr[i1, j1]), i0 != i1 and j0 != j1)
    return total
