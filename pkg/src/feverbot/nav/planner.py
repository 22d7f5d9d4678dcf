"""8-connected A* over the inflated costmap."""
from __future__ import annotations

import heapq
import math
from typing import Optional

import numpy as np

from ..world import Pose2D
from .grid import OccupancyGrid, PlannerParams, cell_costs

SQRT2 = math.sqrt(2.0)
MOVES = ((1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
         (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2))


class PlanningError(Exception):
    pass


class NoPath(PlanningError):
    pass


class InvalidStart(PlanningError):
    pass


class InvalidGoal(PlanningError):
    pass


def astar(cost: np.ndarray, lethal: np.ndarray, start: tuple, goal: tuple,
          neutral_cost: float) -> tuple:
    """A* between (ix, iy) cells. Returns (cells, total_cost).

    Edge weight is the move length (1 or sqrt 2, in cells) times the mean of
    the two endpoint cell costs. The heuristic, Euclidean cell distance times
    ``neutral_cost``, is consistent because no cell costs less than that.
    """
    h, w = cost.shape
    c = cost.ravel().tolist()
    blocked = lethal.ravel().tolist()
    s = start[1] * w + start[0]
    g_idx = goal[1] * w + goal[0]
    gx, gy = goal

    def heur(ix, iy):
        return neutral_cost * math.hypot(ix - gx, iy - gy)

    g = {s: 0.0}
    parent = {s: -1}
    tie = 0
    heap = [(heur(*start), 0.0, tie, s)]
    while heap:
        _, gu, _, u = heapq.heappop(heap)
        if gu > g[u]:
            continue  # stale entry
        if u == g_idx:
            break
        uy, ux = divmod(u, w)
        cu = c[u]
        for dx, dy, length in MOVES:
            vx, vy = ux + dx, uy + dy
            if vx < 0 or vy < 0 or vx >= w or vy >= h:
                continue
            v = vy * w + vx
            if blocked[v]:
                continue
            nd = gu + length * (cu + c[v]) / 2.0
            if nd < g.get(v, math.inf):
                g[v] = nd
                parent[v] = u
                tie += 1
                heapq.heappush(heap, (nd + heur(vx, vy), nd, tie, v))
    else:
        raise NoPath(f"no path from {start} to {goal}")
    cells = []
    u = g_idx
    while u != -1:
        uy, ux = divmod(u, w)
        cells.append((ux, uy))
        u = parent[u]
    cells.reverse()
    return cells, g[g_idx]


def path_cost(cells, cost: np.ndarray) -> float:
    total = 0.0
    for (ax, ay), (bx, by) in zip(cells, cells[1:]):
        length = SQRT2 if ax != bx and ay != by else 1.0
        total += length * (cost[ay, ax] + cost[by, bx]) / 2.0
    return total


def _check_endpoint(grid, lethal, pose, err):
    ix, iy = grid.world_to_cell(pose.x, pose.y)
    if not grid.in_bounds(ix, iy):
        raise err(f"({pose.x:.2f}, {pose.y:.2f}) is outside the map")
    if lethal[iy, ix]:
        raise err(f"({pose.x:.2f}, {pose.y:.2f}) is in a lethal cell")
    return ix, iy


def plan_cells(grid: OccupancyGrid, params: PlannerParams, start: Pose2D, goal: Pose2D,
               costmap: Optional[tuple] = None) -> tuple:
    """Like :func:`plan_global` but returns (cells, cost) in grid coordinates."""
    cost, lethal = costmap if costmap is not None else cell_costs(grid, params)
    s = _check_endpoint(grid, lethal, start, InvalidStart)
    t = _check_endpoint(grid, lethal, goal, InvalidGoal)
    if s == t:
        return [s], 0.0
    return astar(cost, lethal, s, t, params.neutral_cost)


def plan_global(grid: OccupancyGrid, params: PlannerParams, start: Pose2D, goal: Pose2D,
                costmap: Optional[tuple] = None) -> list:
    """Cell-center waypoints from start to goal.

    Raises InvalidStart / InvalidGoal when an endpoint is off the map or lethal,
    NoPath when the goal cannot be reached.
    """
    cells, _ = plan_cells(grid, params, start, goal, costmap)
    pts = [grid.cell_center(ix, iy) for ix, iy in cells]
    out = []
    for i, (x, y) in enumerate(pts):
        if i + 1 < len(pts):
            nx, ny = pts[i + 1]
            theta = math.atan2(ny - y, nx - x)
        else:
            theta = goal.theta
        out.append(Pose2D(x, y, theta))
    return out
