"""Grid path planning (A* over 8-connected cells) and a kinematic motion model."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import Pose2D, angle_diff
from .gridmap import CellState, OccupancyGrid

DEFAULT_SPEED = 0.5        # m/s
DEFAULT_TURN_RATE = 1.0    # rad/s
DEFAULT_INFLATION = 0.3    # m

REACHED = "Reached"
UNREACHABLE = "Unreachable"
BLOCKED = "Blocked"

_SQRT2 = math.sqrt(2.0)
_NEIGHBORS = [(-1, -1, _SQRT2), (0, -1, 1.0), (1, -1, _SQRT2),
              (-1, 0, 1.0), (1, 0, 1.0),
              (-1, 1, _SQRT2), (0, 1, 1.0), (1, 1, _SQRT2)]


@dataclass
class NavResult:
    outcome: str
    path: list            # list[Pose2D], cells actually walked
    elapsed: float        # simulated seconds

    def __post_init__(self):
        if self.elapsed < 0:
            raise ValueError("negative elapsed time")
        if self.outcome in (REACHED, BLOCKED) and not self.path:
            raise ValueError(f"{self.outcome} result with empty path")
        if self.outcome == UNREACHABLE and self.path:
            raise ValueError("Unreachable result with a path")


def traversable_mask(grid: OccupancyGrid, inflation: float = DEFAULT_INFLATION) -> np.ndarray:
    """Open cells whose center is farther than `inflation` from every Occupied
    cell center (center-to-center metric). Cached per grid revision."""
    key = (len(grid.change_log), inflation)
    cached = getattr(grid, "_trav_cache", None)
    if cached is not None and cached[0] == key:
        return cached[1]
    states = grid.state_array()
    occ = states == int(CellState.OCCUPIED)
    free = states == int(CellState.OPEN)
    if not occ.any():
        mask = free
    else:
        dist = ndimage.distance_transform_edt(~occ) * grid.resolution
        mask = free & (dist > inflation)
    grid._trav_cache = (key, mask)
    return mask


def plan(grid: OccupancyGrid, start: Pose2D, goal: Pose2D,
         inflation: float = DEFAULT_INFLATION,
         mask: np.ndarray | None = None):
    """Shortest 8-connected path as [Pose2D, ...], or None when unreachable.

    Cell step costs are Euclidean (resolution-scaled); the octile heuristic is
    consistent, so costs match a uniform-cost search exactly. The start cell is
    always allowed (the robot may need to escape the inflation band).
    """
    if mask is None:
        mask = traversable_mask(grid, inflation)
    s = grid.world_to_cell(start.x, start.y)
    g = grid.world_to_cell(goal.x, goal.y)
    if not grid.in_bounds(*s) or not grid.in_bounds(*g):
        return None
    if not mask[g[1], g[0]]:
        return None
    if s == g:
        return [Pose2D(*grid.cell_center(*s), start.heading)]

    res = grid.resolution

    def h(c):
        dx, dy = abs(c[0] - g[0]), abs(c[1] - g[1])
        return (max(dx, dy) + (_SQRT2 - 1.0) * min(dx, dy)) * res

    dist = {s: 0.0}
    parent = {}
    pq = [(h(s), s)]
    closed = set()
    while pq:
        f, c = heapq.heappop(pq)
        if c in closed:
            continue
        if c == g:
            break
        closed.add(c)
        cx, cy = c
        for dx, dy, w in _NEIGHBORS:
            nb = (cx + dx, cy + dy)
            if not grid.in_bounds(*nb) or not mask[nb[1], nb[0]]:
                continue
            nd = dist[c] + w * res
            if nd < dist.get(nb, math.inf) - 1e-12:
                dist[nb] = nd
                parent[nb] = c
                heapq.heappush(pq, (nd + h(nb), nb))
    if g not in dist:
        return None

    cells = [g]
    while cells[-1] != s:
        cells.append(parent[cells[-1]])
    cells.reverse()
    path = []
    prev_heading = start.heading
    for i, c in enumerate(cells):
        x, y = grid.cell_center(*c)
        if i + 1 < len(cells):
            nx, ny = grid.cell_center(*cells[i + 1])
            heading = math.atan2(ny - y, nx - x)
        else:
            heading = prev_heading
        path.append(Pose2D(x, y, heading))
        prev_heading = heading
    path[-1].heading = goal.heading if len(cells) > 1 else start.heading
    return path


def path_cost(path) -> float:
    return sum(path[i].distance_to(path[i + 1]) for i in range(len(path) - 1))


def execute(path, speed: float = DEFAULT_SPEED, turn_rate: float = DEFAULT_TURN_RATE,
            grid: OccupancyGrid | None = None,
            inflation: float = DEFAULT_INFLATION) -> NavResult:
    """elapsed = sum(segment/speed) + sum(|heading change|/turn_rate).

    With a grid, each upcoming cell is re-checked against the (possibly
    updated) traversable mask; a violation stops execution with Blocked.
    """
    if not path:
        raise ValueError("empty path")
    mask = traversable_mask(grid, inflation) if grid is not None else None
    elapsed = 0.0
    walked = [path[0]]
    heading = path[0].heading
    for i in range(1, len(path)):
        a, b = path[i - 1], path[i]
        bearing = math.atan2(b.y - a.y, b.x - a.x)
        if grid is not None:
            c = grid.world_to_cell(b.x, b.y)
            if not grid.in_bounds(*c) or not mask[c[1], c[0]]:
                return NavResult(BLOCKED, walked, elapsed)
        elapsed += abs(angle_diff(bearing, heading)) / turn_rate
        elapsed += a.distance_to(b) / speed
        heading = bearing
        walked.append(b)
    return NavResult(REACHED, walked, elapsed)


def dijkstra_field(grid: OccupancyGrid, start: Pose2D,
                   inflation: float = DEFAULT_INFLATION,
                   mask: np.ndarray | None = None) -> np.ndarray:
    """(h, w) shortest-path distance in meters from start; inf = unreachable.

    Same metric as plan(); used for nearest-goal selection in one sweep.
    """
    if mask is None:
        mask = traversable_mask(grid, inflation)
    s = grid.world_to_cell(start.x, start.y)
    out = np.full((grid.height, grid.width), np.inf)
    if not grid.in_bounds(*s):
        return out
    res = grid.resolution
    out[s[1], s[0]] = 0.0
    pq = [(0.0, s)]
    while pq:
        d, c = heapq.heappop(pq)
        if d > out[c[1], c[0]] + 1e-12:
            continue
        cx, cy = c
        for dx, dy, w in _NEIGHBORS:
            nb = (cx + dx, cy + dy)
            if not grid.in_bounds(*nb) or not mask[nb[1], nb[0]]:
                continue
            nd = d + w * res
            if nd < out[nb[1], nb[0]] - 1e-12:
                out[nb[1], nb[0]] = nd
                heapq.heappush(pq, (nd, nb))
    return out
