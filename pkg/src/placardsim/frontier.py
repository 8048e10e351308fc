"""Expanding-wavefront frontier detection: incremental frontier maintenance,
blob clustering, pruning, and nearest-centroid goal selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D
from .gridmap import CellState, OccupancyGrid
from . import navigation

MIN_BLOB_CELLS = 10

_N8 = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]


class FrontierError(Exception):
    pass


@dataclass
class FrontierBlob:
    cells: frozenset          # {(ix, iy), ...}
    centroid: Pose2D          # meters, map frame

    def __len__(self):
        return len(self.cells)


@dataclass
class FrontierCache:
    """Explored-space memory: next detection pass only touches cells whose
    classification changed since the previous call."""

    frontier_cells: set = field(default_factory=set)
    log_cursor: int = 0
    primed: bool = False


def _is_frontier(grid: OccupancyGrid, ix: int, iy: int) -> bool:
    if grid.state(ix, iy) != CellState.OPEN:
        return False
    for dx, dy in _N8:
        nb = (ix + dx, iy + dy)
        if grid.in_bounds(*nb) and grid.state(*nb) == CellState.UNEXPLORED:
            return True
    return False


def detect_frontiers(grid: OccupancyGrid, seed: Pose2D,
                     cache: FrontierCache,
                     min_blob_cells: int = MIN_BLOB_CELLS) -> list[FrontierBlob]:
    """Frontier blobs (8-connected, pruned below min_blob_cells).

    The first call sweeps the whole grid; afterwards only cells recorded in the
    grid's classification change log (and their 8-neighborhoods) are
    re-examined, which is exactly the set of cells whose frontier status can
    have changed.
    """
    sc = grid.world_to_cell(seed.x, seed.y)
    if not grid.in_bounds(*sc) or grid.state(*sc) != CellState.OPEN:
        raise FrontierError(f"seed cell {sc} is not Open")

    if not cache.primed:
        cache.frontier_cells = {
            (ix, iy)
            for iy in range(grid.height)
            for ix in range(grid.width)
            if _is_frontier(grid, ix, iy)
        }
        cache.primed = True
        cache.log_cursor = len(grid.change_log)
    else:
        dirty = grid.change_log[cache.log_cursor:]
        cache.log_cursor = len(grid.change_log)
        stale = set()
        for (ix, iy) in dirty:
            stale.add((ix, iy))
            for dx, dy in _N8:
                nb = (ix + dx, iy + dy)
                if grid.in_bounds(*nb):
                    stale.add(nb)
        for c in stale:
            if _is_frontier(grid, *c):
                cache.frontier_cells.add(c)
            else:
                cache.frontier_cells.discard(c)

    return cluster_blobs(grid, cache.frontier_cells, min_blob_cells)


def cluster_blobs(grid: OccupancyGrid, frontier_cells: set,
                  min_blob_cells: int = MIN_BLOB_CELLS) -> list[FrontierBlob]:
    """8-connected components of the frontier set, pruned and sorted."""
    blobs = []
    remaining = set(frontier_cells)
    while remaining:
        root = remaining.pop()
        comp = {root}
        stack = [root]
        while stack:
            cx, cy = stack.pop()
            for dx, dy in _N8:
                nb = (cx + dx, cy + dy)
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    stack.append(nb)
        if len(comp) < min_blob_cells:
            continue
        xs = [grid.cell_center(ix, iy)[0] for ix, iy in comp]
        ys = [grid.cell_center(ix, iy)[1] for ix, iy in comp]
        blobs.append(FrontierBlob(frozenset(comp),
                                  Pose2D(sum(xs) / len(xs), sum(ys) / len(ys))))
    blobs.sort(key=lambda b: min(b.cells))
    return blobs


def snap_goal(grid: OccupancyGrid, blob: FrontierBlob) -> Pose2D:
    """Centroid, moved to the nearest Open cell inside the blob's bounding box
    when the centroid cell itself is not Open (concave blobs)."""
    c = grid.world_to_cell(blob.centroid.x, blob.centroid.y)
    if grid.in_bounds(*c) and grid.state(*c) == CellState.OPEN:
        return Pose2D(*grid.cell_center(*c))
    xs = [ix for ix, _ in blob.cells]
    ys = [iy for _, iy in blob.cells]
    best, best_d = None, math.inf
    for iy in range(min(ys), max(ys) + 1):
        for ix in range(min(xs), max(xs) + 1):
            if not grid.in_bounds(ix, iy) or grid.state(ix, iy) != CellState.OPEN:
                continue
            x, y = grid.cell_center(ix, iy)
            d = (x - blob.centroid.x) ** 2 + (y - blob.centroid.y) ** 2
            if d < best_d - 1e-12 or (abs(d - best_d) <= 1e-12 and (x, y) < (best.x, best.y)):
                best, best_d = Pose2D(x, y), d
    return best if best is not None else Pose2D(blob.centroid.x, blob.centroid.y)


def select_goal(blobs, robot: Pose2D, grid: OccupancyGrid | None = None,
                inflation: float = navigation.DEFAULT_INFLATION,
                metric: str = "path", exclude=()):
    """Snapped centroid of the blob with minimum distance from the robot.

    metric="path" uses grid shortest-path distance (Euclidean fallback for
    unreachable centroids); metric="euclidean" skips planning entirely.
    Ties break lexicographically on (x, y). Returns None when no blob is
    eligible.
    """
    candidates = []
    excluded = {(round(p.x, 6), round(p.y, 6)) for p in exclude}
    field_dist = None
    if metric == "path" and grid is not None:
        field_dist = navigation.dijkstra_field(grid, robot, inflation)
    for blob in blobs:
        goal = snap_goal(grid, blob) if grid is not None else blob.centroid
        if (round(goal.x, 6), round(goal.y, 6)) in excluded:
            continue
        d = math.hypot(goal.x - robot.x, goal.y - robot.y)
        if field_dist is not None:
            c = grid.world_to_cell(goal.x, goal.y)
            if grid.in_bounds(*c) and math.isfinite(field_dist[c[1], c[0]]):
                d = float(field_dist[c[1], c[0]])
        candidates.append((d, goal.x, goal.y, goal))
    if not candidates:
        return None
    candidates.sort(key=lambda t: (t[0], t[1], t[2]))
    return candidates[0][3]
