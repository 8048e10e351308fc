"""Occupancy grid built from simulated range scans (log-odds, tri-state cells)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .geometry import Pose2D
from .world import Floorplan


class CellState(IntEnum):
    UNEXPLORED = 0
    OPEN = 1
    OCCUPIED = 2


LOG_ODDS_HIT = 2.2       # endpoint evidence outweighs pass-through evidence
LOG_ODDS_MISS = -0.9
LOG_ODDS_CLAMP = 8.0

_STATE_CHARS = {CellState.UNEXPLORED: "?", CellState.OPEN: ".", CellState.OCCUPIED: "#"}
_CHAR_STATES = {v: k for k, v in _STATE_CHARS.items()}


class GridError(Exception):
    pass


@dataclass
class OccupancyGrid:
    """Row-major grid; cell (ix, iy) spans [origin + i*res, origin + (i+1)*res)."""

    resolution: float
    origin: Pose2D
    width: int
    height: int
    occupied_threshold: float = 0.5
    log_odds: np.ndarray = field(default=None, repr=False)
    observed: np.ndarray = field(default=None, repr=False)
    change_log: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.resolution <= 0:
            raise GridError("resolution must be positive")
        if self.log_odds is None:
            self.log_odds = np.zeros((self.height, self.width), dtype=float)
        if self.observed is None:
            self.observed = np.zeros((self.height, self.width), dtype=bool)

    @staticmethod
    def for_floorplan(fp: Floorplan, resolution: float = 0.5,
                      occupied_threshold: float = 0.5) -> "OccupancyGrid":
        xmin, ymin, xmax, ymax = fp.bounds
        w = int(math.ceil((xmax - xmin) / resolution))
        h = int(math.ceil((ymax - ymin) / resolution))
        return OccupancyGrid(resolution, Pose2D(xmin, ymin), w, h,
                             occupied_threshold=occupied_threshold)

    # -- cell math -----------------------------------------------------------

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin.x) / self.resolution)),
                int(math.floor((y - self.origin.y) / self.resolution)))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin.x + (ix + 0.5) * self.resolution,
                self.origin.y + (iy + 0.5) * self.resolution)

    def in_bounds(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height

    def likelihood(self, ix: int, iy: int) -> float:
        return 1.0 / (1.0 + math.exp(-self.log_odds[iy, ix]))

    def observed_count(self) -> int:
        return int(self.observed.sum())

    # -- state ----------------------------------------------------------------

    def state(self, ix: int, iy: int) -> CellState:
        if not self.in_bounds(ix, iy):
            raise GridError(f"cell ({ix}, {iy}) out of bounds")
        if not self.observed[iy, ix]:
            return CellState.UNEXPLORED
        if self.likelihood(ix, iy) >= self.occupied_threshold:
            return CellState.OCCUPIED
        return CellState.OPEN

    def state_array(self) -> np.ndarray:
        """(h, w) CellState values, vectorized."""
        lik = 1.0 / (1.0 + np.exp(-self.log_odds))
        s = np.where(lik >= self.occupied_threshold,
                     int(CellState.OCCUPIED), int(CellState.OPEN))
        s[~self.observed] = int(CellState.UNEXPLORED)
        return s

    # -- export ----------------------------------------------------------------

    def dumps(self) -> str:
        """Portable graymap-style text dump, one state character per cell."""
        s = self.state_array()
        rows = ["".join(_STATE_CHARS[CellState(v)] for v in s[iy])
                for iy in range(self.height)]
        header = (f"GRID {self.width} {self.height} {self.resolution!r} "
                  f"{self.origin.x!r} {self.origin.y!r}")
        return "\n".join([header] + rows) + "\n"

    @staticmethod
    def loads(text: str) -> "OccupancyGrid":
        lines = text.strip("\n").split("\n")
        parts = lines[0].split()
        if len(parts) != 6 or parts[0] != "GRID":
            raise GridError("bad grid dump header")
        w, h = int(parts[1]), int(parts[2])
        res, ox, oy = float(parts[3]), float(parts[4]), float(parts[5])
        if len(lines) != h + 1:
            raise GridError("bad grid dump row count")
        g = OccupancyGrid(res, Pose2D(ox, oy), w, h)
        for iy, row in enumerate(lines[1:]):
            if len(row) != w:
                raise GridError("bad grid dump row width")
            for ix, ch in enumerate(row):
                st = _CHAR_STATES.get(ch)
                if st is None:
                    raise GridError(f"bad grid dump char {ch!r}")
                if st is CellState.UNEXPLORED:
                    continue
                g.observed[iy, ix] = True
                g.log_odds[iy, ix] = LOG_ODDS_CLAMP if st is CellState.OCCUPIED else -LOG_ODDS_CLAMP
        return g


def classify(grid: OccupancyGrid, cell: tuple[int, int]) -> CellState:
    """Unexplored if never observed, else Occupied iff likelihood >= threshold."""
    return grid.state(cell[0], cell[1])


def to_binary(grid: OccupancyGrid, threshold: float | None = None) -> np.ndarray:
    """Binary occupation image (occupied=1); Unexplored maps to occupied."""
    thr = grid.occupied_threshold if threshold is None else threshold
    lik = 1.0 / (1.0 + np.exp(-grid.log_odds))
    occ = (lik >= thr) | ~grid.observed
    return occ.astype(np.uint8)


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """8-connected cell chain from (x0,y0) to (x1,y1), endpoints inclusive."""
    cells = []
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx - dy
    x, y = x0, y0
    while True:
        cells.append((x, y))
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 > -dy:
            err -= dy
            x += sx
        if e2 < dx:
            err += dx
            y += sy
    return cells


def integrate_scan(grid: OccupancyGrid, robot: Pose2D, scan) -> OccupancyGrid:
    """Fold one lidar scan into the grid (in place; also returns it).

    Beam-traversed cells get a miss update, hit endpoints get a hit update; all
    touched cells become observed. Classification changes are appended to
    grid.change_log for incremental frontier detection.
    """
    r0 = grid.world_to_cell(robot.x, robot.y)
    if not grid.in_bounds(*r0):
        raise GridError("robot pose outside grid bounds")
    if scan.pose is not None and (abs(scan.pose.x - robot.x) > 1e-6
                                  or abs(scan.pose.y - robot.y) > 1e-6):
        raise GridError("scan was captured from a different pose")

    touched: dict[tuple[int, int], bool] = {}   # cell -> is occupied endpoint
    for bearing, rng, hit in zip(scan.bearings, scan.ranges, scan.hits):
        ex = robot.x + rng * math.cos(bearing)
        ey = robot.y + rng * math.sin(bearing)
        if hit:
            # nudge forward so on-boundary hit points land in the wall's cell
            ex += 1e-9 * math.cos(bearing)
            ey += 1e-9 * math.sin(bearing)
        end = grid.world_to_cell(ex, ey)
        chain = bresenham(r0[0], r0[1], end[0], end[1])
        for j, c in enumerate(chain):
            if not grid.in_bounds(*c):
                break
            last = j == len(chain) - 1
            if last and hit:
                touched[c] = True
            elif c not in touched:
                touched[c] = False

    pre = {c: grid.state(*c) for c in touched}
    for (ix, iy), occ in touched.items():
        delta = LOG_ODDS_HIT if occ else LOG_ODDS_MISS
        grid.log_odds[iy, ix] = float(
            np.clip(grid.log_odds[iy, ix] + delta, -LOG_ODDS_CLAMP, LOG_ODDS_CLAMP))
        grid.observed[iy, ix] = True
    for c, old in pre.items():
        if grid.state(*c) != old:
            grid.change_log.append(c)
    return grid


def rasterize_ground_truth(fp: Floorplan, resolution: float = 0.5,
                           occupied_threshold: float = 0.5) -> OccupancyGrid:
    """Fully-observed grid straight from the floorplan: wall cells Occupied,
    reachable interior Open, everything else Unexplored."""
    g = OccupancyGrid.for_floorplan(fp, resolution, occupied_threshold)
    occ = np.zeros((g.height, g.width), dtype=bool)
    for c in ground_truth_wall_cells(fp, g):
        occ[c[1], c[0]] = True
    # flood-fill open space from the robot start
    from collections import deque
    start = g.world_to_cell(fp.robot_start.x, fp.robot_start.y)
    open_mask = np.zeros_like(occ)
    q = deque([start])
    seen = {start}
    while q:
        ix, iy = q.popleft()
        if not g.in_bounds(ix, iy) or occ[iy, ix]:
            continue
        open_mask[iy, ix] = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nb = (ix + dx, iy + dy)
                if nb not in seen:
                    seen.add(nb)
                    q.append(nb)
    g.observed = occ | open_mask
    g.log_odds = np.where(occ, LOG_ODDS_CLAMP, -LOG_ODDS_CLAMP).astype(float)
    g.log_odds[~g.observed] = 0.0
    return g


def ground_truth_wall_cells(fp: Floorplan, grid: OccupancyGrid) -> set[tuple[int, int]]:
    """Cells containing ground-truth wall segments (dense sampling)."""
    cells: set[tuple[int, int]] = set()
    step = grid.resolution / 4.0
    for (x1, y1, x2, y2) in fp.walls:
        L = math.hypot(x2 - x1, y2 - y1)
        n = max(2, int(math.ceil(L / step)) + 1)
        for t in np.linspace(0.0, 1.0, n):
            c = grid.world_to_cell(x1 + t * (x2 - x1), y1 + t * (y2 - y1))
            if grid.in_bounds(*c):
                cells.add(c)
    return cells
