"""Wall-Scanning Discovery: derive scan waypoints from the completed occupancy
grid (threshold, Canny, Hough, outward translation) and visit them all."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import localization, navigation
from .config import SimConfig
from .exploration import Simulation, explore
from .geometry import Pose2D, angle_diff
from .gridmap import OccupancyGrid, to_binary
from .imageproc import HoughSegment, canny, hough_segments
from .navigation import REACHED
from .trace import CampaignTrace
from .world import Floorplan

log = logging.getLogger(__name__)


@dataclass
class WallSegment:
    """Extracted boundary segment in map meters with its free-space normal."""

    p1: np.ndarray
    p2: np.ndarray
    normal: np.ndarray        # unit 2-vector into free space

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.p2 - self.p1))

    @property
    def midpoint(self) -> np.ndarray:
        return (self.p1 + self.p2) / 2.0


@dataclass
class ScanWaypoint:
    pose: Pose2D              # position + heading facing the wall
    segment_id: int


def extract_edges(binary: np.ndarray, sigma: float = 1.0,
                  low_ratio: float = 0.15, high_ratio: float = 0.4) -> np.ndarray:
    """Canny boundary of the binary occupation grid (bool (h, w) image)."""
    return canny(np.asarray(binary, dtype=float), sigma=sigma,
                 low_ratio=low_ratio, high_ratio=high_ratio)


def extract_segments(edges: np.ndarray, theta_step_deg: float = 1.0,
                     rho_step: float = 1.0, min_votes: int = 15,
                     min_length: float = 4.0, max_gap: float = 2.0) -> list[HoughSegment]:
    """Maximal collinear segments over the edge set (cell coordinates)."""
    return hough_segments(edges, theta_step_deg=theta_step_deg, rho_step=rho_step,
                          min_votes=min_votes, min_length=min_length, max_gap=max_gap)


def get_normal_vector(segment: HoughSegment, binary: np.ndarray,
                      probe: float = 1.5):
    """Unit perpendicular pointing into open space, probing the segment
    midpoint +- probe cells; None when both probes agree (degenerate edge)."""
    dx, dy = segment.direction()
    mx = (segment.p1[0] + segment.p2[0]) / 2.0
    my = (segment.p1[1] + segment.p2[1]) / 2.0
    h, w = binary.shape

    def occupied_at(nx_, ny_):
        ix = int(round(mx + probe * nx_))
        iy = int(round(my + probe * ny_))
        if not (0 <= ix < w and 0 <= iy < h):
            return True
        return bool(binary[iy, ix])

    for nx_, ny_ in ((-dy, dx), (dy, -dx)):
        if not occupied_at(nx_, ny_) and occupied_at(-nx_, -ny_):
            return np.array([nx_, ny_])
    log.warning("degenerate edge segment at (%.1f, %.1f): discarded", mx, my)
    return None


def _cells_to_meters(grid: OccupancyGrid, xy) -> np.ndarray:
    return np.array([grid.origin.x + (xy[0] + 0.5) * grid.resolution,
                     grid.origin.y + (xy[1] + 0.5) * grid.resolution])


def waypoint_offsets(length: float, spacing: float) -> list[float]:
    """Evenly spaced offsets along a translated segment, spacing/2 in from each
    end; a segment shorter than the spacing gets its midpoint."""
    k = int(math.floor(length / spacing))
    if k == 0:
        return [length / 2.0]
    return [spacing / 2.0 + i * spacing for i in range(k)]


def get_waypoints(grid: OccupancyGrid, threshold: float | None = None,
                  spacing: float = 1.0, distance: float = 1.0,
                  cfg=None, inflation: float = navigation.DEFAULT_INFLATION) -> list[ScanWaypoint]:
    """Alg: threshold -> Canny -> Hough -> translate along the free-space
    normal -> evenly spaced waypoints (midpoint for short segments), projected
    off inflated obstacles or dropped."""
    sigma, low, high = 1.0, 0.15, 0.4
    votes, min_len, max_gap = 15, 4.0, 2.0
    theta_step, rho_step = 1.0, 1.0
    dedup_r, dedup_a, project_r = 0.25, math.radians(15.0), 1.5
    if cfg is not None:
        sigma, low, high = cfg.canny_sigma, cfg.canny_low, cfg.canny_high
        votes, min_len, max_gap = cfg.hough_votes, cfg.hough_min_length, cfg.hough_max_gap
        theta_step, rho_step = cfg.theta_step_deg, cfg.rho_step
        dedup_r = cfg.dedup_radius
        dedup_a = math.radians(cfg.dedup_angle_deg)
        project_r = cfg.project_radius
        spacing, distance = cfg.spacing, cfg.distance

    binary = to_binary(grid, threshold)
    edges = extract_edges(binary, sigma, low, high)
    segments_px = extract_segments(edges, theta_step, rho_step, votes, min_len, max_gap)
    mask = navigation.traversable_mask(grid, inflation)

    waypoints: list[ScanWaypoint] = []
    for sid, seg in enumerate(segments_px):
        n = get_normal_vector(seg, binary)
        if n is None:
            continue
        p1 = _cells_to_meters(grid, seg.p1)
        p2 = _cells_to_meters(grid, seg.p2)
        q1 = p1 + distance * n
        q2 = p2 + distance * n
        L = float(np.linalg.norm(q2 - q1))
        d = (q2 - q1) / L if L > 1e-9 else np.zeros(2)
        heading = math.atan2(-n[1], -n[0])

        for off in waypoint_offsets(L, spacing):
            pos = q1 + off * d
            pose = _place_feasible(grid, mask, Pose2D(pos[0], pos[1], heading), project_r)
            if pose is None:
                continue
            if any(p.pose.distance_to(pose) < dedup_r
                   and abs(angle_diff(p.pose.heading, pose.heading)) < dedup_a
                   for p in waypoints):
                continue
            waypoints.append(ScanWaypoint(pose, sid))
    return waypoints


def _place_feasible(grid: OccupancyGrid, mask: np.ndarray, pose: Pose2D,
                    project_radius: float):
    """Keep the pose if its cell is traversable, else project to the nearest
    traversable cell within project_radius (heading preserved); None = drop."""
    c = grid.world_to_cell(pose.x, pose.y)
    if grid.in_bounds(*c) and mask[c[1], c[0]]:
        return pose
    r_cells = int(math.ceil(project_radius / grid.resolution))
    best, best_d = None, math.inf
    for dy in range(-r_cells, r_cells + 1):
        for dx in range(-r_cells, r_cells + 1):
            nb = (c[0] + dx, c[1] + dy)
            if not grid.in_bounds(*nb) or not mask[nb[1], nb[0]]:
                continue
            x, y = grid.cell_center(*nb)
            d = (x - pose.x) ** 2 + (y - pose.y) ** 2
            if d < best_d - 1e-12 or (abs(d - best_d) <= 1e-12
                                      and best is not None and (x, y) < (best.x, best.y)):
                best, best_d = Pose2D(x, y, pose.heading), d
    if best is not None and math.sqrt(best_d) <= project_radius:
        return best
    return None


def waypoints_csv(waypoints: list[ScanWaypoint]) -> str:
    lines = ["x,y,heading,segment_id"]
    for wp in waypoints:
        lines.append(f"{wp.pose.x!r},{wp.pose.y!r},{wp.pose.heading!r},{wp.segment_id}")
    return "\n".join(lines) + "\n"


def run_wd(fp: Floorplan, cfg: SimConfig, seed: int) -> CampaignTrace:
    """Explore to completion, then greedily visit every scan waypoint
    (nearest first by path distance), active-scanning at each."""
    rng = np.random.default_rng(seed)
    trace = CampaignTrace("wd", seed, cfg.as_dict(), fp.as_dict())
    sim = Simulation(fp, cfg, rng, trace)

    explore(sim)
    sim.log("exploration_done")

    waypoints = get_waypoints(sim.grid, cfg.grid.occupied_threshold,
                              cfg=cfg.wallscan, inflation=cfg.nav.inflation)
    sim.log("wd_waypoints", count=len(waypoints))

    remaining = list(waypoints)
    while remaining:
        field = navigation.dijkstra_field(sim.grid, sim.robot, cfg.nav.inflation)
        best_i, best_key = 0, None
        for i, wp in enumerate(remaining):
            c = sim.grid.world_to_cell(wp.pose.x, wp.pose.y)
            d = field[c[1], c[0]] if sim.grid.in_bounds(*c) else math.inf
            if not math.isfinite(d):
                d = 1e6 + sim.robot.distance_to(wp.pose)   # euclidean fallback, after reachable ones
            key = (d, wp.pose.x, wp.pose.y)
            if best_key is None or key < best_key:
                best_i, best_key = i, key
        wp = remaining.pop(best_i)
        sim.log("wd_visit", x=wp.pose.x, y=wp.pose.y, heading=wp.pose.heading,
                segment_id=wp.segment_id)
        result, _ = sim.navigate(wp.pose, align_heading=True)
        sim.log("nav", outcome=result.outcome, x=wp.pose.x, y=wp.pose.y,
                elapsed=result.elapsed)
        if result.outcome != REACHED:
            continue
        estimates, diags = localization.active_scan(
            fp, sim.camera_pose(), sim.intrinsics, cfg.localization, rng, "WD")
        sim.time += cfg.localization.scan_duration
        sim.log("active_scan", x=sim.robot.x, y=sim.robot.y, heading=sim.robot.heading,
                n_estimates=len(estimates), diagnostics=diags,
                duration=cfg.localization.scan_duration)
        for est in estimates:
            sim.log("estimate", x=float(est.pose.position[0]),
                    y=float(est.pose.position[1]), z=float(est.pose.position[2]),
                    text=est.text, read_error=est.read_error,
                    residual=est.corner_residual, source=est.source)

    trace.final_grid = sim.grid
    trace.elapsed = sim.time
    sim.log("run_done")
    return trace
