"""Interruptable Frontier Exploration: passive detection during frontier
exploration; on a new detection, freeze the map, plane-fit the depth crop,
drive to a head-on viewpoint, active-scan, then resume."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import localization, navigation, sensing
from .config import SimConfig
from .exploration import Simulation, explore
from .geometry import Pose2D, Pose3D
from .gridmap import OccupancyGrid
from .navigation import REACHED
from .sensing import CameraIntrinsics, DepthImage, DetectionEvent
from .trace import CampaignTrace
from .world import Floorplan

log = logging.getLogger(__name__)


class IfeError(Exception):
    pass


class TooFewPointsError(IfeError):
    """Not enough valid depth returns inside the bounding box."""


class DegeneratePointsError(IfeError):
    """Point set is collinear or coincident; no plane is defined."""


class NoViewpointError(IfeError):
    """No collision-free, reachable viewing pose in the allowed range."""


@dataclass
class PlaneFit:
    point: np.ndarray          # centroid, meters
    normal: np.ndarray         # unit, oriented toward the robot
    rms_residual: float
    inlier_count: int


@dataclass
class IfeState:
    mode: str = "Exploring"            # Exploring | Interrupted | ActiveScanning | Done
    pending: list = field(default_factory=list)       # queued DetectionEvents
    registry: list = field(default_factory=list)      # map xy of scanned placards
    attempts: list = field(default_factory=list)      # [(xy, fail_count)]

    def near_registry(self, xy, radius: float) -> bool:
        return any(np.hypot(xy[0] - r[0], xy[1] - r[1]) < radius for r in self.registry)

    def register(self, xy, radius: float) -> None:
        if not self.near_registry(xy, radius):
            self.registry.append((float(xy[0]), float(xy[1])))

    def fail_count(self, xy, radius: float) -> int:
        for (rx, ry), n in self.attempts:
            if np.hypot(xy[0] - rx, xy[1] - ry) < radius:
                return n
        return 0

    def record_failure(self, xy, radius: float) -> None:
        for i, ((rx, ry), n) in enumerate(self.attempts):
            if np.hypot(xy[0] - rx, xy[1] - ry) < radius:
                self.attempts[i] = ((rx, ry), n + 1)
                return
        self.attempts.append(((float(xy[0]), float(xy[1])), 1))


# ---------------------------------------------------------------------------
# depth crop -> plane -> viewpoint

def crop_and_project(depth: DepthImage, bbox, K: CameraIntrinsics,
                     camera: Pose3D | None = None, min_points: int = 20) -> np.ndarray:
    """Back-project valid depth pixels inside bbox into map-frame points."""
    if camera is None:
        camera = depth.camera_pose
    u0, v0, u1, v1 = bbox
    u0, v0 = max(0, int(u0)), max(0, int(v0))
    u1 = min(depth.data.shape[1], int(u1))
    v1 = min(depth.data.shape[0], int(v1))
    if u1 <= u0 or v1 <= v0:
        raise TooFewPointsError("bounding box outside the image")
    sub = depth.data[v0:v1, u0:u1]
    vs, us = np.nonzero(sub > 0.0)
    if len(us) < min_points:
        raise TooFewPointsError(f"{len(us)} valid depths in bbox (need {min_points})")
    ranges = sub[vs, us]
    dirs = K.pixel_rays(us + float(u0), vs + float(v0))
    pts_cam = dirs * ranges[:, None]
    return camera.transform_points(pts_cam)


def fit_plane(points: np.ndarray, toward=None) -> PlaneFit:
    """Total-least-squares plane: centroid plus the smallest principal
    direction; the normal is flipped to face `toward` (the robot)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegeneratePointsError(f"{len(pts)} points (need 3 non-collinear)")
    c = pts.mean(axis=0)
    m = pts - c
    _, s, vt = np.linalg.svd(m, full_matrices=False)
    if s[1] < 1e-9 * max(s[0], 1e-12):
        raise DegeneratePointsError("points are collinear or coincident")
    n = vt[2]
    if toward is not None:
        toward = np.asarray(toward, dtype=float).reshape(3)
        if float(np.dot(n, toward - c)) < 0:
            n = -n
    d = m @ n
    rms = float(np.sqrt(np.mean(d ** 2)))
    inliers = int(np.sum(np.abs(d) <= max(3.0 * rms, 1e-6)))
    return PlaneFit(c, n, rms, inliers)


def get_waypoint(fit: PlaneFit, grid: OccupancyGrid, range_min: float = 0.5,
                 range_max: float = 3.0, robot: Pose2D | None = None,
                 preferred: float = 1.0, step: float = 0.25,
                 inflation: float = navigation.DEFAULT_INFLATION) -> Pose2D:
    """Viewing pose along the plane normal, swept outward from the preferred
    distance (then inward) until a traversable, reachable cell is found."""
    nh = np.asarray(fit.normal[:2], dtype=float)
    norm = float(np.linalg.norm(nh))
    if norm < 1e-6:
        raise NoViewpointError("plane normal has no horizontal component")
    nh = nh / norm
    base = np.asarray(fit.point[:2], dtype=float)
    heading = math.atan2(-nh[1], -nh[0])

    d0 = min(max(preferred, range_min), range_max)
    distances = [d0]
    d = d0 + step
    while d <= range_max + 1e-9:
        distances.append(d)
        d += step
    d = d0 - step
    while d >= range_min - 1e-9:
        distances.append(d)
        d -= step

    mask = navigation.traversable_mask(grid, inflation)
    for d in distances:
        pos = base + d * nh
        c = grid.world_to_cell(pos[0], pos[1])
        if not grid.in_bounds(*c) or not mask[c[1], c[0]]:
            continue
        pose = Pose2D(pos[0], pos[1], heading)
        if robot is not None:
            if navigation.plan(grid, robot, pose, inflation, mask=mask) is None:
                continue
        return pose
    raise NoViewpointError(
        f"no feasible viewpoint within [{range_min}, {range_max}] m")


# ---------------------------------------------------------------------------
# campaign

def run_ife(fp: Floorplan, cfg: SimConfig, seed: int) -> CampaignTrace:
    rng = np.random.default_rng(seed)
    trace = CampaignTrace("ife", seed, cfg.as_dict(), fp.as_dict())
    sim = Simulation(fp, cfg, rng, trace)
    state = IfeState()
    icfg = cfg.ife

    def detection_anchor(ev: DetectionEvent):
        """Map-frame point under the bbox center (reads the simulated depth)."""
        u = (ev.bbox[0] + ev.bbox[2]) / 2.0
        v = (ev.bbox[1] + ev.bbox[3]) / 2.0
        d = sensing.depth_along_pixel(fp, ev.camera_pose, sim.intrinsics, u, v,
                                      cfg.detector.r_max)
        if d <= 0.0:
            return None
        ray = sim.intrinsics.pixel_rays(np.array([u]), np.array([v]))[0]
        return ev.camera_pose.transform_points((ray * d)[None, :])[0]

    def frame_hook(events) -> bool:
        accepted = False
        for ev in events:
            anchor = detection_anchor(ev)
            xy = None if anchor is None else anchor[:2]
            duplicate = xy is not None and (
                state.near_registry(xy, icfg.merge_radius)
                or state.fail_count(xy, icfg.merge_radius) >= icfg.max_scan_attempts
                or any(p[1] is not None
                       and np.hypot(xy[0] - p[1][0], xy[1] - p[1][1]) < icfg.merge_radius
                       for p in state.pending))
            sim.log("detection", bbox=list(ev.bbox), placard_id=ev.placard_id,
                    accepted=not duplicate)
            if duplicate:
                continue
            state.pending.append((ev, None if xy is None else (float(xy[0]), float(xy[1]))))
            accepted = True
        return accepted and not sim.frozen

    def process_interrupts():
        state.mode = "Interrupted"
        sim.frozen = True
        sim.log("interrupt_begin", queued=len(state.pending))
        while state.pending:
            ev, xy = state.pending.pop(0)
            if xy is not None and state.near_registry(xy, icfg.merge_radius):
                continue
            depth = sensing.render_depth(fp, ev.camera_pose, sim.intrinsics,
                                         cfg.detector.r_max, roi=ev.bbox)
            try:
                pts = crop_and_project(depth, ev.bbox, sim.intrinsics,
                                       ev.camera_pose, icfg.min_points)
                fit = fit_plane(pts, toward=ev.camera_pose.position)
                wp = get_waypoint(fit, sim.grid, icfg.range_min, icfg.range_max,
                                  robot=sim.robot, preferred=icfg.preferred_distance,
                                  step=icfg.sweep_step, inflation=cfg.nav.inflation)
            except (TooFewPointsError, DegeneratePointsError) as e:
                sim.log("detection_deferred", reason=str(e))
                continue
            except NoViewpointError as e:
                sim.log("detection_abandoned", reason=str(e))
                if xy is not None:
                    state.record_failure(xy, icfg.merge_radius)
                continue
            sim.log("waypoint_computed", x=wp.x, y=wp.y, heading=wp.heading,
                    plane_x=float(fit.point[0]), plane_y=float(fit.point[1]))
            result, _ = sim.navigate(wp, frame_hook, align_heading=True)
            sim.log("nav", outcome=result.outcome, x=wp.x, y=wp.y,
                    elapsed=result.elapsed)
            target_xy = xy if xy is not None else (float(fit.point[0]), float(fit.point[1]))
            if result.outcome != REACHED:
                state.record_failure(target_xy, icfg.merge_radius)
                continue
            state.mode = "ActiveScanning"
            estimates, diags = localization.active_scan(
                fp, sim.camera_pose(), sim.intrinsics, cfg.localization, rng, "IFE")
            sim.time += cfg.localization.scan_duration
            sim.log("active_scan", x=sim.robot.x, y=sim.robot.y,
                    heading=sim.robot.heading, n_estimates=len(estimates),
                    diagnostics=diags, duration=cfg.localization.scan_duration)
            if estimates:
                for est in estimates:
                    state.register(est.pose.position[:2], icfg.merge_radius)
                    sim.log("estimate", x=float(est.pose.position[0]),
                            y=float(est.pose.position[1]), z=float(est.pose.position[2]),
                            text=est.text, read_error=est.read_error,
                            residual=est.corner_residual, source=est.source)
            else:
                state.record_failure(target_xy, icfg.merge_radius)
            state.mode = "Interrupted"
        sim.frozen = False
        state.mode = "Exploring"
        sim.log("interrupt_end")

    explore(sim, frame_hook=frame_hook, interrupt_handler=process_interrupts)
    if state.pending:
        process_interrupts()
    state.mode = "Done"

    trace.final_grid = sim.grid
    trace.elapsed = sim.time
    sim.log("run_done")
    return trace
