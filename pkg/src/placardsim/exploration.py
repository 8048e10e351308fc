"""Shared simulation engine: robot state, sim clock, lidar mapping, navigation
stepping with detector frames, and the frontier exploration loop."""

from __future__ import annotations

import math

import numpy as np

from . import frontier, navigation, sensing
from .config import SimConfig
from .geometry import Pose2D, angle_diff
from .gridmap import OccupancyGrid, integrate_scan
from .navigation import BLOCKED, REACHED, UNREACHABLE, NavResult
from .trace import CampaignTrace
from .world import Floorplan


class Simulation:
    """Single-run state; one logical event loop, deterministic under its rng."""

    def __init__(self, fp: Floorplan, cfg: SimConfig, rng: np.random.Generator,
                 trace: CampaignTrace):
        self.fp = fp
        self.cfg = cfg
        self.rng = rng
        self.trace = trace
        self.grid = OccupancyGrid.for_floorplan(fp, cfg.grid.resolution,
                                                cfg.grid.occupied_threshold)
        self.robot = Pose2D(fp.robot_start.x, fp.robot_start.y, fp.robot_start.heading)
        self.time = 0.0
        self.frozen = False
        self.frontier_cache = frontier.FrontierCache()
        self.intrinsics = sensing.CameraIntrinsics(
            cfg.camera.fx, cfg.camera.fy, cfg.camera.cx, cfg.camera.cy,
            cfg.camera.width, cfg.camera.height)
        self.detector = sensing.DetectorModel(
            cfg.detector.p_max, cfg.detector.r_min, cfg.detector.r_max,
            cfg.detector.cos_power, cfg.detector.fp_rate, cfg.detector.bbox_jitter)
        self._next_frame = 0.0

    # -- bookkeeping ---------------------------------------------------------

    def log(self, kind: str, **data):
        return self.trace.log(kind, self.time,
                              observed_cells=self.grid.observed_count(), **data)

    def camera_pose(self):
        return sensing.camera_pose_from_robot(self.robot, self.cfg.camera.height_m)

    # -- sensing / mapping ----------------------------------------------------

    def scan_and_integrate(self):
        if self.frozen:
            return
        scan = sensing.simulate_lidar(self.fp, self.robot,
                                      self.cfg.lidar.n_beams, self.cfg.lidar.max_range)
        integrate_scan(self.grid, self.robot, scan)

    def _fire_frames(self, frame_hook) -> bool:
        """Run detector frames the clock has passed; True = hook requests abort."""
        if frame_hook is None:
            return False
        period = 1.0 / self.cfg.detector.frame_hz
        abort = False
        while self._next_frame <= self.time + 1e-12:
            events = sensing.detect(self.fp, self.camera_pose(), self.intrinsics,
                                    self.detector, self.rng, sim_time=self._next_frame)
            self._next_frame += period
            if events and frame_hook(events):
                abort = True
        return abort

    # -- motion ----------------------------------------------------------------

    def navigate(self, goal: Pose2D, frame_hook=None, align_heading: bool = False):
        """Drive to the goal cell with replanning; returns (NavResult, interrupted).

        Per-cell stepping: each step costs turn + travel time; a lidar scan is
        integrated after each step unless frozen; detector frames fire on the
        sim clock and may abort via the hook.
        """
        speed, turn_rate = self.cfg.nav.speed, self.cfg.nav.turn_rate
        inflation = self.cfg.nav.inflation
        walked = [Pose2D(self.robot.x, self.robot.y, self.robot.heading)]
        elapsed0 = self.time
        replans = 0

        path = navigation.plan(self.grid, self.robot, goal, inflation)
        if path is None:
            return NavResult(UNREACHABLE, [], 0.0), False
        i = 1
        steps = 0
        scan_every = max(1, self.cfg.lidar.scan_every)
        while i < len(path):
            a, b = self.robot, path[i]
            bearing = math.atan2(b.y - a.y, b.x - a.x)
            self.time += abs(angle_diff(bearing, self.robot.heading)) / turn_rate
            self.time += a.distance_to(b) / speed
            self.robot = Pose2D(b.x, b.y, bearing)
            walked.append(self.robot)
            steps += 1
            if steps % scan_every == 0 or i == len(path) - 1:
                self.scan_and_integrate()
            if self._fire_frames(frame_hook):
                return NavResult(BLOCKED, walked, self.time - elapsed0), True
            if i + 1 < len(path):
                mask = navigation.traversable_mask(self.grid, inflation)
                nxt = self.grid.world_to_cell(path[i + 1].x, path[i + 1].y)
                if not mask[nxt[1], nxt[0]]:
                    replans += 1
                    if replans > self.cfg.nav.max_replans:
                        return NavResult(BLOCKED, walked, self.time - elapsed0), False
                    path = navigation.plan(self.grid, self.robot, goal, inflation)
                    if path is None:
                        return NavResult(BLOCKED, walked, self.time - elapsed0), False
                    i = 1
                    continue
            i += 1

        if align_heading:
            self.time += abs(angle_diff(goal.heading, self.robot.heading)) / turn_rate
            self.robot = Pose2D(self.robot.x, self.robot.y, goal.heading)
            if self._fire_frames(frame_hook):
                return NavResult(REACHED, walked, self.time - elapsed0), True
        return NavResult(REACHED, walked, self.time - elapsed0), False

    # -- frontier loop -----------------------------------------------------------

    def frontier_blobs(self):
        return frontier.detect_frontiers(self.grid, self.robot, self.frontier_cache)


def explore(sim: Simulation, frame_hook=None, interrupt_handler=None,
            max_epochs: int = 10000) -> None:
    """Frontier exploration until no selectable frontier remains.

    A blob whose navigation fails is suppressed for one detection cycle; two
    failures exclude it permanently so the loop always terminates."""
    sim.scan_and_integrate()
    suppressed: list[Pose2D] = []
    failures: dict[tuple, int] = {}
    for _ in range(max_epochs):
        blobs = sim.frontier_blobs()
        if not blobs:
            break
        dead = [Pose2D(k[0], k[1]) for k, v in failures.items() if v >= 2]
        goal = frontier.select_goal(blobs, sim.robot, sim.grid,
                                    sim.cfg.nav.inflation, sim.cfg.nav.goal_metric,
                                    exclude=suppressed + dead)
        if goal is None and suppressed:
            suppressed = []
            goal = frontier.select_goal(blobs, sim.robot, sim.grid,
                                        sim.cfg.nav.inflation, sim.cfg.nav.goal_metric,
                                        exclude=dead)
        if goal is None:
            break
        sim.log("explore_goal", x=goal.x, y=goal.y, blobs=len(blobs))
        result, interrupted = sim.navigate(goal, frame_hook)
        if interrupted:
            if interrupt_handler is not None:
                interrupt_handler()
            continue
        sim.log("nav", outcome=result.outcome, x=goal.x, y=goal.y,
                elapsed=result.elapsed)
        suppressed = []
        if result.outcome != REACHED:
            key = (round(goal.x, 6), round(goal.y, 6))
            failures[key] = failures.get(key, 0) + 1
            suppressed = [goal]
