"""Simulated sensors: planar lidar, pinhole RGB-D camera, placard detector.

Camera convention: x right, y down, z forward; Pose3D.rotation maps camera-frame
vectors into the map frame. Pixel (u, v) rays pass through integer pixel
coordinates, so the principal point pixel is exactly the optical axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2D, Pose3D, look_rotation, ray_segments
from .world import Floorplan, Placard

CAMERA_HEIGHT = 1.4


class SensingError(Exception):
    pass


@dataclass
class CameraIntrinsics:
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise SensingError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise SensingError("principal point outside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def fov_h(self) -> float:
        return 2.0 * math.atan2(self.width / 2.0, self.fx)

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        """(N,3) camera-frame points -> (N,2) pixel coords (caller checks z>0)."""
        pts_cam = np.asarray(pts_cam, dtype=float)
        u = self.fx * pts_cam[:, 0] / pts_cam[:, 2] + self.cx
        v = self.fy * pts_cam[:, 1] / pts_cam[:, 2] + self.cy
        return np.column_stack([u, v])

    def pixel_rays(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Unit camera-frame direction per pixel (N,3)."""
        d = np.column_stack([(us - self.cx) / self.fx,
                             (vs - self.cy) / self.fy,
                             np.ones(len(us))])
        return d / np.linalg.norm(d, axis=1, keepdims=True)


@dataclass
class LidarScan:
    bearings: np.ndarray      # absolute map-frame bearings
    ranges: np.ndarray        # meters, clipped at max_range
    hits: np.ndarray          # bool, False = no return within max_range
    max_range: float
    pose: Pose2D | None = None


@dataclass
class DepthImage:
    data: np.ndarray          # (h, w) range in meters along each pixel ray, 0 = no return
    camera_pose: Pose3D
    max_range: float


@dataclass
class SegMask:
    data: np.ndarray          # (h, w) bool, True = placard
    camera_pose: Pose3D


@dataclass
class DetectionEvent:
    bbox: tuple               # (u0, v0, u1, v1) pixel rect, half-open
    camera_pose: Pose3D
    placard_id: int | None    # ground-truth index, None = false positive
    sim_time: float

    def __post_init__(self):
        u0, v0, u1, v1 = self.bbox
        if u1 <= u0 or v1 <= v0:
            raise SensingError("detection bbox has no area")


@dataclass
class DetectorModel:
    """p_detect = p_max * clamp01((r_max - r)/(r_max - r_min)) * cos(incidence)^k."""

    p_max: float = 0.95
    r_min: float = 0.5
    r_max: float = 6.0
    cos_power: float = 1.0
    fp_rate: float = 0.02     # expected false positives per frame (Poisson)
    bbox_jitter: float = 2.0  # px

    def p_detect(self, r: float, incidence: float) -> float:
        if r >= self.r_max or incidence >= math.pi / 2.0:
            return 0.0
        range_term = min(1.0, max(0.0, (self.r_max - r) / (self.r_max - self.r_min)))
        return self.p_max * range_term * math.cos(incidence) ** self.cos_power


def camera_pose_from_robot(robot: Pose2D, height: float = CAMERA_HEIGHT) -> Pose3D:
    fwd = np.array([math.cos(robot.heading), math.sin(robot.heading), 0.0])
    return Pose3D(np.array([robot.x, robot.y, height]), look_rotation(fwd))


# ---------------------------------------------------------------------------
# lidar

def simulate_lidar(fp: Floorplan, robot: Pose2D, n_beams: int = 180,
                   max_range: float = 8.0) -> LidarScan:
    bearings = robot.heading + np.linspace(-math.pi, math.pi, n_beams, endpoint=False)
    segs = fp.walls_array
    ranges = np.full(n_beams, max_range)
    hits = np.zeros(n_beams, dtype=bool)
    for i, b in enumerate(bearings):
        t, _ = ray_segments((robot.x, robot.y), (math.cos(b), math.sin(b)), segs)
        tmin = float(np.min(t)) if len(t) else np.inf
        if tmin <= max_range:
            ranges[i] = tmin
            hits[i] = True
    return LidarScan(bearings, ranges, hits, max_range, pose=Pose2D(robot.x, robot.y, robot.heading))


# ---------------------------------------------------------------------------
# depth rendering

def render_depth(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
                 max_range: float = 8.0, roi: tuple | None = None) -> DepthImage:
    """Per-pixel ray cast against extruded walls; range = Euclidean hit distance.

    roi = (u0, v0, u1, v1) limits the computed pixels (the rest stay 0); the
    result still has full image dimensions.
    """
    h, w = K.height, K.width
    data = np.zeros((h, w), dtype=float)
    u0, v0, u1, v1 = roi if roi is not None else (0, 0, w, h)
    u0, v0 = max(0, int(u0)), max(0, int(v0))
    u1, v1 = min(w, int(u1)), min(h, int(v1))
    if u1 <= u0 or v1 <= v0 or len(fp.walls) == 0:
        return DepthImage(data, camera, max_range)

    segs = fp.walls_array
    p1 = segs[:, 0:2]
    e = segs[:, 2:4] - p1
    ox, oy, oz = camera.position
    us = np.arange(u0, u1, dtype=float)

    for v in range(v0, v1):
        dirs = K.pixel_rays(us, np.full(len(us), float(v))) @ camera.rotation.T
        dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]   # (n,1)
        denom = dx * e[:, 1] - dy * e[:, 0]                     # (n, m)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = ((p1[:, 0] - ox) * e[:, 1] - (p1[:, 1] - oy) * e[:, 0]) / denom
            uu = ((p1[:, 0] - ox) * dy - (p1[:, 1] - oy) * dx) / denom
            zhit = oz + t * dz
            bad = ((np.abs(denom) < 1e-12) | (t < 1e-9) | (uu < 0.0) | (uu > 1.0)
                   | (zhit < 0.0) | (zhit > fp.wall_height) | ~np.isfinite(t))
        t = np.where(bad, np.inf, t)
        tmin = t.min(axis=1)
        tmin[tmin > max_range] = 0.0
        tmin[~np.isfinite(tmin)] = 0.0
        data[v, u0:u1] = tmin
    return DepthImage(data, camera, max_range)


def depth_along_pixel(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
                      u: float, v: float, max_range: float = 8.0) -> float:
    """Single-ray depth lookup (what the depth frame would hold at that pixel)."""
    d = K.pixel_rays(np.array([u]), np.array([v])) @ camera.rotation.T
    dx, dy, dz = d[0]
    segs = fp.walls_array
    if len(segs) == 0:
        return 0.0
    t, _ = ray_segments(camera.position[:2], (dx, dy), segs)
    z = camera.position[2] + t * dz
    t = np.where((z < 0.0) | (z > fp.wall_height), np.inf, t)
    tmin = float(np.min(t))
    return tmin if tmin <= max_range else 0.0


# ---------------------------------------------------------------------------
# segmentation rendering

def _quad_interior_mask(quad_px: np.ndarray, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Point-in-convex-quad test for pixel arrays (quad in consistent winding)."""
    sign = _winding_sign(quad_px)
    inside = np.ones(len(us), dtype=bool)
    for i in range(4):
        ax, ay = quad_px[i]
        bx, by = quad_px[(i + 1) % 4]
        cross = (bx - ax) * (vs - ay) - (by - ay) * (us - ax)
        inside &= cross >= 0.0 if sign >= 0 else cross <= 0.0
    return inside


def _winding_sign(quad_px: np.ndarray) -> float:
    area = 0.0
    for i in range(4):
        ax, ay = quad_px[i]
        bx, by = quad_px[(i + 1) % 4]
        area += ax * by - bx * ay
    return area


def render_scene_labels(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics) -> np.ndarray:
    """(h, w) int image: ground-truth placard index per pixel, -1 elsewhere.

    Pixels inside a projected placard quad, front-facing and unoccluded; when
    quads would overlap the nearer placard wins.
    """
    h, w = K.height, K.width
    labels = np.full((h, w), -1, dtype=int)
    depth_at = np.full((h, w), np.inf)
    segs = fp.walls_array
    for idx, p in enumerate(fp.placards):
        n = fp.placard_normal(p)
        center = fp.placard_pose(p).position
        if float(np.dot(n, camera.position - center)) <= 1e-9:
            continue
        corners = fp.placard_corners(p)
        rel = (corners - camera.position) @ camera.rotation
        if np.any(rel[:, 2] <= 1e-6):
            continue
        quad = K.project(rel)
        u0 = max(0, int(math.floor(quad[:, 0].min())))
        u1 = min(w, int(math.ceil(quad[:, 0].max())) + 1)
        v0 = max(0, int(math.floor(quad[:, 1].min())))
        v1 = min(h, int(math.ceil(quad[:, 1].max())) + 1)
        if u1 <= u0 or v1 <= v0:
            continue
        uu, vv = np.meshgrid(np.arange(u0, u1, dtype=float),
                             np.arange(v0, v1, dtype=float))
        us, vs = uu.ravel(), vv.ravel()
        inside = _quad_interior_mask(quad, us, vs)
        if not inside.any():
            continue
        us_i, vs_i = us[inside], vs[inside]
        dirs = K.pixel_rays(us_i, vs_i) @ camera.rotation.T
        # ray / placard-plane intersection
        denom = dirs @ n
        tau = ((center - camera.position) @ n) / denom
        # occlusion: any wall strictly before the placard plane along the ray
        blocked = np.zeros(len(us_i), dtype=bool)
        if len(segs):
            ox, oy, oz = camera.position
            p1 = segs[:, 0:2]
            e = segs[:, 2:4] - p1
            dx, dy, dz = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]
            denom = dx * e[:, 1] - dy * e[:, 0]                    # (n, m)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = ((p1[:, 0] - ox) * e[:, 1] - (p1[:, 1] - oy) * e[:, 0]) / denom
                uu = ((p1[:, 0] - ox) * dy - (p1[:, 1] - oy) * dx) / denom
                zh = oz + t * dz
                bad = ((np.abs(denom) < 1e-12) | (t < 1e-9) | (uu < 0.0) | (uu > 1.0)
                       | (zh < 0.0) | (zh > fp.wall_height) | ~np.isfinite(t))
            t = np.where(bad, np.inf, t)
            blocked = np.any(t < tau[:, None] - 1e-6, axis=1)
        keep = ~blocked & (tau > 0)
        rows = vs_i[keep].astype(int)
        cols = us_i[keep].astype(int)
        closer = tau[keep] < depth_at[rows, cols]
        rows, cols = rows[closer], cols[closer]
        labels[rows, cols] = idx
        depth_at[rows, cols] = tau[keep][closer]
    return labels


def render_segmask(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
                   placard: Placard, noise: float = 0.0,
                   rng: np.random.Generator | None = None) -> SegMask:
    """Binary placard mask for a single placard plus independent pixel flips."""
    idx = fp.placards.index(placard)
    labels = render_scene_labels(fp, camera, K)
    mask = labels == idx
    if noise > 0.0:
        if rng is None:
            raise SensingError("noise > 0 requires an rng")
        mask = mask ^ (rng.random(mask.shape) < noise)
    return SegMask(mask, camera)


def render_noisy_scene(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
                       noise: float, rng: np.random.Generator | None):
    """(SegMask, labels): full-scene mask with label noise + clean label image."""
    labels = render_scene_labels(fp, camera, K)
    mask = labels >= 0
    if noise > 0.0:
        if rng is None:
            raise SensingError("noise > 0 requires an rng")
        mask = mask ^ (rng.random(mask.shape) < noise)
    return SegMask(mask, camera), labels


# ---------------------------------------------------------------------------
# detector

def placard_visible_in_image(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
                             placard: Placard, max_range: float):
    """(visible, quad_px, range, incidence) using the camera's actual frustum."""
    n = fp.placard_normal(placard)
    center = fp.placard_pose(placard).position
    to_cam = camera.position - center
    r = float(np.linalg.norm(to_cam))
    if float(np.dot(n, to_cam)) <= 0.0 or r > max_range:
        return False, None, r, math.pi
    corners = fp.placard_corners(placard)
    rel = (corners - camera.position) @ camera.rotation
    if np.any(rel[:, 2] <= 1e-9):
        return False, None, r, math.pi
    quad = K.project(rel)
    if (quad[:, 0].min() < 0 or quad[:, 0].max() > K.width - 1
            or quad[:, 1].min() < 0 or quad[:, 1].max() > K.height - 1):
        return False, quad, r, math.pi
    from .world import _sight_blocked
    if any(_sight_blocked(fp, camera.position, c) for c in corners):
        return False, quad, r, math.pi
    incidence = math.acos(min(1.0, max(-1.0, float(np.dot(n, to_cam / r)))))
    return True, quad, r, incidence


def detect(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics,
           model: DetectorModel, rng: np.random.Generator,
           sim_time: float = 0.0) -> list[DetectionEvent]:
    """Passive detector frame: stochastic true detections + wall-anchored FPs."""
    events = []
    for idx, p in enumerate(fp.placards):
        visible, quad, r, inc = placard_visible_in_image(fp, camera, K, p, model.r_max)
        if not visible:
            continue
        if rng.random() >= model.p_detect(r, inc):
            continue
        j = model.bbox_jitter
        u0 = quad[:, 0].min() + rng.uniform(-j, j)
        u1 = quad[:, 0].max() + rng.uniform(-j, j)
        v0 = quad[:, 1].min() + rng.uniform(-j, j)
        v1 = quad[:, 1].max() + rng.uniform(-j, j)
        u0 = int(np.clip(math.floor(u0), 0, K.width - 2))
        v0 = int(np.clip(math.floor(v0), 0, K.height - 2))
        u1 = int(np.clip(math.ceil(u1), u0 + 1, K.width))
        v1 = int(np.clip(math.ceil(v1), v0 + 1, K.height))
        events.append(DetectionEvent((u0, v0, u1, v1), camera, idx, sim_time))

    for _ in range(rng.poisson(model.fp_rate)):
        for _attempt in range(4):
            u = rng.uniform(0, K.width - 1)
            v = rng.uniform(0, K.height - 1)
            d = depth_along_pixel(fp, camera, K, u, v, model.r_max)
            if d <= 0.0:
                continue
            # placard-scaled box at that depth
            bw = max(4.0, K.fx * 0.151 / d)
            bh = max(4.0, K.fy * 0.051 / d)
            u0 = int(np.clip(math.floor(u - bw / 2), 0, K.width - 2))
            v0 = int(np.clip(math.floor(v - bh / 2), 0, K.height - 2))
            u1 = int(np.clip(math.ceil(u + bw / 2), u0 + 1, K.width))
            v1 = int(np.clip(math.ceil(v + bh / 2), v0 + 1, K.height))
            events.append(DetectionEvent((u0, v0, u1, v1), camera, None, sim_time))
            break
    return events
