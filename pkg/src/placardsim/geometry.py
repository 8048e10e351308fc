"""Planar/3D pose primitives and segment intersection helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def angle_diff(a: float, b: float) -> float:
    """Smallest signed difference a-b."""
    return wrap_angle(a - b)


@dataclass
class Pose2D:
    x: float
    y: float
    heading: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.heading]

    @staticmethod
    def from_list(v) -> "Pose2D":
        return Pose2D(float(v[0]), float(v[1]), float(v[2]))

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(eq=False)
class Pose3D:
    """Rigid transform: rotation maps local-frame vectors into the parent frame."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if not is_rotation(self.rotation):
            raise ValueError("rotation is not orthonormal with det +1")

    def transform_points(self, pts: np.ndarray) -> np.ndarray:
        """Map (N,3) local points into the parent frame."""
        pts = np.asarray(pts, dtype=float)
        return pts @ self.rotation.T + self.position

    def inverse(self) -> "Pose3D":
        rt = self.rotation.T
        return Pose3D(-rt @ self.position, rt)

    def compose(self, other: "Pose3D") -> "Pose3D":
        """self ∘ other: first apply other, then self."""
        return Pose3D(self.rotation @ other.position + self.position,
                      self.rotation @ other.rotation)


def is_rotation(r: np.ndarray, tol: float = 1e-6) -> bool:
    if r.shape != (3, 3):
        return False
    return (np.allclose(r.T @ r, np.eye(3), atol=tol)
            and abs(np.linalg.det(r) - 1.0) < tol)


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project a near-rotation 3x3 matrix to the closest proper rotation (SVD polar)."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def rotation_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Geodesic angle (rad) between two rotations."""
    dr = r1 @ r2.T
    c = (np.trace(dr) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def look_rotation(forward: np.ndarray, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """Camera-style rotation: columns are (x right, y down, z forward) in the parent frame."""
    z = np.asarray(forward, dtype=float)
    n = np.linalg.norm(z)
    if n < 1e-12:
        raise ValueError("zero forward vector")
    z = z / n
    up = np.asarray(up, dtype=float)
    y = -(up - np.dot(up, z) * z)
    ny = np.linalg.norm(y)
    if ny < 1e-9:
        raise ValueError("forward parallel to up")
    y = y / ny
    x = np.cross(y, z)
    return np.column_stack([x, y, z])


def rot_z(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# 2D segment / ray intersection (vectorized over wall sets)

def ray_segments(origin, direction, segs: np.ndarray):
    """Intersect one ray (origin + t*direction, t>=0) with segments (N,4).

    Returns (t, u) arrays; t = inf where there is no hit, u = position along the
    segment in [0,1] for hits.
    """
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(direction[0]), float(direction[1])
    p1x, p1y = segs[:, 0], segs[:, 1]
    ex, ey = segs[:, 2] - p1x, segs[:, 3] - p1y
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = ((p1x - ox) * ey - (p1y - oy) * ex) / denom
        u = ((p1x - ox) * dy - (p1y - oy) * dx) / denom
    bad = (np.abs(denom) < 1e-12) | (t < 0.0) | (u < 0.0) | (u > 1.0)
    t = np.where(bad, np.inf, t)
    u = np.where(bad, np.nan, u)
    return t, u


def first_hit(origin, direction, segs: np.ndarray, max_range: float = np.inf):
    """Nearest wall hit along a ray: (t, wall_index) or (inf, -1)."""
    if len(segs) == 0:
        return np.inf, -1
    t, _ = ray_segments(origin, direction, segs)
    i = int(np.argmin(t))
    if t[i] > max_range:
        return np.inf, -1
    return float(t[i]), i


def segment_blocked(a, b, segs: np.ndarray, t_max: float = 1.0 - 1e-9) -> bool:
    """True when the open segment a→b crosses any of the given segments.

    Hits at parameter t >= t_max (i.e. essentially at b) do not count, so a
    sight line ending exactly on a wall is not blocked by that wall.
    """
    if len(segs) == 0:
        return False
    d = (b[0] - a[0], b[1] - a[1])
    t, _ = ray_segments(a, d, segs)
    return bool(np.any(t < t_max))


def point_segment_distance(p, a, b) -> float:
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    e = b - a
    L2 = float(e @ e)
    if L2 < 1e-18:
        return float(np.linalg.norm(p - a))
    t = float(np.clip((p - a) @ e / L2, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * e)))
