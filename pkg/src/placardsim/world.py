"""Ground-truth world: wall segments, wall-mounted placards, floorplan file I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import (Pose2D, Pose3D, first_hit, point_segment_distance,
                       ray_segments, segment_blocked)

WALL_HEIGHT = 2.5          # walls are thin 2D segments extruded to this height
DEFAULT_ROBOT_RADIUS = 0.25

PLACARD_WIDTH = 0.151
PLACARD_HEIGHT = 0.051
DEFAULT_MOUNT_HEIGHT = 1.4


class FloorplanError(Exception):
    pass


class FloorplanParseError(FloorplanError):
    pass


class FloorplanValidationError(FloorplanError):
    pass


@dataclass
class Placard:
    """A planar sign mounted on a wall, addressed by wall index + offset along it."""

    wall_index: int
    offset: float              # meters from the wall's first endpoint to the sign center
    mount_height: float = DEFAULT_MOUNT_HEIGHT
    text: str = ""
    width: float = PLACARD_WIDTH
    height: float = PLACARD_HEIGHT

    def as_dict(self) -> dict:
        return {
            "wall_index": self.wall_index,
            "offset_m": self.offset,
            "mount_height_m": self.mount_height,
            "text": self.text,
            "width_m": self.width,
            "height_m": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "Placard":
        known = {"wall_index", "offset_m", "mount_height_m", "text", "width_m", "height_m"}
        unknown = set(d) - known
        if unknown:
            raise FloorplanParseError(f"unknown placard keys: {sorted(unknown)}")
        missing = known - set(d)
        if missing:
            raise FloorplanParseError(f"missing placard keys: {sorted(missing)}")
        return Placard(int(d["wall_index"]), float(d["offset_m"]),
                       float(d["mount_height_m"]), str(d["text"]),
                       float(d["width_m"]), float(d["height_m"]))


@dataclass
class Floorplan:
    """Immutable ground truth; safe to share read-only across runs."""

    bounds: tuple            # (xmin, ymin, xmax, ymax)
    walls: list              # [(x1, y1, x2, y2), ...] meters
    placards: list           # [Placard, ...]
    robot_start: Pose2D
    wall_height: float = WALL_HEIGHT

    @cached_property
    def walls_array(self) -> np.ndarray:
        return np.asarray(self.walls, dtype=float).reshape(-1, 4)

    def wall_length(self, i: int) -> float:
        x1, y1, x2, y2 = self.walls[i]
        return math.hypot(x2 - x1, y2 - y1)

    def total_wall_length(self) -> float:
        return sum(self.wall_length(i) for i in range(len(self.walls)))

    def wall_direction(self, i: int) -> np.ndarray:
        x1, y1, x2, y2 = self.walls[i]
        d = np.array([x2 - x1, y2 - y1])
        return d / np.linalg.norm(d)

    def interior_wall_indices(self, tol: float = 1e-6) -> list[int]:
        """Walls not lying on the bounding rectangle's perimeter."""
        xmin, ymin, xmax, ymax = self.bounds
        out = []
        for i, (x1, y1, x2, y2) in enumerate(self.walls):
            on_edge = (
                (abs(x1 - xmin) < tol and abs(x2 - xmin) < tol)
                or (abs(x1 - xmax) < tol and abs(x2 - xmax) < tol)
                or (abs(y1 - ymin) < tol and abs(y2 - ymin) < tol)
                or (abs(y1 - ymax) < tol and abs(y2 - ymax) < tol)
            )
            if not on_edge:
                out.append(i)
        return out

    # -- placard geometry ---------------------------------------------------

    def placard_center_xy(self, p: Placard) -> np.ndarray:
        x1, y1, x2, y2 = self.walls[p.wall_index]
        d = self.wall_direction(p.wall_index)
        return np.array([x1, y1]) + p.offset * d

    @cached_property
    def _placard_normals(self) -> list[np.ndarray]:
        return [self._infer_normal(p) for p in self.placards]

    def _infer_normal(self, p: Placard) -> np.ndarray:
        """Pick the wall perpendicular that faces free space.

        Chooses the side with larger ray-cast clearance (probe must stay in
        bounds); ties break toward the bounds center.
        """
        d = self.wall_direction(p.wall_index)
        c = self.placard_center_xy(p)
        cand = [np.array([-d[1], d[0]]), np.array([d[1], -d[0]])]
        xmin, ymin, xmax, ymax = self.bounds
        center = np.array([(xmin + xmax) / 2.0, (ymin + ymax) / 2.0])
        others = np.delete(self.walls_array, p.wall_index, axis=0)

        def clearance(n):
            probe = c + 0.05 * n
            if not (xmin - 1e-9 <= probe[0] <= xmax + 1e-9
                    and ymin - 1e-9 <= probe[1] <= ymax + 1e-9):
                return -1.0
            t, _ = first_hit(probe, n, others, max_range=np.inf)
            return min(t, 2.0)   # capped: a normal hallway counts as fully clear

        c0, c1 = clearance(cand[0]), clearance(cand[1])
        if c0 < 0 and c1 < 0:
            raise FloorplanValidationError(
                f"placard '{p.text}' has no free side on wall {p.wall_index}")
        if abs(c0 - c1) > 1e-9:
            return cand[0] if c0 > c1 else cand[1]
        return cand[0] if float(np.dot(cand[0], center - c)) >= 0 else cand[1]

    def placard_normal(self, p: Placard) -> np.ndarray:
        """Unit horizontal normal pointing into free space (3-vector, z=0)."""
        n2 = self._placard_normals[self.placards.index(p)]
        return np.array([n2[0], n2[1], 0.0])

    def placard_pose(self, p: Placard) -> Pose3D:
        """Placard frame: x along width, y down, z into the wall (away from free space)."""
        n = self.placard_normal(p)
        z = -n
        y = np.array([0.0, 0.0, -1.0])
        x = np.cross(y, z)
        c = self.placard_center_xy(p)
        return Pose3D(np.array([c[0], c[1], p.mount_height]), np.column_stack([x, y, z]))

    def placard_corners(self, p: Placard) -> np.ndarray:
        """(4,3) map-frame corners ordered TL, TR, BR, BL as seen from the free side."""
        w2, h2 = p.width / 2.0, p.height / 2.0
        local = np.array([[-w2, -h2, 0.0], [w2, -h2, 0.0],
                          [w2, h2, 0.0], [-w2, h2, 0.0]])
        return self.placard_pose(p).transform_points(local)

    # -- validation / io ----------------------------------------------------

    def validate(self, robot_radius: float = DEFAULT_ROBOT_RADIUS) -> None:
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise FloorplanValidationError("degenerate bounds")
        for i, (x1, y1, x2, y2) in enumerate(self.walls):
            if math.hypot(x2 - x1, y2 - y1) < 1e-9:
                raise FloorplanValidationError(f"wall {i} has zero length")
            for x, y in ((x1, y1), (x2, y2)):
                if not (xmin - 1e-6 <= x <= xmax + 1e-6 and ymin - 1e-6 <= y <= ymax + 1e-6):
                    raise FloorplanValidationError(f"wall {i} outside bounds")
        for p in self.placards:
            if not p.text:
                raise FloorplanValidationError("placard with empty text")
            if p.width <= 0 or p.height <= 0:
                raise FloorplanValidationError(f"placard '{p.text}' with non-positive size")
            if not (0 <= p.wall_index < len(self.walls)):
                raise FloorplanValidationError(f"placard '{p.text}' references bad wall index")
            L = self.wall_length(p.wall_index)
            half = p.width / 2.0
            if p.offset < half - 1e-3 or p.offset > L - half + 1e-3:
                raise FloorplanValidationError(
                    f"placard '{p.text}' lies off wall {p.wall_index} "
                    f"(offset {p.offset:.3f} m, wall length {L:.3f} m)")
            if not (0.0 < p.mount_height - p.height / 2.0
                    and p.mount_height + p.height / 2.0 < self.wall_height):
                raise FloorplanValidationError(
                    f"placard '{p.text}' mount height outside wall extent")
        rs = self.robot_start
        if not (xmin <= rs.x <= xmax and ymin <= rs.y <= ymax):
            raise FloorplanValidationError("robot_start outside bounds")
        for i, (x1, y1, x2, y2) in enumerate(self.walls):
            d = point_segment_distance((rs.x, rs.y), (x1, y1), (x2, y2))
            if d < robot_radius:
                raise FloorplanValidationError(
                    f"robot_start within {d:.3f} m of wall {i} (< robot radius)")

    def as_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "walls": [list(w) for w in self.walls],
            "placards": [p.as_dict() for p in self.placards],
            "robot_start": self.robot_start.as_list(),
        }

    @staticmethod
    def from_dict(d: dict) -> "Floorplan":
        known = {"bounds", "walls", "placards", "robot_start"}
        unknown = set(d) - known
        if unknown:
            raise FloorplanParseError(f"unknown floorplan keys: {sorted(unknown)}")
        missing = known - set(d)
        if missing:
            raise FloorplanParseError(f"missing floorplan keys: {sorted(missing)}")
        try:
            bounds = tuple(float(v) for v in d["bounds"])
            if len(bounds) != 4:
                raise ValueError("bounds must have 4 entries")
            walls = []
            for w in d["walls"]:
                if len(w) != 4:
                    raise ValueError("wall must have 4 entries")
                walls.append(tuple(float(v) for v in w))
            placards = [Placard.from_dict(pd) for pd in d["placards"]]
            rs = d["robot_start"]
            if len(rs) != 3:
                raise ValueError("robot_start must be [x, y, heading_rad]")
            start = Pose2D.from_list(rs)
        except FloorplanParseError:
            raise
        except (TypeError, ValueError, KeyError) as e:
            raise FloorplanParseError(str(e)) from e
        return Floorplan(bounds, walls, placards, start)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Floorplan):
            return NotImplemented
        return (self.bounds == other.bounds and self.walls == other.walls
                and self.placards == other.placards
                and self.robot_start == other.robot_start)


def load_floorplan(path, robot_radius: float = DEFAULT_ROBOT_RADIUS) -> Floorplan:
    """Load and validate a floorplan file (JSON grammar, unknown keys rejected)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise FloorplanParseError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FloorplanParseError(f"malformed floorplan file {path}: {e}") from e
    fp = Floorplan.from_dict(raw)
    fp.validate(robot_radius)
    return fp


def save_floorplan(fp: Floorplan, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(fp.as_dict(), f, indent=2)
        f.write("\n")


def placard_visible_from(fp: Floorplan, camera: Pose3D, placard: Placard,
                         fov: float, max_range: float) -> bool:
    """True iff all four corners are in the symmetric angular frustum, within
    range, front-facing and unoccluded by walls (2.5D segment test)."""
    corners = fp.placard_corners(placard)
    n = fp.placard_normal(placard)
    center = fp.placard_pose(placard).position
    if float(np.dot(n, camera.position - center)) <= 0.0:
        return False
    rel = (corners - camera.position) @ camera.rotation  # camera-frame coords
    if np.any(rel[:, 2] <= 1e-9):
        return False
    if np.any(np.linalg.norm(rel, axis=1) > max_range):
        return False
    half = fov / 2.0
    if np.any(np.abs(np.arctan2(rel[:, 0], rel[:, 2])) > half):
        return False
    if np.any(np.abs(np.arctan2(rel[:, 1], rel[:, 2])) > half):
        return False
    return not any(
        _sight_blocked(fp, camera.position, c) for c in corners)


def _sight_blocked(fp: Floorplan, eye: np.ndarray, target: np.ndarray) -> bool:
    """2.5D occlusion: a wall blocks when the crossing point's height is below
    the wall top. Crossings essentially at the target do not count."""
    segs = fp.walls_array
    if len(segs) == 0:
        return False
    d = (target[0] - eye[0], target[1] - eye[1])
    t, _ = ray_segments(eye[:2], d, segs)
    hit = (t > 1e-9) & (t < 1.0 - 1e-9)   # walls at the eye or target do not block
    if not np.any(hit):
        return False
    z = eye[2] + t[hit] * (target[2] - eye[2])
    return bool(np.any(z <= fp.wall_height + 1e-9))
