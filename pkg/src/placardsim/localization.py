"""Active-scan pipeline: region isolation, 5-step corner extraction, normalized
DLT homography, pose recovery from K^-1 H, and simulated transcription."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import Pose3D, nearest_rotation
from .imageproc import canny, hough_peaks, kmeans_lines, line_intersection
from .sensing import CameraIntrinsics, render_noisy_scene
from .world import Floorplan


class ScanError(Exception):
    """Pipeline diagnostic, tagged with the stage that raised it."""

    stage = "scan"


class CornerExtractionError(ScanError):
    stage = "corners"


class DegenerateQuadError(ScanError):
    stage = "homography"


class BehindCameraError(ScanError):
    stage = "pose"


class ReadError(ScanError):
    stage = "transcription"


@dataclass
class Quad:
    """Image-plane corners ordered TL, TR, BR, BL in the placard frame."""

    corners: np.ndarray       # (4, 2) px

    def __post_init__(self):
        self.corners = np.asarray(self.corners, dtype=float).reshape(4, 2)
        crosses = []
        for i in range(4):
            a = self.corners[(i + 1) % 4] - self.corners[i]
            b = self.corners[(i + 2) % 4] - self.corners[(i + 1) % 4]
            crosses.append(a[0] * b[1] - a[1] * b[0])
        if abs(sum(crosses)) < 1e-12:
            raise DegenerateQuadError("zero-area quad")
        s = np.sign(crosses)
        if not (np.all(s > 0) or np.all(s < 0)):
            raise DegenerateQuadError("non-convex corner ordering")

    @property
    def area(self) -> float:
        x, y = self.corners[:, 0], self.corners[:, 1]
        return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass
class Homography:
    """3x3 map from placard-plane meters to image pixels, Frobenius-normalized
    with the sign fixed by the bottom-right-most significant entry."""

    matrix: np.ndarray
    residual: float = 0.0     # max reprojection error over the fit correspondences

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(3, 3)

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        ph = np.column_stack([pts, np.ones(len(pts))]) @ self.matrix.T
        return ph[:, :2] / ph[:, 2:3]


@dataclass
class PlacardEstimate:
    pose: Pose3D              # map frame
    text: str | None
    read_error: bool
    corner_residual: float    # px
    source: str               # "WD" | "IFE"


def model_corners(width: float, height: float) -> np.ndarray:
    """Placard-plane corners (meters, y down) ordered TL, TR, BR, BL."""
    w2, h2 = width / 2.0, height / 2.0
    return np.array([[-w2, -h2], [w2, -h2], [w2, h2], [-w2, h2]])


# ---------------------------------------------------------------------------
# region isolation + corner extraction

def isolate_regions(mask: np.ndarray, min_area: int = 100) -> list[np.ndarray]:
    """8-connected components of the placard mask, area-filtered, ordered by
    centroid (row, then column). Components keep only their outer contour
    footprint: interior holes from label noise are filled."""
    mask = np.asarray(mask, dtype=bool)
    lab, n = ndimage.label(mask, structure=np.ones((3, 3)))
    if n == 0:
        return []
    areas = np.bincount(lab.ravel())
    objects = ndimage.find_objects(lab)
    regions = []
    for i in range(1, n + 1):
        if areas[i] < min_area:
            continue
        sl = objects[i - 1]
        sel = np.zeros(mask.shape, dtype=bool)
        sel[sl] = ndimage.binary_fill_holes(lab[sl] == i)
        ys, xs = np.nonzero(sel[sl])
        regions.append((float(ys.mean()) + sl[0].start,
                        float(xs.mean()) + sl[1].start, sel))
    regions.sort(key=lambda t: (t[0], t[1]))
    return [sel for _, _, sel in regions]


def extract_corners(region: np.ndarray, margin: int = 5, canny_sigma: float = 1.0,
                    canny_low: float = 0.15, canny_high: float = 0.4,
                    hough_votes: int = 10, theta_step_deg: float = 1.0,
                    rho_step: float = 1.0) -> Quad:
    """Five-step corner pipeline: margined bounding box, Canny, full Hough,
    K=4 line clustering, in-box intersections ordered into a Quad."""
    region = np.asarray(region, dtype=bool)
    ys, xs = np.nonzero(region)
    if len(xs) == 0:
        raise CornerExtractionError("empty region")
    u0 = max(0, int(xs.min()) - margin)
    v0 = max(0, int(ys.min()) - margin)
    u1 = min(region.shape[1], int(xs.max()) + margin + 1)
    v1 = min(region.shape[0], int(ys.max()) + margin + 1)
    crop = region[v0:v1, u0:u1].astype(float)

    edges = canny(crop, sigma=canny_sigma, low_ratio=canny_low, high_ratio=canny_high)
    lines = hough_peaks(edges, theta_step_deg=theta_step_deg, rho_step=rho_step,
                        min_votes=hough_votes)
    if len(lines) < 4:
        raise CornerExtractionError(f"only {len(lines)} Hough lines")
    try:
        centers = kmeans_lines(lines, k=4)
    except ValueError as e:
        raise CornerExtractionError(f"k-means failed: {e}") from e

    pts = []
    for i in range(4):
        for j in range(i + 1, 4):
            p = line_intersection(centers[i], centers[j])
            if p is None:
                continue
            if -0.5 <= p[0] <= crop.shape[1] - 0.5 and -0.5 <= p[1] <= crop.shape[0] - 0.5:
                pts.append(p)
    if len(pts) != 4:
        raise CornerExtractionError(f"{len(pts)} in-box intersections (need 4)")

    pts = np.asarray(pts) + np.array([u0, v0])
    return order_quad(pts)


def order_quad(pts: np.ndarray) -> Quad:
    """Order 4 points by angle about their centroid (clockwise in image
    coordinates), starting at the topmost-leftmost corner."""
    pts = np.asarray(pts, dtype=float).reshape(4, 2)
    c = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0])
    order = np.argsort(ang, kind="stable")
    ordered = pts[order]
    anchor = min(range(4), key=lambda i: (ordered[i, 1], ordered[i, 0]))
    ordered = np.roll(ordered, -anchor, axis=0)
    return Quad(ordered)


# ---------------------------------------------------------------------------
# DLT homography

def _normalizing_transform(pts: np.ndarray) -> np.ndarray:
    c = pts.mean(axis=0)
    d = np.linalg.norm(pts - c, axis=1).mean()
    if d < 1e-12:
        raise DegenerateQuadError("coincident points")
    s = math.sqrt(2.0) / d
    return np.array([[s, 0.0, -s * c[0]], [0.0, s, -s * c[1]], [0.0, 0.0, 1.0]])


def _apply_h(T: np.ndarray, pts: np.ndarray) -> np.ndarray:
    ph = np.column_stack([pts, np.ones(len(pts))]) @ T.T
    return ph[:, :2] / ph[:, 2:3]


def sign_normalize(h: np.ndarray) -> np.ndarray:
    """Frobenius norm 1, sign fixed by the bottom-right-most significant entry."""
    h = h / np.linalg.norm(h)
    for idx in ((2, 2), (2, 1), (2, 0), (1, 2), (1, 1), (1, 0), (0, 2), (0, 1), (0, 0)):
        if abs(h[idx]) > 1e-12:
            if h[idx] < 0:
                h = -h
            break
    return h


def _collinear_triple(pts: np.ndarray, tol: float = 1e-9) -> bool:
    scale = max(1.0, float(np.abs(pts).max()))
    for i in range(4):
        tri = np.delete(pts, i, axis=0)
        area = 0.5 * abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                         - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
        if area < tol * scale * scale:
            return True
    return False


def compute_homography(image: Quad, width: float = 0.151,
                       height: float = 0.051) -> Homography:
    """Normalized DLT from the 4 model-corner correspondences."""
    img = image.corners
    model = model_corners(width, height)
    if _collinear_triple(img):
        raise DegenerateQuadError("three image corners are collinear")

    t_img = _normalizing_transform(img)
    t_model = _normalizing_transform(model)
    x = _apply_h(t_model, model)
    xp = _apply_h(t_img, img)

    a = np.zeros((8, 9))
    for i in range(4):
        X, Y = x[i]
        u, v = xp[i]
        a[2 * i] = [-X, -Y, -1.0, 0.0, 0.0, 0.0, u * X, u * Y, u]
        a[2 * i + 1] = [0.0, 0.0, 0.0, -X, -Y, -1.0, v * X, v * Y, v]
    _, _, vt = np.linalg.svd(a)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_img) @ hn @ t_model
    h = sign_normalize(h)

    hom = Homography(h)
    proj = hom.apply(model)
    hom.residual = float(np.max(np.linalg.norm(proj - img, axis=1)))
    if np.linalg.cond(h) > 1e12:
        raise DegenerateQuadError("homography is numerically singular")
    return hom


# ---------------------------------------------------------------------------
# pose from homography

def pose_from_homography(H: Homography, K: CameraIntrinsics) -> Pose3D:
    """Placard pose in the camera frame from B = K^-1 H = [r1 r2 t] up to scale.

    lambda = 2/(|b1|+|b2|) with the sign putting the placard in front of the
    camera; R is re-orthonormalized by nearest-rotation projection.
    """
    b = np.linalg.inv(K.matrix) @ H.matrix
    n1, n2 = np.linalg.norm(b[:, 0]), np.linalg.norm(b[:, 1])
    if n1 + n2 < 1e-12:
        raise BehindCameraError("degenerate homography scale")
    lam = 2.0 / (n1 + n2)
    if (lam * b[2, 2]) <= 0:
        lam = -lam
    t = lam * b[:, 2]
    if t[2] <= 0:
        raise BehindCameraError("placard reconstructs behind the camera")
    r1 = lam * b[:, 0]
    r2 = lam * b[:, 1]
    r3 = np.cross(r1, r2)
    r = nearest_rotation(np.column_stack([r1, r2, r3]))
    return Pose3D(t, r)


# ---------------------------------------------------------------------------
# transcription

def rectified_density(H: Homography, width: float = 0.151) -> float:
    """Pixels available per meter of placard width in the rectified image."""
    quad = H.apply(model_corners(width, width * 0.051 / 0.151))
    top = float(np.linalg.norm(quad[1] - quad[0]))
    bottom = float(np.linalg.norm(quad[2] - quad[3]))
    return (top + bottom) / 2.0 / width


def char_success_probability(rho: float, residual: float, midpoint: float = 400.0,
                             scale: float = 60.0, residual_scale: float = 20.0) -> float:
    p = 1.0 / (1.0 + math.exp(-(rho - midpoint) / scale))
    return p * math.exp(-max(0.0, residual) / residual_scale)


def rectify_and_transcribe(H: Homography, K: CameraIntrinsics, pose: Pose3D,
                           placard, rng: np.random.Generator,
                           midpoint: float = 400.0, scale: float = 60.0,
                           residual_scale: float = 20.0) -> str:
    """Simulated OCR over the rectified view; raises ReadError when any
    character fails (probability driven by rectified pixel density)."""
    if placard is None or not placard.text:
        raise ReadError("no transcribable text in the rectified view")
    rho = rectified_density(H, placard.width)
    p = char_success_probability(rho, H.residual, midpoint, scale, residual_scale)
    for ch in placard.text:
        if rng.random() >= p:
            raise ReadError(f"unreadable character {ch!r} at density {rho:.0f} px/m")
    return placard.text


# ---------------------------------------------------------------------------
# composite active scan

def active_scan(fp: Floorplan, camera: Pose3D, K: CameraIntrinsics, cfg,
                rng: np.random.Generator, source: str):
    """Segment, then per region: corners, homography, pose, map-frame
    transform, transcription. Returns (estimates, diagnostics)."""
    mask, labels = render_noisy_scene(fp, camera, K, cfg.label_noise, rng)
    regions = isolate_regions(mask.data, cfg.min_region_area)
    estimates, diagnostics = [], []
    for region in regions:
        try:
            quad = extract_corners(region, margin=cfg.bbox_margin,
                                   canny_sigma=cfg.canny_sigma,
                                   canny_low=cfg.canny_low, canny_high=cfg.canny_high,
                                   hough_votes=cfg.hough_votes,
                                   theta_step_deg=cfg.theta_step_deg,
                                   rho_step=cfg.rho_step)
            ids = labels[region]
            ids = ids[ids >= 0]
            placard = None
            if len(ids):
                placard = fp.placards[int(np.bincount(ids).argmax())]
            width = placard.width if placard is not None else 0.151
            height = placard.height if placard is not None else 0.051
            hom = compute_homography(quad, width, height)
            pose_cam = pose_from_homography(hom, K)
        except ScanError as e:
            diagnostics.append({"stage": e.stage, "error": str(e)})
            continue
        pose_map = camera.compose(pose_cam)
        try:
            text = rectify_and_transcribe(hom, K, pose_cam, placard, rng,
                                          cfg.char_midpoint, cfg.char_scale,
                                          cfg.residual_scale)
            read_error = False
        except ReadError as e:
            diagnostics.append({"stage": e.stage, "error": str(e)})
            text, read_error = None, True
        estimates.append(PlacardEstimate(pose_map, text, read_error,
                                         hom.residual, source))
    return estimates, diagnostics
