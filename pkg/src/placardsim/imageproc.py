"""Canny edge detection and Hough line transforms over small binary images.

Shared by the wall-scan planner (grid cells) and the placard corner extractor
(mask pixels); coordinates are (x=column, y=row) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


def gaussian_blur(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    return ndimage.gaussian_filter(img.astype(float), sigma=sigma, mode="nearest")


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
_SOBEL_Y = _SOBEL_X.T


def sobel_gradients(img: np.ndarray):
    gx = ndimage.convolve(img, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(img, _SOBEL_Y, mode="nearest")
    return gx, gy


def canny(img: np.ndarray, sigma: float = 1.0,
          low_ratio: float = 0.15, high_ratio: float = 0.4) -> np.ndarray:
    """Boolean edge map: blur, Sobel, non-max suppression, hysteresis.

    Thresholds are relative to the gradient maximum, which keeps the detector
    scale-free across binary grids and masks. Non-max ties break toward the
    forward neighbor so symmetric steps thin to a single cell.
    """
    img = img.astype(float)
    blurred = gaussian_blur(img, sigma)
    gx, gy = sobel_gradients(blurred)
    mag = np.hypot(gx, gy)
    if mag.max() <= 0:
        return np.zeros(img.shape, dtype=bool)
    ang = np.arctan2(gy, gx)

    # quantize direction to 0/45/90/135 and compare against the two neighbors
    sector = (np.round(ang / (math.pi / 4.0)).astype(int)) % 4
    h, w = img.shape
    padded = np.pad(mag, 1, mode="constant")

    def shifted(dx, dy):
        return padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]

    offs = {0: (1, 0), 1: (1, 1), 2: (0, 1), 3: (-1, 1)}
    nms = np.zeros_like(mag, dtype=bool)
    tol = 1e-9 * mag.max()    # exact symmetric steps tie up to float noise
    for s, (dx, dy) in offs.items():
        sel = sector == s
        fwd = shifted(dx, dy)
        bwd = shifted(-dx, -dy)
        keep = (mag >= fwd - tol) & (mag > bwd + tol)   # strict backward: thin ties
        nms |= sel & keep
    nms &= mag > 0

    high = high_ratio * mag.max()
    low = low_ratio * mag.max()
    strong = nms & (mag >= high)
    weak = nms & (mag >= low)
    lab, n = ndimage.label(weak, structure=np.ones((3, 3)))
    keep_ids = np.unique(lab[strong])
    keep_ids = keep_ids[keep_ids > 0]
    out = np.isin(lab, keep_ids)
    return out


@dataclass
class HoughLine:
    rho: float
    theta: float       # [0, pi)
    votes: int

    def point_distance(self, x: float, y: float) -> float:
        return abs(x * math.cos(self.theta) + y * math.sin(self.theta) - self.rho)


def _accumulate(xs: np.ndarray, ys: np.ndarray, thetas: np.ndarray,
                rho_step: float, rho_max: float):
    """Vote matrix (n_rho, n_theta) and the rho-index offset."""
    n_rho = int(2 * math.ceil(rho_max / rho_step)) + 1
    offset = n_rho // 2
    acc = np.zeros((n_rho, len(thetas)), dtype=np.int32)
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    rho = np.outer(xs, cos_t) + np.outer(ys, sin_t)          # (P, T)
    ri = np.round(rho / rho_step).astype(int) + offset
    for ti in range(len(thetas)):
        np.add.at(acc[:, ti], ri[:, ti], 1)
    return acc, offset


def hough_peaks(edges: np.ndarray, theta_step_deg: float = 1.0,
                rho_step: float = 1.0, min_votes: int = 10,
                nms_rho: int = 2, nms_theta: int = 2) -> list[HoughLine]:
    """Standard (rho, theta) accumulator peaks with local non-max suppression."""
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    thetas = np.deg2rad(np.arange(0.0, 180.0, theta_step_deg))
    rho_max = math.hypot(edges.shape[0], edges.shape[1])
    acc, offset = _accumulate(xs.astype(float), ys.astype(float), thetas,
                              rho_step, rho_max)
    maxed = ndimage.maximum_filter(acc, size=(2 * nms_rho + 1, 2 * nms_theta + 1),
                                   mode="nearest")
    peak = (acc == maxed) & (acc >= min_votes)
    lines = []
    for ri, ti in zip(*np.nonzero(peak)):
        lines.append(HoughLine((ri - offset) * rho_step, float(thetas[ti]),
                               int(acc[ri, ti])))
    lines.sort(key=lambda l: (-l.votes, l.rho, l.theta))
    return lines


@dataclass
class HoughSegment:
    p1: tuple      # (x, y) in image coords
    p2: tuple
    theta: float   # line angle parameter of the supporting (rho, theta) line
    rho: float

    @property
    def length(self) -> float:
        return math.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1])

    def direction(self):
        L = self.length
        return ((self.p2[0] - self.p1[0]) / L, (self.p2[1] - self.p1[1]) / L)


def hough_segments(edges: np.ndarray, theta_step_deg: float = 1.0,
                   rho_step: float = 1.0, min_votes: int = 15,
                   min_length: float = 4.0, max_gap: float = 2.0) -> list[HoughSegment]:
    """Deterministic progressive Hough: repeatedly take the strongest
    accumulator line, walk its supporting pixels into maximal runs (splitting
    at gaps), emit runs at least min_length long, remove their pixels, repeat.
    """
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    pts = np.column_stack([xs, ys]).astype(float)
    thetas = np.deg2rad(np.arange(0.0, 180.0, theta_step_deg))
    rho_max = math.hypot(edges.shape[0], edges.shape[1])
    cos_t, sin_t = np.cos(thetas), np.sin(thetas)
    alive = np.ones(len(pts), dtype=bool)
    segments = []
    dead_bins = None    # (rho, theta) bins that yielded no segment

    while alive.any():
        p = pts[alive]
        acc, offset = _accumulate(p[:, 0], p[:, 1], thetas, rho_step, rho_max)
        if dead_bins is None:
            dead_bins = np.zeros(acc.shape, dtype=bool)
        acc[dead_bins] = 0
        ri, ti = np.unravel_index(int(np.argmax(acc)), acc.shape)
        if acc[ri, ti] < min_votes:
            break
        theta = float(thetas[ti])
        rho = (ri - offset) * rho_step
        c, s = math.cos(theta), math.sin(theta)

        live_idx = np.nonzero(alive)[0]
        d = np.abs(pts[live_idx, 0] * c + pts[live_idx, 1] * s - rho)
        band = live_idx[d <= 0.6 * rho_step]
        if len(band) == 0:     # quantization mismatch
            dead_bins[ri, ti] = True
            continue
        # order supporting pixels along the line direction (-s, c)
        proj = pts[band, 0] * (-s) + pts[band, 1] * c
        order = np.argsort(proj, kind="stable")
        band, proj = band[order], proj[order]

        run_start = 0
        removed_any = False
        for i in range(1, len(band) + 1):
            end_run = i == len(band) or (proj[i] - proj[i - 1]) > max_gap
            if not end_run:
                continue
            run = band[run_start:i]
            length = proj[i - 1] - proj[run_start]
            if length + 1.0 >= min_length and len(run) >= 2:
                a = tuple(pts[run[0]])
                b = tuple(pts[run[-1]])
                segments.append(HoughSegment(a, b, theta, rho))
                alive[run] = False
                removed_any = True
            run_start = i
        if not removed_any:
            # nothing long enough on this line: retire the bin, keep the
            # pixels for other lines (they may support a different direction)
            dead_bins[ri, ti] = True

    segments.sort(key=lambda sg: (sg.p1[1], sg.p1[0], sg.p2[1], sg.p2[0]))
    return segments


def line_intersection(l1: HoughLine, l2: HoughLine):
    """Intersection point of two (rho, theta) lines, or None if near-parallel."""
    a = np.array([[math.cos(l1.theta), math.sin(l1.theta)],
                  [math.cos(l2.theta), math.sin(l2.theta)]])
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < 1e-9:
        return None
    b = np.array([l1.rho, l2.rho])
    x = np.linalg.solve(a, b)
    return float(x[0]), float(x[1])


def kmeans_lines(lines: list[HoughLine], k: int = 4, max_iter: int = 50):
    """Vote-weighted k-means over lines embedded as (cos 2θ, sin 2θ, ρ̂);
    returns k center lines. The doubled angle keeps θ and θ+π neighbors; ρ is
    scaled to balance the coordinates, and votes weight the means so alias
    peaks of a strong line do not pull clusters apart. Deterministic greedy
    init (weight times squared distance, from the strongest line).
    """
    if len(lines) < k:
        raise ValueError(f"need at least {k} lines, got {len(lines)}")
    # same line, two (rho, theta) forms near the theta=pi seam: fix rho >= 0
    canon = []
    for l in lines:
        if l.rho < 0:
            canon.append(HoughLine(-l.rho, l.theta - math.pi, l.votes))
        else:
            canon.append(HoughLine(l.rho, l.theta, l.votes))
    lines = canon
    # half-scale rho: separating parallel sides must cost more than the angular
    # spread of quantization aliases around one physical line
    rho_scale = max(1.0, 0.5 * max(abs(l.rho) for l in lines))
    feats = np.array([[math.cos(2 * l.theta), math.sin(2 * l.theta), l.rho / rho_scale]
                      for l in lines])
    w = np.array([float(l.votes) ** 2 for l in lines])

    centers = [int(np.argmax(w))]
    while len(centers) < k:
        d2 = np.min([np.sum((feats - feats[c]) ** 2, axis=1) for c in centers], axis=0)
        centers.append(int(np.argmax(w * d2)))
    cent = feats[centers].copy()

    assign = np.zeros(len(feats), dtype=int)
    for it in range(max_iter):
        d = np.linalg.norm(feats[:, None, :] - cent[None, :, :], axis=2)
        new_assign = np.argmin(d, axis=1)
        if np.array_equal(new_assign, assign) and it > 0:
            break
        assign = new_assign
        for j in range(k):
            sel = assign == j
            if not sel.any():
                raise ValueError("k-means produced an empty cluster")
            cent[j] = np.average(feats[sel], axis=0, weights=w[sel])

    out = []
    trim = 0.25    # quantization aliases sit ~0.1 from the true line, chords ~0.3+
    for j in range(k):
        sel = np.nonzero(assign == j)[0]
        # trim against the strongest member: cross-edge chord peaks land in a
        # cluster but sit far from its dominant line and would bias the mean
        anchor = feats[sel[int(np.argmax(w[sel]))]]
        d = np.linalg.norm(feats[sel] - anchor, axis=1)
        kept = sel[d <= trim]
        if len(kept) == 0:
            kept = sel[[int(np.argmin(d))]]
        c2, s2, _ = np.average(feats[kept], axis=0, weights=w[kept])
        theta = 0.5 * math.atan2(s2, c2)
        # re-project member foot points onto the center normal so rho keeps a
        # consistent sign even when the cluster straddles an angle seam
        nb = (math.cos(theta), math.sin(theta))
        wsum = float(np.sum(w[kept]))
        rho = sum(w[i] * lines[i].rho * (math.cos(lines[i].theta) * nb[0]
                                         + math.sin(lines[i].theta) * nb[1])
                  for i in kept) / wsum
        out.append(HoughLine(rho, theta, int(round(wsum))))
    return out
