"""Independent reference implementations used to compute expected values.

Everything here is deliberately brute-force and kept separate from the package
code paths it checks.
"""

import math

import numpy as np

from placardsim.gridmap import CellState


def ray_cast_distance(origin, direction, walls, wall_height=2.5, z0=0.0, dz=0.0):
    """Nearest wall hit distance by testing every wall independently."""
    best = math.inf
    ox, oy = origin
    dx, dy = direction
    for (x1, y1, x2, y2) in walls:
        ex, ey = x2 - x1, y2 - y1
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-14:
            continue
        t = ((x1 - ox) * ey - (y1 - oy) * ex) / denom
        u = ((x1 - ox) * dy - (y1 - oy) * dx) / denom
        if t <= 1e-12 or u < 0.0 or u > 1.0:
            continue
        z = z0 + t * dz
        if z < 0.0 or z > wall_height:
            continue
        best = min(best, t)
    return best


def visibility_by_dense_rays(fp, camera, placard, fov, max_range, n_samples=25):
    """Visibility oracle: densely sample the placard face and require every
    sample (corners included) to pass frustum/range/facing/occlusion ray tests."""
    n = fp.placard_normal(placard)
    center = fp.placard_pose(placard).position
    if float(np.dot(n, camera.position - center)) <= 0:
        return False
    corners = fp.placard_corners(placard)
    # sample a grid over the face via bilinear interpolation of corners
    samples = []
    k = int(math.sqrt(n_samples))
    for a in np.linspace(0, 1, k):
        for b in np.linspace(0, 1, k):
            top = corners[0] + a * (corners[1] - corners[0])
            bot = corners[3] + a * (corners[2] - corners[3])
            samples.append(top + b * (bot - top))
    samples.extend(corners)
    half = fov / 2.0
    for s in samples:
        rel = camera.rotation.T @ (s - camera.position)
        if rel[2] <= 0:
            return False
        if np.linalg.norm(rel) > max_range:
            return False
        if abs(math.atan2(rel[0], rel[2])) > half or abs(math.atan2(rel[1], rel[2])) > half:
            return False
        d = s - camera.position
        L = np.linalg.norm(d[:2])
        if L > 1e-12:
            t = ray_cast_distance(camera.position[:2], d[:2] / L, fp.walls,
                                  fp.wall_height, camera.position[2], d[2] / L)
            if t < L - 1e-6:
                return False
    return True


def bresenham_cells(x0, y0, x1, y1):
    """Reference integer line rasterization (re-derived, classic form)."""
    out = []
    dx, dy = abs(x1 - x0), abs(y1 - y0)
    x, y = x0, y0
    sx = 1 if x1 > x0 else -1
    sy = 1 if y1 > y0 else -1
    if dx >= dy:
        err = dx / 2.0
        while x != x1:
            out.append((x, y))
            err -= dy
            if err < 0:
                y += sy
                err += dx
            x += sx
    else:
        err = dy / 2.0
        while y != y1:
            out.append((x, y))
            err -= dx
            if err < 0:
                x += sx
                err += dy
            y += sy
    out.append((x1, y1))
    return out


def frontier_cells_bruteforce(grid):
    """Full-grid scan for the frontier predicate."""
    out = set()
    for iy in range(grid.height):
        for ix in range(grid.width):
            if grid.state(ix, iy) != CellState.OPEN:
                continue
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    nb = (ix + dx, iy + dy)
                    if grid.in_bounds(*nb) and grid.state(*nb) == CellState.UNEXPLORED:
                        out.add((ix, iy))
    return out


def blob_sets_bruteforce(grid, min_cells=10):
    """Frontier blobs as a set of frozensets, from the brute-force scan."""
    cells = frontier_cells_bruteforce(grid)
    blobs = set()
    remaining = set(cells)
    while remaining:
        root = remaining.pop()
        comp = {root}
        stack = [root]
        while stack:
            cx, cy = stack.pop()
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    nb = (cx + dx, cy + dy)
                    if nb in remaining:
                        remaining.discard(nb)
                        comp.add(nb)
                        stack.append(nb)
        if len(comp) >= min_cells:
            blobs.add(frozenset(comp))
    return blobs


def ucs_path_cost(passable, start, goal, resolution):
    """Uniform-cost search over the 8-connected passable mask; inf = no path."""
    import heapq
    h, w = passable.shape
    dist = {start: 0.0}
    pq = [(0.0, start)]
    seen = set()
    while pq:
        d, c = heapq.heappop(pq)
        if c == goal:
            return d
        if c in seen:
            continue
        seen.add(c)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nb = (c[0] + dx, c[1] + dy)
                if not (0 <= nb[0] < w and 0 <= nb[1] < h):
                    continue
                if not passable[nb[1], nb[0]]:
                    continue
                nd = d + math.hypot(dx, dy) * resolution
                if nd < dist.get(nb, math.inf) - 1e-12:
                    dist[nb] = nd
                    heapq.heappush(pq, (nd, nb))
    return math.inf


def morphological_boundary(occupied):
    """Occupied-region boundary: dilation minus erosion, one cell thick."""
    from scipy import ndimage
    occ = occupied.astype(bool)
    dil = ndimage.binary_dilation(occ, structure=np.ones((3, 3)))
    ero = ndimage.binary_erosion(occ, structure=np.ones((3, 3)))
    return dil & ~ero


def plane_points(normal, point, extent, n, rng, noise=0.0):
    """Sample n points on a plane patch of the given half-extent."""
    normal = np.asarray(normal, float)
    normal = normal / np.linalg.norm(normal)
    a = np.cross(normal, [1.0, 0.0, 0.0])
    if np.linalg.norm(a) < 1e-6:
        a = np.cross(normal, [0.0, 1.0, 0.0])
    a = a / np.linalg.norm(a)
    b = np.cross(normal, a)
    uv = rng.uniform(-extent, extent, size=(n, 2))
    pts = point + uv[:, 0:1] * a + uv[:, 1:2] * b
    if noise > 0:
        pts = pts + rng.normal(0.0, noise, size=(n, 1)) * normal
    return pts
