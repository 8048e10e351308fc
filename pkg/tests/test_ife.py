import math

import numpy as np
import pytest

from placardsim.geometry import Pose2D, Pose3D, look_rotation
from placardsim.gridmap import LOG_ODDS_CLAMP, OccupancyGrid, rasterize_ground_truth
from placardsim.ife import (DegeneratePointsError, NoViewpointError, PlaneFit,
                            TooFewPointsError, crop_and_project, fit_plane,
                            get_waypoint)
from placardsim.sensing import CameraIntrinsics, render_depth
from placardsim.world import Floorplan

from oracles import plane_points


def room_fp(extra_walls=()):
    walls = [(0.25, 0.25, 8.25, 0.25), (8.25, 0.25, 8.25, 6.25),
             (8.25, 6.25, 0.25, 6.25), (0.25, 6.25, 0.25, 0.25)]
    return Floorplan((0.0, 0.0, 8.5, 6.5), walls + list(extra_walls), [],
                     Pose2D(4.25, 3.25, 0.0))


def K_small():
    return CameraIntrinsics(fx=200.0, fy=200.0, cx=80.0, cy=60.0, width=160, height=120)


def test_crop_frontoparallel_points_on_plane():
    fp = room_fp()
    cam = Pose3D(np.array([4.25, 2.25, 1.4]), look_rotation([0.0, -1.0, 0.0]))
    K = K_small()
    depth = render_depth(fp, cam, K, max_range=8.0)
    bbox = (75, 55, 85, 65)
    pts = crop_and_project(depth, bbox, K, cam)
    assert len(pts) == 100
    # wall plane y = 0.25: distance from the camera plane is 2.0 for every point
    assert np.allclose(pts[:, 1], 0.25, atol=1e-9)
    cam_plane_dist = cam.position[1] - pts[:, 1]
    assert np.allclose(cam_plane_dist, 2.0, atol=1e-9)


def test_crop_open_space_too_few_points():
    fp = room_fp()
    cam = Pose3D(np.array([4.25, 3.25, 1.4]), look_rotation([0.0, 1.0, 0.0]))
    K = K_small()
    depth = render_depth(fp, cam, K, max_range=2.0)   # nothing within range
    with pytest.raises(TooFewPointsError):
        crop_and_project(depth, (70, 50, 90, 70), K, cam)


def test_crop_oblique_wall_plane_residual():
    fp = room_fp()
    fwd = np.array([math.cos(-1.2), math.sin(-1.2), 0.0])
    cam = Pose3D(np.array([4.25, 3.25, 1.4]), look_rotation(fwd))
    K = K_small()
    depth = render_depth(fp, cam, K, max_range=8.0)
    pts = crop_and_project(depth, (60, 40, 100, 80), K, cam)
    # every back-projected point satisfies the south wall's plane equation
    assert np.max(np.abs(pts[:, 1] - 0.25)) < 1e-9


def test_fit_plane_orientation_toward_robot():
    rng = np.random.default_rng(4)
    pts = plane_points([0.0, 0.0, 1.0], [1.0, 2.0, 0.0], 0.5, 200, rng)
    above = fit_plane(pts, toward=[1.0, 2.0, 5.0])
    assert above.normal @ [0, 0, 1] > 0.99
    below = fit_plane(pts, toward=[1.0, 2.0, -5.0])
    assert below.normal @ [0, 0, -1] > 0.99


def test_fit_plane_degenerate():
    line = np.array([[i * 0.1, 0.0, 0.0] for i in range(30)])
    with pytest.raises(DegeneratePointsError):
        fit_plane(line)
    with pytest.raises(DegeneratePointsError):
        fit_plane(line[:2])


def test_fit_plane_accuracy_with_noise():
    rng = np.random.default_rng(11)
    angles = []
    for _ in range(100):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        pts = plane_points(n, rng.uniform(-1, 1, 3), 0.25, 500, rng, noise=0.005)
        fit = fit_plane(pts, toward=pts.mean(axis=0) + n)
        cos = float(np.clip(abs(fit.normal @ n), -1, 1))
        angles.append(math.degrees(math.acos(cos)))
    assert np.median(angles) < 0.5


def test_fit_plane_residual_and_inliers():
    rng = np.random.default_rng(7)
    pts = plane_points([0, 1, 0], [0, 0, 0], 0.5, 400, rng, noise=0.005)
    fit = fit_plane(pts)
    assert 0.003 < fit.rms_residual < 0.008
    assert fit.inlier_count >= 350


def open_grid_for(fp, res=0.5):
    return rasterize_ground_truth(fp, res)


def test_get_waypoint_unobstructed_preferred_distance():
    fp = room_fp()
    grid = open_grid_for(fp)
    fit = PlaneFit(np.array([4.25, 0.25, 1.4]), np.array([0.0, 1.0, 0.0]), 0.0, 100)
    wp = get_waypoint(fit, grid, 0.5, 3.0, robot=Pose2D(4.25, 3.25), preferred=1.0)
    assert math.isclose(wp.x, 4.25, abs_tol=1e-9)
    assert math.isclose(wp.y, 1.25, abs_tol=1e-9)
    assert abs(wp.heading - (-math.pi / 2)) < 1e-9      # facing the placard


def test_get_waypoint_skips_obstacle():
    # box in front of the target wall: candidates at 1.0 m blocked
    box = [(3.75, 0.75, 4.75, 0.75), (4.75, 0.75, 4.75, 1.75),
           (4.75, 1.75, 3.75, 1.75), (3.75, 1.75, 3.75, 0.75)]
    fp = room_fp(box)
    grid = open_grid_for(fp)
    fit = PlaneFit(np.array([4.25, 0.25, 1.4]), np.array([0.0, 1.0, 0.0]), 0.0, 100)
    wp = get_waypoint(fit, grid, 0.5, 3.0, robot=Pose2D(6.25, 3.25), preferred=1.0)
    # the first feasible candidate lies beyond the box (plus inflation)
    assert wp.y > 1.75
    assert math.isclose(wp.x, 4.25, abs_tol=1e-9)


def test_get_waypoint_alcove_too_narrow():
    fp = room_fp()
    g = OccupancyGrid(0.5, Pose2D(0.0, 0.0), 17, 13)
    g.observed[:, :] = True
    g.log_odds[:, :] = LOG_ODDS_CLAMP          # everything occupied
    fit = PlaneFit(np.array([4.25, 0.25, 1.4]), np.array([0.0, 1.0, 0.0]), 0.0, 100)
    with pytest.raises(NoViewpointError):
        get_waypoint(fit, g, 0.5, 3.0)


def test_get_waypoint_vertical_normal_rejected():
    fp = room_fp()
    grid = open_grid_for(fp)
    fit = PlaneFit(np.array([4.25, 3.25, 1.4]), np.array([0.0, 0.0, 1.0]), 0.0, 100)
    with pytest.raises(NoViewpointError):
        get_waypoint(fit, grid, 0.5, 3.0)
