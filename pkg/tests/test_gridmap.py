import math

import numpy as np
import pytest

from placardsim.geometry import Pose2D
from placardsim.gridmap import (CellState, GridError, OccupancyGrid, classify,
                                ground_truth_wall_cells, integrate_scan,
                                rasterize_ground_truth, to_binary)
from placardsim.sensing import LidarScan, simulate_lidar
from placardsim.world import Floorplan

from oracles import bresenham_cells


def empty_grid(w=12, h=10, res=0.5):
    return OccupancyGrid(res, Pose2D(0.0, 0.0), w, h)


def beam_scan(robot, bearing, rng_m, hit, max_range=8.0):
    return LidarScan(np.array([bearing]), np.array([rng_m]),
                     np.array([hit]), max_range, pose=robot)


def test_single_beam_hit_marks_open_then_occupied():
    g = empty_grid()
    robot = Pose2D(0.25, 0.25)
    integrate_scan(g, robot, beam_scan(robot, 0.0, 2.0, True))
    # 2 m east at 0.5 m cells: cells (0..3, 0) traversed, endpoint (4, 0)
    for ix in range(4):
        assert classify(g, (ix, 0)) == CellState.OPEN
    assert classify(g, (4, 0)) == CellState.OCCUPIED
    assert classify(g, (5, 0)) == CellState.UNEXPLORED


def test_max_range_beam_has_no_occupied_endpoint():
    g = empty_grid()
    robot = Pose2D(0.25, 0.25)
    integrate_scan(g, robot, beam_scan(robot, 0.0, 3.0, False))
    for ix in range(7):
        assert classify(g, (ix, 0)) == CellState.OPEN
    assert not np.any(g.state_array() == int(CellState.OCCUPIED))


def test_robot_outside_grid_rejected():
    g = empty_grid()
    robot = Pose2D(-5.0, 0.25)
    with pytest.raises(GridError, match="outside"):
        integrate_scan(g, robot, beam_scan(robot, 0.0, 1.0, True))


def test_classify_boundary_and_out_of_bounds():
    g = empty_grid()
    with pytest.raises(GridError):
        classify(g, (99, 0))
    g.observed[0, 0] = True
    g.log_odds[0, 0] = 0.0            # likelihood exactly 0.5
    assert classify(g, (0, 0)) == CellState.OCCUPIED   # tie goes to Occupied
    g.log_odds[0, 0] = 3.0
    assert classify(g, (0, 0)) == CellState.OCCUPIED
    g.log_odds[0, 0] = -3.0
    assert classify(g, (0, 0)) == CellState.OPEN


def test_to_binary_unexplored_is_occupied():
    g = empty_grid(4, 3)
    g.observed[1, 1] = True
    g.log_odds[1, 1] = -3.0
    g.observed[2, 2] = True
    g.log_odds[2, 2] = 3.0
    b = to_binary(g)
    assert b[1, 1] == 0
    assert b[2, 2] == 1
    assert b[0, 0] == 1   # never observed


def test_repeated_scans_idempotent_at_saturation():
    g = empty_grid()
    robot = Pose2D(0.25, 0.25)
    scan = beam_scan(robot, 0.0, 2.0, True)
    for _ in range(30):
        integrate_scan(g, robot, scan)
    snap_lo = g.log_odds.copy()
    snap_ob = g.observed.copy()
    integrate_scan(g, robot, scan)
    assert np.array_equal(snap_lo, g.log_odds)
    assert np.array_equal(snap_ob, g.observed)


def test_monotone_observation():
    fp = square_fp()
    g = OccupancyGrid.for_floorplan(fp, 0.5)
    rng = np.random.default_rng(3)
    prev = set()
    for _ in range(12):
        robot = Pose2D(rng.uniform(1.0, 5.0), rng.uniform(1.0, 3.5),
                       rng.uniform(-math.pi, math.pi))
        scan = simulate_lidar(fp, robot, n_beams=90, max_range=8.0)
        integrate_scan(g, robot, scan)
        now = {tuple(c) for c in np.argwhere(g.observed)}
        assert prev <= now
        prev = now


def square_fp():
    return Floorplan((0.0, 0.0, 6.5, 4.5),
                     [(0.25, 0.25, 6.25, 0.25), (6.25, 0.25, 6.25, 4.25),
                      (6.25, 4.25, 0.25, 4.25), (0.25, 4.25, 0.25, 0.25)],
                     [], Pose2D(3.25, 2.25, 0.0))


def oracle_rasterize(fp, grid, robot, scan):
    """Independent per-beam rasterization of one scan."""
    opened, occupied = set(), set()
    r0 = grid.world_to_cell(robot.x, robot.y)
    for bearing, rng_m, hit in zip(scan.bearings, scan.ranges, scan.hits):
        ex = robot.x + rng_m * math.cos(bearing)
        ey = robot.y + rng_m * math.sin(bearing)
        if hit:
            ex += 1e-9 * math.cos(bearing)
            ey += 1e-9 * math.sin(bearing)
        end = grid.world_to_cell(ex, ey)
        chain = bresenham_cells(r0[0], r0[1], end[0], end[1])
        for j, c in enumerate(chain):
            if not grid.in_bounds(*c):
                break
            if j == len(chain) - 1 and hit:
                occupied.add(c)
            else:
                opened.add(c)
    return opened, occupied


def test_full_scan_matches_rasterization_oracle():
    fp = square_fp()
    g = OccupancyGrid.for_floorplan(fp, 0.5)
    robot = Pose2D(3.25, 2.25, 0.3)
    scan = simulate_lidar(fp, robot, n_beams=360, max_range=8.0)
    integrate_scan(g, robot, scan)
    opened, occupied = oracle_rasterize(fp, g, robot, scan)
    states = g.state_array()
    for c in occupied:
        assert states[c[1], c[0]] == int(CellState.OCCUPIED), c
    for c in opened - occupied:
        assert states[c[1], c[0]] == int(CellState.OPEN), c
    observed = {tuple(reversed(t)) for t in map(tuple, np.argwhere(g.observed))}
    assert observed == opened | occupied


def test_exhaustive_scanning_matches_ground_truth():
    """Scanning from every free cell: wall-adjacent cells Occupied, interior Open."""
    fp = square_fp()
    g = OccupancyGrid.for_floorplan(fp, 0.5)
    gt = rasterize_ground_truth(fp, 0.5)
    gt_states = gt.state_array()
    free_cells = [(ix, iy) for iy in range(g.height) for ix in range(g.width)
                  if gt_states[iy, ix] == int(CellState.OPEN)]
    for (ix, iy) in free_cells:
        x, y = g.cell_center(ix, iy)
        robot = Pose2D(x, y, 0.0)
        integrate_scan(g, robot, simulate_lidar(fp, robot, n_beams=180))
    states = g.state_array()
    wall_cells = ground_truth_wall_cells(fp, g)
    for c in wall_cells:
        assert states[c[1], c[0]] == int(CellState.OCCUPIED), c
    for c in free_cells:
        assert states[c[1], c[0]] == int(CellState.OPEN), c


def test_grid_dump_round_trip():
    fp = square_fp()
    g = rasterize_ground_truth(fp, 0.5)
    text = g.dumps()
    g2 = OccupancyGrid.loads(text)
    assert np.array_equal(g.state_array(), g2.state_array())
    assert g2.dumps() == text
    assert g2.resolution == g.resolution
    assert (g2.origin.x, g2.origin.y) == (g.origin.x, g.origin.y)


def test_grid_dump_golden():
    g = OccupancyGrid(0.5, Pose2D(0.0, 0.0), 4, 3)
    g.observed[0, 1] = True
    g.log_odds[0, 1] = 4.0
    g.observed[1, 2] = True
    g.log_odds[1, 2] = -4.0
    assert g.dumps() == ("GRID 4 3 0.5 0.0 0.0\n"
                         "?#??\n"
                         "??.?\n"
                         "????\n")
