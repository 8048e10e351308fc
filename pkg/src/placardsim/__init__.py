"""Desk-scale simulator for placard discovery during frontier exploration."""

__version__ = "0.1.0"

from .config import SimConfig, load_config, save_config
from .geometry import Pose2D, Pose3D
from .gridmap import CellState, OccupancyGrid, classify, integrate_scan, to_binary
from .world import Floorplan, Placard, load_floorplan, placard_visible_from, save_floorplan

__all__ = [
    "CellState",
    "Floorplan",
    "OccupancyGrid",
    "Placard",
    "Pose2D",
    "Pose3D",
    "SimConfig",
    "classify",
    "integrate_scan",
    "load_config",
    "load_floorplan",
    "placard_visible_from",
    "save_config",
    "save_floorplan",
    "to_binary",
]
