"""Campaign configuration: one structured file covering every tunable default."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field


class ConfigError(Exception):
    pass


@dataclass
class GridConfig:
    resolution: float = 0.5
    occupied_threshold: float = 0.5


@dataclass
class LidarConfig:
    n_beams: int = 180
    max_range: float = 8.0
    scan_every: int = 1        # integrate a scan every N navigation steps


@dataclass
class NavConfig:
    speed: float = 0.5
    turn_rate: float = 1.0
    inflation: float = 0.3
    max_replans: int = 3
    goal_metric: str = "path"       # or "euclidean"


@dataclass
class CameraConfig:
    width: int = 640
    height: int = 480
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 320.0
    cy: float = 240.0
    height_m: float = 1.4


@dataclass
class DetectorConfig:
    p_max: float = 0.95
    r_min: float = 0.5
    r_max: float = 6.0
    cos_power: float = 1.0
    fp_rate: float = 0.02
    bbox_jitter: float = 2.0
    frame_hz: float = 2.0


@dataclass
class WallscanConfig:
    spacing: float = 1.0
    distance: float = 1.0
    canny_sigma: float = 1.0
    canny_low: float = 0.15
    canny_high: float = 0.4
    hough_votes: int = 15           # rationale: min wall ~2 m at 0.5 m cells
    hough_min_length: float = 4.0   # cells
    hough_max_gap: float = 2.0      # cells
    theta_step_deg: float = 1.0
    rho_step: float = 1.0           # cells
    dedup_radius: float = 0.25
    dedup_angle_deg: float = 15.0
    project_radius: float = 1.5     # max distance when projecting blocked waypoints


@dataclass
class IfeConfig:
    range_min: float = 0.5
    range_max: float = 3.0
    preferred_distance: float = 1.0
    sweep_step: float = 0.25
    merge_radius: float = 0.5
    min_points: int = 20
    max_scan_attempts: int = 2


@dataclass
class LocalizationConfig:
    min_region_area: int = 100      # px
    bbox_margin: int = 5            # px
    canny_sigma: float = 1.0
    canny_low: float = 0.15
    canny_high: float = 0.4
    hough_votes: int = 10
    theta_step_deg: float = 1.0
    rho_step: float = 1.0           # px
    label_noise: float = 0.02
    scan_duration: float = 8.0      # s
    char_midpoint: float = 400.0    # px per meter of rectified width
    char_scale: float = 60.0
    residual_scale: float = 20.0    # px


@dataclass
class MetricsConfig:
    match_radius: float = 1.0
    coverage_range: float = 3.0
    coverage_step: float = 0.05     # m between wall samples


@dataclass
class SimConfig:
    floorplan: str = "office_corridor"
    base_seed: int = 1000
    wd_trials: int = 5
    ife_trials: int = 10
    grid: GridConfig = field(default_factory=GridConfig)
    lidar: LidarConfig = field(default_factory=LidarConfig)
    nav: NavConfig = field(default_factory=NavConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    wallscan: WallscanConfig = field(default_factory=WallscanConfig)
    ife: IfeConfig = field(default_factory=IfeConfig)
    localization: LocalizationConfig = field(default_factory=LocalizationConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "SimConfig":
        return _build(SimConfig, d, "config")


def _build(cls, d: dict, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, f in fields.items():
        if name not in d:
            continue
        v = d[name]
        if dataclasses.is_dataclass(f.type) or (isinstance(f.type, str)
                                                and f.type.endswith("Config")):
            sub = _CONFIG_TYPES[f.type if isinstance(f.type, str) else f.type.__name__]
            kwargs[name] = _build(sub, v, f"{where}.{name}")
        else:
            kwargs[name] = v
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ConfigError(f"{where}: {e}") from e


_CONFIG_TYPES = {c.__name__: c for c in
                 (GridConfig, LidarConfig, NavConfig, CameraConfig, DetectorConfig,
                  WallscanConfig, IfeConfig, LocalizationConfig, MetricsConfig)}


def load_config(path) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    return SimConfig.from_dict(raw)


def save_config(cfg: SimConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(cfg.as_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
