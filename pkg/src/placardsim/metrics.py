"""Campaign evaluation: wall coverage, discovery statistics, runtimes."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ray_segments
from .gridmap import CellState, OccupancyGrid, ground_truth_wall_cells
from .trace import CampaignTrace
from .world import Floorplan


@dataclass
class CampaignReport:
    strategy: str
    n_runs: int
    passive_coverage: float          # percent
    active_coverage: float           # percent
    passive_coverage_interior: float
    active_coverage_interior: float
    tpr: float                       # per-run average
    tpr_pooled: float                # pooled across runs
    e_fp: float                      # mean unmatched estimates per run
    p_err_given_tp: float
    e_dx_given_tp: float             # meters
    runtime: float                   # mean simulated seconds
    per_placard: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "n_runs": self.n_runs,
            "passive_coverage": self.passive_coverage,
            "active_coverage": self.active_coverage,
            "passive_coverage_interior": self.passive_coverage_interior,
            "active_coverage_interior": self.active_coverage_interior,
            "tpr": self.tpr,
            "tpr_pooled": self.tpr_pooled,
            "e_fp": self.e_fp,
            "p_err_given_tp": self.p_err_given_tp,
            "e_dx_given_tp": self.e_dx_given_tp,
            "runtime": self.runtime,
            "per_placard": self.per_placard,
        }


# ---------------------------------------------------------------------------
# coverage

def passive_coverage(trace: CampaignTrace, fp: Floorplan,
                     wall_indices=None) -> float:
    """Percent of ground-truth wall cells classified Occupied in the final grid."""
    grid = trace.final_grid
    if grid is None:
        raise ValueError("trace has no final grid")
    sub = fp if wall_indices is None else Floorplan(
        fp.bounds, [fp.walls[i] for i in wall_indices], [], fp.robot_start)
    cells = ground_truth_wall_cells(sub, grid)
    if not cells:
        return 0.0
    states = grid.state_array()
    hit = sum(1 for (ix, iy) in cells if states[iy, ix] == int(CellState.OCCUPIED))
    return 100.0 * hit / len(cells)


def _scan_poses(trace: CampaignTrace):
    return [(e.data["x"], e.data["y"], e.data["heading"])
            for e in trace.of_kind("active_scan")]


def active_coverage(trace: CampaignTrace, fp: Floorplan, fov: float | None = None,
                    coverage_range: float = 3.0, step: float = 0.05,
                    camera_height: float = 1.4, wall_indices=None) -> float:
    """Percent of ground-truth wall length inside the union of active-scan
    camera frusta (range-limited, occlusion-checked by wall ray tests)."""
    if fov is None:
        cam = trace.config.get("camera", {})
        fov = 2.0 * math.atan2(cam.get("width", 640) / 2.0, cam.get("fx", 525.0))
    scans = _scan_poses(trace)
    indices = range(len(fp.walls)) if wall_indices is None else wall_indices
    segs = fp.walls_array
    total = 0.0
    covered = 0.0
    half = fov / 2.0
    for wi in indices:
        x1, y1, x2, y2 = fp.walls[wi]
        L = math.hypot(x2 - x1, y2 - y1)
        total += L
        n = max(2, int(math.ceil(L / step)) + 1)
        ts = np.linspace(0.0, 1.0, n)
        px = x1 + ts * (x2 - x1)
        py = y1 + ts * (y2 - y1)
        seen = np.zeros(n, dtype=bool)
        for (sx, sy, sh) in scans:
            dx, dy = px - sx, py - sy
            dist = np.hypot(dx, dy)
            ang = np.abs(_wrap(np.arctan2(dy, dx) - sh))
            cand = np.nonzero(~seen & (dist <= coverage_range) & (ang <= half)
                              & (dist > 1e-9))[0]
            for i in cand:
                if not _wall_point_occluded(segs, wi, (sx, sy), (px[i], py[i])):
                    seen[i] = True
        covered += L * float(seen.mean())
    if total <= 0:
        return 0.0
    return 100.0 * covered / total


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _wall_point_occluded(segs, wall_index, eye, target) -> bool:
    d = (target[0] - eye[0], target[1] - eye[1])
    t, _ = ray_segments(eye, d, segs)
    t[wall_index] = np.inf      # the sampled wall cannot occlude its own point
    return bool(np.any(t < 1.0 - 1e-6))


# ---------------------------------------------------------------------------
# discovery statistics

def match_estimates(estimates, placard_xy, radius: float = 1.0):
    """Greedy nearest matching (distance-sorted); returns (matches, unmatched)
    where matches is a list of (estimate_index, placard_index, distance)."""
    pairs = []
    for ei, (ex, ey) in enumerate(estimates):
        for pi, (px, py) in enumerate(placard_xy):
            d = math.hypot(ex - px, ey - py)
            if d <= radius:
                pairs.append((d, ei, pi))
    pairs.sort()
    used_e, used_p = set(), set()
    matches = []
    for d, ei, pi in pairs:
        if ei in used_e or pi in used_p:
            continue
        used_e.add(ei)
        used_p.add(pi)
        matches.append((ei, pi, d))
    unmatched = [ei for ei in range(len(estimates)) if ei not in used_e]
    return matches, unmatched


def discovery_stats(traces, fp: Floorplan, match_radius: float = 1.0,
                    coverage_range: float = 3.0, coverage_step: float = 0.05) -> CampaignReport:
    if not traces:
        raise ValueError("need at least one trace")
    strategy = traces[0].strategy
    placard_xy = [tuple(fp.placard_center_xy(p)) for p in fp.placards]
    interior = fp.interior_wall_indices()

    per_run_tpr = []
    fp_counts = []
    pooled_found = set()
    tp_scans = 0
    tp_read_errors = 0
    dx_values = []
    runtimes = []
    pc, ac, pci, aci = [], [], [], []
    per_placard = [{"text": p.text, "detections": 0, "registered": 0,
                    "read_errors": 0, "dx_sum": 0.0} for p in fp.placards]

    for trace in traces:
        ests = trace.of_kind("estimate")
        exy = [(e.data["x"], e.data["y"]) for e in ests]
        matches, unmatched = match_estimates(exy, placard_xy, match_radius)
        found = {pi for _, pi, _ in matches}
        per_run_tpr.append(len(found) / len(placard_xy) if placard_xy else 0.0)
        pooled_found |= found
        fp_counts.append(len(unmatched))
        for ei, pi, d in matches:
            tp_scans += 1
            dx_values.append(d)
            rec = per_placard[pi]
            rec["registered"] += 1
            rec["dx_sum"] += d
            if ests[ei].data["read_error"]:
                tp_read_errors += 1
                rec["read_errors"] += 1
        for e in trace.of_kind("detection"):
            if e.data.get("placard_id") is not None:
                per_placard[e.data["placard_id"]]["detections"] += 1
        runtimes.append(trace.elapsed)
        pc.append(passive_coverage(trace, fp))
        ac.append(active_coverage(trace, fp, coverage_range=coverage_range,
                                  step=coverage_step))
        pci.append(passive_coverage(trace, fp, wall_indices=interior))
        aci.append(active_coverage(trace, fp, coverage_range=coverage_range,
                                   step=coverage_step, wall_indices=interior))

    for rec in per_placard:
        n = rec.pop("dx_sum"), rec["registered"]
        rec["mean_dx"] = (n[0] / n[1]) if n[1] else None

    return CampaignReport(
        strategy=strategy,
        n_runs=len(traces),
        passive_coverage=float(np.mean(pc)),
        active_coverage=float(np.mean(ac)),
        passive_coverage_interior=float(np.mean(pci)),
        active_coverage_interior=float(np.mean(aci)),
        tpr=float(np.mean(per_run_tpr)),
        tpr_pooled=(len(pooled_found) / len(placard_xy)) if placard_xy else 0.0,
        e_fp=float(np.mean(fp_counts)),
        p_err_given_tp=(tp_read_errors / tp_scans) if tp_scans else 0.0,
        e_dx_given_tp=float(np.mean(dx_values)) if dx_values else 0.0,
        runtime=float(np.mean(runtimes)),
        per_placard=per_placard,
    )


# ---------------------------------------------------------------------------
# report emission

_CSV_FIELDS = ["strategy", "run", "passive_coverage", "active_coverage",
               "passive_coverage_interior", "active_coverage_interior",
               "tpr", "tpr_pooled", "e_fp", "p_err_given_tp", "e_dx_given_tp",
               "runtime"]


def report_csv(reports_per_run, aggregates) -> str:
    """One row per run plus one aggregate row per strategy."""
    out = io.StringIO()
    out.write(",".join(_CSV_FIELDS) + "\n")

    def row(rep: CampaignReport, run_label: str):
        vals = [rep.strategy, run_label]
        for f in _CSV_FIELDS[2:]:
            vals.append(repr(getattr(rep, f)))
        out.write(",".join(vals) + "\n")

    for rep, label in reports_per_run:
        row(rep, label)
    for rep in aggregates:
        row(rep, "aggregate")
    return out.getvalue()


def report_summary(aggregates) -> str:
    """Two-table text summary: coverage, then discovery statistics."""
    lines = []
    lines.append("Wall coverage (%)")
    lines.append(f"{'strategy':<10}{'passive':>10}{'active':>10}"
                 f"{'pass.int':>10}{'act.int':>10}")
    for r in aggregates:
        lines.append(f"{r.strategy:<10}{r.passive_coverage:>10.2f}"
                     f"{r.active_coverage:>10.2f}"
                     f"{r.passive_coverage_interior:>10.2f}"
                     f"{r.active_coverage_interior:>10.2f}")
    lines.append("")
    lines.append("Placard discovery")
    lines.append(f"{'strategy':<10}{'TPR':>8}{'E[FP]':>8}{'P(err|TP)':>12}"
                 f"{'E[dx|TP] m':>12}{'runtime s':>12}{'runs':>6}")
    for r in aggregates:
        lines.append(f"{r.strategy:<10}{r.tpr:>8.2f}{r.e_fp:>8.2f}"
                     f"{r.p_err_given_tp:>12.2f}{r.e_dx_given_tp:>12.3f}"
                     f"{r.runtime:>12.1f}{r.n_runs:>6}")
    return "\n".join(lines) + "\n"
