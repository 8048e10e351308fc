"""Experiment harness: run WD/IFE campaigns from a config file, write traces
and reports; replay recomputes a report from a trace alone."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import ife, metrics, wallscan
from .config import ConfigError, SimConfig, load_config
from .trace import CampaignTrace, TraceError
from .world import Floorplan, FloorplanError, load_floorplan

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERNAL = 3


def resolve_floorplan(name: str, config_dir: Path | None = None) -> Floorplan:
    """A path (absolute, or relative to the config file) or a bundled fixture name."""
    cand = Path(name)
    if cand.is_file():
        return load_floorplan(cand)
    if config_dir is not None and (config_dir / name).is_file():
        return load_floorplan(config_dir / name)
    pkg_fixture = resources.files("placardsim") / "fixtures" / f"{name}.json"
    if pkg_fixture.is_file():
        return load_floorplan(str(pkg_fixture))
    raise FloorplanError(f"floorplan fixture not found: {name}")


def run_campaign(strategy: str, fp: Floorplan, cfg: SimConfig, seed: int) -> CampaignTrace:
    if strategy == "wd":
        return wallscan.run_wd(fp, cfg, seed)
    if strategy == "ife":
        return ife.run_ife(fp, cfg, seed)
    raise ValueError(f"unknown strategy {strategy!r}")


def report_json(report: metrics.CampaignReport) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        fp = resolve_floorplan(cfg.floorplan, Path(args.config).resolve().parent)
    except FloorplanError as e:
        print(f"floorplan error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    strategies = ["wd", "ife"] if args.strategy == "both" else [args.strategy]

    aggregates = []
    per_run_rows = []
    for strategy in strategies:
        trials = cfg.wd_trials if strategy == "wd" else cfg.ife_trials
        if args.seeds is not None:
            trials = args.seeds
        traces = []
        for i in range(trials):
            seed = cfg.base_seed + i
            trace = run_campaign(strategy, fp, cfg, seed)
            trace.validate()
            trace_path = out / f"trace_{strategy}_{seed}.jsonl"
            trace.save(trace_path)
            loaded = CampaignTrace.load(trace_path)   # report from the file, as replay does
            rep = metrics.discovery_stats([loaded], fp, cfg.metrics.match_radius,
                                          cfg.metrics.coverage_range,
                                          cfg.metrics.coverage_step)
            (out / f"report_{strategy}_{seed}.json").write_text(report_json(rep))
            per_run_rows.append((rep, str(seed)))
            traces.append(loaded)
            if args.debug_frames:
                _dump_debug(trace, out, strategy, seed)
        if traces:
            agg = metrics.discovery_stats(traces, fp, cfg.metrics.match_radius,
                                          cfg.metrics.coverage_range,
                                          cfg.metrics.coverage_step)
            aggregates.append(agg)
            print(f"{strategy}: {trials} runs, mean runtime "
                  f"{agg.runtime:.1f} s, TPR {agg.tpr:.2f}")
        else:
            print(f"{strategy}: 0 runs")

    (out / "report.csv").write_text(metrics.report_csv(per_run_rows, aggregates))
    (out / "summary.txt").write_text(metrics.report_summary(aggregates))
    return EXIT_OK


def _dump_debug(trace: CampaignTrace, out: Path, strategy: str, seed: int) -> None:
    if trace.final_grid is not None:
        (out / f"grid_{strategy}_{seed}.txt").write_text(trace.final_grid.dumps())


def cmd_replay(args) -> int:
    try:
        trace = CampaignTrace.load(args.trace)
    except TraceError as e:
        print(f"trace error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    fp = Floorplan.from_dict(trace.floorplan)
    mcfg = trace.config.get("metrics", {})
    rep = metrics.discovery_stats([trace], fp,
                                  mcfg.get("match_radius", 1.0),
                                  mcfg.get("coverage_range", 3.0),
                                  mcfg.get("coverage_step", 0.05))
    sys.stdout.write(report_json(rep))
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="placardsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run discovery campaigns")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--strategy", choices=["wd", "ife", "both"], default="both")
    p_run.add_argument("--seeds", type=int, default=None,
                       help="override trial count for every strategy")
    p_run.add_argument("--debug-frames", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_replay = sub.add_parser("replay", help="recompute a report from a trace")
    p_replay.add_argument("--trace", required=True)
    p_replay.set_defaults(func=cmd_replay)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FloorplanError, TraceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # invariant violation
        print(f"internal error ({type(e).__name__}): {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
