"""Campaign trace: timestamped event log, the substrate for all metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .gridmap import OccupancyGrid


class TraceError(Exception):
    pass


@dataclass
class TraceEvent:
    time: float
    kind: str
    data: dict


@dataclass
class CampaignTrace:
    strategy: str
    seed: int
    config: dict
    floorplan: dict
    events: list = field(default_factory=list)
    final_grid: OccupancyGrid | None = None
    elapsed: float = 0.0

    def log(self, kind: str, time: float, **data) -> TraceEvent:
        ev = TraceEvent(float(time), kind, data)
        self.events.append(ev)
        return ev

    def of_kind(self, kind: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind == kind]

    def validate(self) -> None:
        """Timestamps monotone; every active_scan nested in an interrupt pair
        (ife) or following a waypoint arrival (wd)."""
        last_t = -1.0
        depth = 0
        at_waypoint = False
        for e in self.events:
            if e.time < last_t - 1e-9:
                raise TraceError(f"timestamps not monotone at {e.kind} t={e.time}")
            last_t = max(last_t, e.time)
            if e.kind == "interrupt_begin":
                depth += 1
            elif e.kind == "interrupt_end":
                depth -= 1
                if depth < 0:
                    raise TraceError("interrupt_end without interrupt_begin")
            elif e.kind == "wd_visit":
                at_waypoint = True
            elif e.kind == "active_scan":
                if self.strategy == "ife" and depth == 0:
                    raise TraceError("active_scan outside an interruption")
                if self.strategy == "wd" and not at_waypoint:
                    raise TraceError("active_scan before any waypoint arrival")
        if depth != 0:
            raise TraceError("unbalanced interrupt events")

    # -- serialization (JSON lines, deterministic bytes) ---------------------

    @staticmethod
    def _dumps(obj) -> str:
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        lines = [self._dumps({"kind": "run_header", "strategy": self.strategy,
                              "seed": self.seed, "config": self.config,
                              "floorplan": self.floorplan})]
        for e in self.events:
            rec = {"kind": e.kind, "t": e.time}
            rec.update(e.data)
            lines.append(self._dumps(rec))
        if self.final_grid is not None:
            lines.append(self._dumps({"kind": "grid_final",
                                      "dump": self.final_grid.dumps()}))
        lines.append(self._dumps({"kind": "run_end", "elapsed": self.elapsed}))
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    @staticmethod
    def load(path) -> "CampaignTrace":
        try:
            with open(path, "r", encoding="utf-8") as f:
                lines = [ln for ln in f.read().split("\n") if ln.strip()]
            records = [json.loads(ln) for ln in lines]
        except (OSError, json.JSONDecodeError) as e:
            raise TraceError(f"corrupt trace {path}: {e}") from e
        if not records or records[0].get("kind") != "run_header":
            raise TraceError(f"corrupt trace {path}: missing header")
        if records[-1].get("kind") != "run_end":
            raise TraceError(f"corrupt trace {path}: missing run_end (truncated?)")
        head = records[0]
        trace = CampaignTrace(head["strategy"], head["seed"], head["config"],
                              head["floorplan"])
        for rec in records[1:-1]:
            kind = rec.pop("kind")
            if kind == "grid_final":
                trace.final_grid = OccupancyGrid.loads(rec["dump"])
                continue
            t = rec.pop("t")
            trace.events.append(TraceEvent(t, kind, rec))
        trace.elapsed = float(records[-1]["elapsed"])
        return trace
