"""Run execution, trace/summary persistence and mode comparison."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import statistics
from dataclasses import dataclass
from pathlib import Path

from scipy import stats

from depguard.loop import LoopMode, LoopState, TickReport, run_loop
from depguard.scenario import Scenario, scenario_to_dict
from depguard.simulator import EnergyItem, activity_cost

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "tick", "node_id", "rssi_mean_dbm", "neighbor_count", "messages_received", "battery_j",
    "reachable", "app_label", "violated_dimension", "prediction_fault_type",
    "prediction_t_min", "prediction_t_max", "action_id", "intervention_flag",
)
ENERGY_COLUMNS = (
    "tick", "node_id", "broadcasts", "receptions", "awake_s", "sleep_s", "drain",
    "battery_before", "battery_after", "restored",
)
ALPHA = 0.05


def _num(x) -> str:
    """Counts print as integers, everything else as round-trippable floats."""
    x = float(x)
    return str(int(x)) if x.is_integer() else repr(x)


class TraceWriter:
    """Streams one trace row per node per tick, plus the per-tick energy ledger."""

    def __init__(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        self.trace_path = out_dir / "trace.csv"
        self.energy_path = out_dir / "energy.csv"
        self._trace_fh = open(self.trace_path, "w", encoding="utf-8", newline="")
        self._energy_fh = open(self.energy_path, "w", encoding="utf-8", newline="")
        self._trace = csv.writer(self._trace_fh, lineterminator="\n")
        self._energy = csv.writer(self._energy_fh, lineterminator="\n")
        self._trace.writerow(TRACE_COLUMNS)
        self._energy.writerow(ENERGY_COLUMNS)

    def __call__(self, loop: LoopState, report: TickReport) -> None:
        preds: dict[int, list] = {}
        for p in report.predictions:
            preds.setdefault(p.node, []).append(p)
        acts: dict[int, list] = {}
        for rec in report.actions:
            node = rec.target if rec.target is not None else rec.action.target
            acts.setdefault(node, []).append(rec.action.id)
        label = report.label
        state = label.state.value
        violated = label.violated.value if label.violated else ""
        flagged = set(report.interventions)
        tick = report.tick
        rows = []
        for f in report.frames:
            rssi, neighbors, received, battery = f.values
            ps = preds.get(f.node)
            if ps:
                kinds = ";".join(p.fault_type.value for p in ps)
                t_min = ";".join(str(p.t_min) for p in ps)
                t_max = ";".join(str(p.t_max) for p in ps)
            else:
                kinds = t_min = t_max = ""
            ids = acts.get(f.node)
            rows.append((tick, f.node, repr(rssi), _num(neighbors), _num(received), repr(battery),
                         1 if f.reachable else 0, state, violated, kinds, t_min, t_max,
                         ";".join(ids) if ids else "", 1 if f.node in flagged else 0))
        self._trace.writerows(rows)
        record = loop.sim.records[-1]
        self._energy.writerows(
            (record.tick, item.node, item.broadcasts, item.receptions, repr(item.awake_s),
             repr(item.sleep_s), repr(item.drain), repr(item.before), repr(item.after),
             1 if item.restored else 0)
            for item in record.energy)

    def close(self) -> None:
        self._trace_fh.close()
        self._energy_fh.close()


@dataclass
class RunReport:
    scenario: str
    seed: int
    mode: LoopMode
    metrics: dict
    policy: dict
    thresholds: dict
    config: dict
    ticks: int
    trace_path: str | None = None
    energy_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "mode": self.mode.value,
            "ticks": self.ticks,
            "metrics": self.metrics,
            "policy": self.policy,
            "thresholds": self.thresholds,
            "config": self.config,
            "trace": self.trace_path,
            "energy": self.energy_path,
        }


def _json_safe(obj):
    if isinstance(obj, float) and (math.isnan(obj) or math.isinf(obj)):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def run(scenario: Scenario, seed: int, mode: LoopMode, ticks: int, out_dir=None) -> RunReport:
    """Run one (scenario, seed, mode) cell for ``ticks`` ticks.

    With ``out_dir`` the trace, energy ledger and summary are written there;
    file references inside the summary are relative to ``out_dir``.
    """
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        writer = TraceWriter(out_dir)
    try:
        loop = run_loop(scenario, seed, mode, ticks, on_tick=writer)
    finally:
        if writer is not None:
            writer.close()
    report = RunReport(
        scenario=scenario.name,
        seed=seed,
        mode=mode,
        metrics=loop.metrics.to_dict(),
        policy=loop.policy.snapshot(),
        thresholds=loop.model.to_dict(),
        config={"scenario": scenario_to_dict(scenario), "resolved": loop.config.to_dict()},
        ticks=ticks,
        trace_path="trace.csv" if writer else None,
        energy_path="energy.csv" if writer else None,
    )
    if out_dir is not None:
        with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_json_safe(report.to_dict()), fh, indent=2, sort_keys=True)
            fh.write("\n")
    log.info("run %s seed=%d mode=%s availability=%s", scenario.name, seed, mode.value,
             report.metrics["availability"])
    return report


def _cell(args):
    scenario, seed, mode, ticks, out_dir = args
    try:
        return run(scenario, seed, mode, ticks, out_dir).metrics, None
    except Exception as exc:  # per-cell isolation
        log.error("cell seed=%s mode=%s failed: %s", seed, mode.value, exc)
        return None, f"{type(exc).__name__}: {exc}"


def _describe(values):
    vals = [v for v in values if v is not None and v != "inf"]
    inf = sum(1 for v in values if v == "inf")
    out = {"n": len(vals), "mean": statistics.fmean(vals) if vals else None,
           "stddev": statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)}
    if inf:
        out["infinite"] = inf
    return out


def paired_greater(a, b) -> dict:
    """One-sided paired t-test of mean(a) > mean(b)."""
    diffs = [x - y for x, y in zip(a, b)]
    mean = statistics.fmean(diffs)
    if all(d == diffs[0] for d in diffs):
        p = 0.0 if mean > 0 else 1.0
    else:
        p = float(stats.ttest_rel(a, b, alternative="greater").pvalue)
    return {"mean_difference": mean, "p_value": p, "significant": p < ALPHA}


MODES = (LoopMode.PROACTIVE, LoopMode.REACTIVE, LoopMode.NO_ADAPTATION)


def compare(scenario: Scenario, seeds, ticks: int, out_dir=None, workers: int = 1) -> dict:
    """Run every mode for every seed and summarise the mode ordering."""
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("compare needs at least 2 seeds")
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    cells = []
    for seed in seeds:
        for mode in MODES:
            cell_dir = None
            if out_dir is not None:
                cell_dir = Path(out_dir) / mode.value / f"seed_{seed}"
            cells.append((scenario, seed, mode, ticks, cell_dir))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = [_cell(c) for c in cells]

    per_mode = {m: {} for m in MODES}
    errors = []
    for (_, seed, mode, _, _), (metrics, err) in zip(cells, results):
        if err:
            errors.append({"seed": seed, "mode": mode.value, "error": err})
        else:
            per_mode[mode][seed] = metrics
    rows = {}
    for mode, by_seed in per_mode.items():
        ms = list(by_seed.values())
        rows[mode.value] = {
            "availability": _describe([m["availability"] for m in ms]),
            "mtbf": _describe([m["mtbf"] for m in ms]),
            "manual_interventions": _describe([m["manual_interventions"] for m in ms]),
            "prediction_precision": _describe([m["prediction_precision"] for m in ms]),
            "prediction_recall": _describe([m["prediction_recall"] for m in ms]),
        }
    common = [s for s in seeds if all(s in per_mode[m] for m in MODES)]
    avail = {m: [per_mode[m][s]["availability"] for s in common] for m in MODES}
    tests = {}
    if len(common) >= 2:
        tests["proactive_gt_reactive"] = paired_greater(avail[LoopMode.PROACTIVE],
                                                        avail[LoopMode.REACTIVE])
        tests["reactive_gt_no_adapt"] = paired_greater(avail[LoopMode.REACTIVE],
                                                       avail[LoopMode.NO_ADAPTATION])
    verdict = bool(tests) and all(t["significant"] for t in tests.values())
    summary = {
        "scenario": scenario.name,
        "seeds": seeds,
        "ticks": ticks,
        "modes": rows,
        "availability": {m.value: avail[m] for m in MODES},
        "paired_tests": tests,
        "alpha": ALPHA,
        "ordering_holds": verdict,
        "errors": errors,
    }
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(Path(out_dir) / "comparison.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_json_safe(summary), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return summary


def audit_energy(path, energy_cfg) -> list[str]:
    """Check an energy ledger: each decrement equals its itemized cost, batteries never rise."""
    problems = []
    last_after: dict[str, float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            item = EnergyItem(int(row["node_id"]), int(row["broadcasts"]), int(row["receptions"]),
                              float(row["awake_s"]), float(row["sleep_s"]), float(row["drain"]),
                              float(row["battery_before"]), float(row["battery_after"]),
                              row["restored"] == "1")
            expected = max(0.0, item.before - activity_cost(item, energy_cfg)) \
                if item.awake_s + item.sleep_s > 0 else item.before
            where = f"tick {row['tick']} node {row['node_id']}"
            if item.after != expected:
                problems.append(f"{where}: after {item.after!r} != expected {expected!r}")
            prev = last_after.get(row["node_id"])
            if prev is not None and not item.restored and item.before != prev:
                problems.append(f"{where}: battery jumped from {prev!r} to {item.before!r}")
            if item.after > item.before:
                problems.append(f"{where}: battery increased")
            last_after[row["node_id"]] = item.after
    return problems
