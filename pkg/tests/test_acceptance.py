"""Acceptance criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line; the lines are also repeated in
the terminal summary.  Run just this file with ``pytest tests/test_acceptance.py -s``.
"""
import csv
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest

from depguard.analysis import (Side, ThresholdEntry, ThresholdModel, learn_thresholds,
                               predict_faults)
from depguard.core import NORMAL, OBSERVABLES, ApplicationLabel, Dimension, Observable
from depguard.harness import compare, run
from depguard.loop import LoopMode, run_loop
from depguard.monitor import History, ObservationFrame
from depguard.scenario import benchmark
from depguard.simulator import Environment, compute_rssi

import conftest
from oracles import (audit_ledger, availability_from_trace, first_tick_reaching,
                     log_distance_rssi, stump_oracle)
from rigged import run_episodes, winner_leads

B = Observable.BATTERY_LEVEL


def verdict(number, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rows_of(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def battery_model(tau):
    entries = {o: ThresholdEntry() for o in OBSERVABLES}
    entries[B] = ThresholdEntry(tau, Side.BELOW, usable=True, source="test")
    return ThresholdModel(entries)


def history_of(values, start):
    h = History()
    for i, v in enumerate(values):
        h.push([ObservationFrame(start + i, 0, (-70.0, 2.0, 5.0, float(v)))])
    return h


# 1 ------------------------------------------------------------------------------

def test_criterion_1_determinism(tmp_path):
    sc = benchmark("battery_drain")
    elapsed = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        run(sc, 17, LoopMode.PROACTIVE, 1000, tmp_path / name)
        elapsed.append(time.perf_counter() - t0)
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
               for f in ("trace.csv", "summary.json", "energy.csv"))
    slowest = max(elapsed)
    verdict(1, same and slowest < 5.0,
            f"byte-identical={same}, slowest 1000-tick 10-node run {slowest:.2f}s (< 5s)")


# 2 ------------------------------------------------------------------------------

def test_criterion_2_radio_oracle():
    env = Environment(path_loss_exponent=2.7, reference_loss=41.5, shadowing_sigma=0.0)
    powers = np.linspace(-10, 5, 10)
    distances = np.geomspace(0.5, 300, 10)
    worst = worst_double = 0.0
    step = -10 * env.path_loss_exponent * math.log10(2)
    for p in powers:
        for d in distances:
            got = compute_rssi(float(p), float(d), env)
            worst = max(worst, abs(got - log_distance_rssi(p, d, 2.7, 41.5)))
            worst_double = max(worst_double,
                               abs(compute_rssi(float(p), float(2 * d), env) - got - step))
    verdict(2, worst <= 1e-9 and worst_double <= 1e-9,
            f"100-point grid max error {worst:.1e} dB, doubling error {worst_double:.1e} dB")


# 3 ------------------------------------------------------------------------------

def test_criterion_3_energy_conservation(tmp_path):
    problems, rises, cells = [], 0, 0
    for name, mode in (("battery_drain", LoopMode.PROACTIVE), ("battery_drain", LoopMode.NO_ADAPTATION),
                       ("node_crash", LoopMode.REACTIVE), ("interference_window", LoopMode.PROACTIVE)):
        sc = benchmark(name)
        out = tmp_path / f"{name}-{mode.value}"
        run(sc, 2, mode, 1500, out)
        e = sc.config.energy
        ledger = rows_of(out / "energy.csv")
        problems += audit_ledger(ledger, e.e_tx, e.e_rx, e.e_idle, e.e_sleep)
        restored = {(r["tick"], r["node_id"]) for r in ledger if r["restored"] == "1"}
        after = {(r["tick"], r["node_id"]): r["battery_after"] for r in ledger}
        last = {}
        for r in rows_of(out / "trace.csv"):
            key = (r["tick"], r["node_id"])
            battery = float(r["battery_j"])
            if r["reachable"] == "1" and repr(battery) != after[key]:  # stale rows carry values
                problems.append(f"{name} {key}: trace battery differs from ledger")
            if r["node_id"] in last and battery > last[r["node_id"]] and key not in restored:
                rises += 1
            last[r["node_id"]] = battery
        cells += 1
    verdict(3, not problems and rises == 0,
            f"{cells} runs audited, {len(problems)} ledger mismatches, "
            f"{rises} battery rises outside interventions")


# 4 ------------------------------------------------------------------------------

def test_criterion_4_threshold_oracle():
    rng = random.Random(4)
    failures = 0
    for _ in range(100):
        n = rng.randint(2, 50)
        n_fail = rng.randint(1, n - 1)
        cut = rng.uniform(-100, 100)
        gap = rng.uniform(0.01, 20)
        low = [cut - rng.uniform(0, 50) for _ in range(n_fail)]
        high = [cut + gap + rng.uniform(0, 50) for _ in range(n - n_fail)]
        failure_low = rng.random() < 0.5
        labeled = []
        for i, v in enumerate(low + high):
            failed = (i < n_fail) == failure_low
            frame = ObservationFrame(i, 0, (-70.0, 2.0, 5.0, v))
            labeled.append((frame, ApplicationLabel.failure(Dimension.REACTION_DELAY) if failed
                            else NORMAL))
        entry = learn_thresholds(labeled, min_samples=1)[B]
        values = [f.values[B.index] for f, _ in labeled]
        labels = [not lab.normal for _, lab in labeled]
        acc, winners = stump_oracle(values, labels)
        ok = (entry.confidence == 1.0 == acc and max(low) < entry.tau < min(high)
              and (entry.tau, entry.failure_side.value) in winners)
        failures += not ok
    verdict(4, failures == 0, f"{100 - failures}/100 separable sets learned exactly")


# 5 ------------------------------------------------------------------------------

def test_criterion_5_prediction_exactness():
    rng = random.Random(5)
    exact = 0
    for _ in range(100):
        p, q = rng.randint(1, 20), rng.randint(1, 6)
        tau = rng.randint(0, 40)
        start = rng.randint(0, 50)
        n = rng.randint(2, 30)
        b = tau + math.ceil(p * (n - 1) / q) + rng.randint(1, 300)  # still above tau at issue
        values = [b - p * i / q for i in range(n)]
        issued = start + n - 1
        truth = first_tick_reaching(Fraction(b) + Fraction(p, q) * start, Fraction(-p, q), tau, issued)
        preds = predict_faults(history_of(values, start), battery_model(float(tau)),
                               horizon=truth - issued + 1)
        exact += len(preds) == 1 and preds[0].t_min == preds[0].t_max == truth
    # noisy decay: 1 J per tick with N(0, 2) noise, issued 20 ticks before the mean
    # line reaches tau; the truth is the first tick the noisy series itself reaches tau
    covered = 0
    for seed in range(100):
        noise = np.random.default_rng(seed).normal(0.0, 2.0, 400)
        series = 20.0 + 200.0 - np.arange(400) + noise
        issued = 180
        window = series[issued - 29: issued + 1]
        preds = predict_faults(history_of(window, issued - 29), battery_model(20.0), horizon=100)
        truth = next(t for t in range(issued + 1, 400) if series[t] <= 20.0)
        covered += bool(preds) and preds[0].t_min <= truth <= preds[0].t_max
    verdict(5, exact == 100 and covered >= 90,
            f"noiseless exact {exact}/100, noisy coverage {covered}/100 (need >= 90)")


# 6 ------------------------------------------------------------------------------

def test_criterion_6_interval_contract():
    checked = bad = ticks = 0

    def watch(loop, report):
        nonlocal checked, bad
        h = loop.config.analysis.horizon
        for p in report.predictions:
            checked += 1
            bad += not (p.issued_at <= p.t_min <= p.t_max <= p.issued_at + h)

    for seed, name in enumerate(("battery_drain", "interference_window", "node_crash",
                                 "battery_drain")):
        loop = run_loop(benchmark(name), 100 + seed, LoopMode.PROACTIVE, 2500, on_tick=watch)
        ticks += loop.sim.tick
    verdict(6, bad == 0 and checked > 0 and ticks >= 10_000,
            f"{checked} predictions over {ticks} ticks, {bad} outside [issued, issued + H]")


# 7 ------------------------------------------------------------------------------

def test_criterion_7_policy_learning():
    wins = sum(winner_leads(run_episodes(seed, episodes=200, exploration=0.1))
               for seed in range(100))
    verdict(7, wins >= 95, f"winning action strictly best in {wins}/100 repetitions (need >= 95)")


# 8 and 9 share one 30-seed comparison --------------------------------------------

@pytest.fixture(scope="module")
def drain_comparison(tmp_path_factory):
    out = tmp_path_factory.mktemp("compare")
    t0 = time.perf_counter()
    summary = compare(benchmark("battery_drain"), list(range(30)), 2000, out)
    return summary, time.perf_counter() - t0, out


def test_criterion_8_framework_value(drain_comparison):
    summary, wall, _ = drain_comparison
    rows = summary["modes"]
    mean = {m: rows[m]["availability"]["mean"] for m in rows}
    iv = {m: rows[m]["manual_interventions"]["mean"] for m in rows}
    tests = summary["paired_tests"]
    ok = (not summary["errors"] and summary["ordering_holds"]
          and mean["proactive"] > mean["reactive"] > mean["no-adapt"]
          and iv["proactive"] <= iv["no-adapt"] and wall < 300)
    verdict(8, ok,
            f"availability P {mean['proactive']:.4f} > R {mean['reactive']:.4f} > "
            f"N {mean['no-adapt']:.4f} (p = {tests['proactive_gt_reactive']['p_value']:.2g}, "
            f"{tests['reactive_gt_no_adapt']['p_value']:.2g}); interventions P "
            f"{iv['proactive']:.2f} <= N {iv['no-adapt']:.2f}; wall {wall:.0f}s (< 300s)")


def test_criterion_9_evaluation_oracle(drain_comparison):
    import json

    _, _, out = drain_comparison
    cells = mismatches = 0
    for summary_path in sorted(out.glob("*/seed_*/summary.json")):
        summary = json.loads(summary_path.read_text(encoding="utf-8"))
        avail, mtbf = availability_from_trace(rows_of(summary_path.parent / summary["trace"]))
        streamed = summary["metrics"]
        mtbf_streamed = math.inf if streamed["mtbf"] == "inf" else streamed["mtbf"]
        mismatches += not (avail == streamed["availability"] and mtbf == mtbf_streamed)
        cells += 1
    verdict(9, cells == 90 and mismatches == 0,
            f"{cells} traces recomputed, {mismatches} availability/MTBF mismatches")


# 10 -----------------------------------------------------------------------------

def test_criterion_10_fault_free_sanity():
    sc = benchmark("no_fault")
    seen = []
    for mode in LoopMode:
        for seed in (0, 1):
            m = run(sc, seed, mode, 2000).metrics
            seen.append((m["availability"], m["manual_interventions"], m["outcomes"]["occurred"]))
    ok = all(a == 1.0 and i == 0 and o == 0 for a, i, o in seen)
    worst = min(a for a, _, _ in seen)
    verdict(10, ok, f"{len(seen)} runs: min availability {worst}, "
                    f"interventions {sum(i for _, i, _ in seen)}, "
                    f"occurred {sum(o for _, _, o in seen)}")
