"""Regenerate the benchmark scenario documents shipped in ``depguard/scenarios``.

Usage::

    python scripts/make_scenarios.py            # rewrite the shipped files
    python scripts/make_scenarios.py --check    # exit 1 if they are out of date

Layout: the presence sensor sits at the origin, a cluster of four relays to
its west, a single bridge relay between the sensor and the light actuator,
and three relays beyond the actuator.  The bridge is the only short route,
which is what the fault scenarios attack.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "depguard" / "scenarios"
BRIDGE = 5

LAYOUT = [
    (0, 0, "presence_sensor"),
    (-30, 12, "relay"), (-30, -12, "relay"), (-30, 0, "relay"), (-25, 25, "relay"),
    (30, 0, "relay"),
    (60, 0, "light_actuator"),
    (90, 12, "relay"), (90, -12, "relay"), (90, 0, "relay"),
]

# shared by the three fault scenarios
FAULT_CONFIG = {
    "bounds.sleep_fraction": [0.0, 0.5],
    "bounds.round_time": [0.25, 2.0],
    "bounds.tx_power": [0.0, 3.0],
    "analysis.bootstrap_rssi_margin": 1.0,
    "analysis.horizon": 150,
    "energy.initial_battery": 150.0,
}


def presence(seed=7, until=3000, lo=30, hi=60):
    """Alternating occupancy changes with random dwell times."""
    rng = random.Random(seed)
    t, occupied, events = 5, True, []
    while t < until:
        events.append({"tick": t, "occupied": occupied})
        occupied = not occupied
        t += rng.randint(lo, hi)
    return events


def document(name, *, sigma=0.5, faults=(), config=None, delay=10.0) -> dict:
    return {
        "name": name,
        "nodes": [{"id": i, "position": [float(x), float(y)], "role": role}
                  for i, (x, y, role) in enumerate(LAYOUT)],
        "environment": {"path_loss_exponent": 3.0, "reference_loss": 40.0,
                        "noise_floor": -100.0, "shadowing_sigma": sigma},
        "fault_schedule": list(faults),
        "presence_script": presence(),
        "app_spec": {"max_reaction_delay": delay},
        "config": dict(config or {}),
    }


def benchmarks() -> dict[str, dict]:
    return {
        "no_fault": document("no_fault", sigma=0.0,
                             config={"energy.initial_battery": 400.0}),
        "battery_drain": document("battery_drain", config=FAULT_CONFIG, faults=[
            {"at_tick": 10, "kind": "drain_multiplier", "node": BRIDGE, "factor": 7.0}]),
        "node_crash": document("node_crash", config=FAULT_CONFIG, faults=[
            {"at_tick": 400, "kind": "node_crash", "node": BRIDGE}]),
        "interference_window": document("interference_window", config=FAULT_CONFIG, faults=[
            {"at_tick": 300, "kind": "interference",
             "zone": {"center": [30.0, 0.0], "radius": 20.0, "extra_noise": 6.0,
                      "active_interval": [300, 700]}}]),
    }


def render(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--check", action="store_true")
    parser.add_argument("--out", type=Path, default=OUT)
    args = parser.parse_args(argv)
    stale = []
    for name, doc in benchmarks().items():
        path = args.out / f"{name}.json"
        text = render(doc)
        if args.check:
            if not path.exists() or path.read_text("utf-8") != text:
                stale.append(path.name)
        else:
            path.write_text(text, "utf-8")
    if stale:
        print("out of date: " + ", ".join(stale), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
