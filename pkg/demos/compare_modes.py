"""Compare the three loop modes on a benchmark over a handful of seeds.

    python demos/compare_modes.py [scenario] [seeds] [ticks]

e.g. ``python demos/compare_modes.py battery_drain 0,1,2,3,4 2000``.
"""
import sys

from depguard import benchmark, compare

name = sys.argv[1] if len(sys.argv) > 1 else "battery_drain"
seeds = [int(s) for s in (sys.argv[2] if len(sys.argv) > 2 else "0,1,2,3,4").split(",")]
ticks = int(sys.argv[3]) if len(sys.argv) > 3 else 2000

summary = compare(benchmark(name), seeds, ticks)
for mode, row in summary["modes"].items():
    a, m = row["availability"], row["manual_interventions"]
    print(f"{mode:10s} availability {a['mean']:.4f} (sd {a['stddev']:.4f})  "
          f"interventions {m['mean']:.2f}")
for test, result in summary["paired_tests"].items():
    print(f"{test}: mean diff {result['mean_difference']:+.4f}, p = {result['p_value']:.3g}")
print("ordering holds:", summary["ordering_holds"])
