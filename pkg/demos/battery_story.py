"""Watch the runtime see a draining bridge relay coming.

The battery_drain benchmark makes node 5, the only short route between the
presence sensor and the light, burn energy seven times faster from tick 10.
This script runs the same seed once without adaptation and once in the
proactive mode, then prints the first fault prediction and the first action
it triggered next to the availability of both runs.

    python demos/battery_story.py [seed] [ticks]
"""
import sys

from depguard import LoopMode, benchmark, run_loop

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
ticks = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
scenario = benchmark("battery_drain")

events = []


def watch(loop, report):
    for p in report.predictions:
        events.append(f"tick {report.tick:4d}  node {p.node} predicted {p.fault_type.value} "
                      f"in [{p.t_min}, {p.t_max}]")
    for rec in report.actions:
        events.append(f"tick {report.tick:4d}  action {rec.action.id} on node {rec.action.target}")


baseline = run_loop(scenario, seed, LoopMode.NO_ADAPTATION, ticks)
proactive = run_loop(scenario, seed, LoopMode.PROACTIVE, ticks, on_tick=watch)

print(f"seed {seed}, {ticks} ticks")
print(f"  no adaptation: availability {baseline.metrics.availability:.4f}, "
      f"{baseline.metrics.manual_interventions} manual interventions")
print(f"  proactive:     availability {proactive.metrics.availability:.4f}, "
      f"{proactive.metrics.manual_interventions} manual interventions")
print("first proactive events:")
for line in events[:8]:
    print("  " + line)
