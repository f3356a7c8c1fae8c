"""Application evaluation (smart lighting), manual interventions, run metrics."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, replace

from depguard.core import NORMAL, ApplicationLabel, Dimension
from depguard.simulator import SimState, schedule_repair


@dataclass(frozen=True)
class AppSpec:
    max_reaction_delay: float = 3.0  # seconds
    presence_setting: str = "on"
    absence_setting: str = "off"

    def __post_init__(self):
        if not self.max_reaction_delay > 0:
            raise ValueError("max_reaction_delay must be > 0")
        if self.presence_setting != "on" or self.absence_setting != "off":
            raise ValueError("only presence 'on' / absence 'off' settings are supported")


def judge(now: float, presence, light, spec: AppSpec, *, resolution: float = 1.0,
          occupied0: bool = False, light0: bool = False) -> ApplicationLabel:
    """Label the lighting application at time ``now`` (seconds).

    ``presence`` and ``light`` are time-ordered (time, flag) change lists.
    Inside the grace window after a presence transition only the reaction
    delay is judged.  After it, a wrong light setting fails the presence or
    absence dimension; a correct setting that was reached late fails the
    reaction-delay dimension for ``resolution`` seconds after the reaction.
    """
    occupied, t_p = occupied0, None
    i = bisect.bisect_right([t for t, _ in presence], now)
    if i:
        t_p, occupied = presence[i - 1]
    j = bisect.bisect_right([t for t, _ in light], now)
    light_on = light[j - 1][1] if j else light0
    required = occupied
    if t_p is not None and now - t_p <= spec.max_reaction_delay:
        return NORMAL
    if light_on != required:
        return ApplicationLabel.failure(
            Dimension.PRESENCE_SETTING if occupied else Dimension.ABSENCE_SETTING)
    if t_p is None:
        return NORMAL
    # first moment at/after the transition when the light showed the required setting
    k = bisect.bisect_left([t for t, _ in light], t_p)
    before = light[k - 1][1] if k else light0
    if before == required:
        return NORMAL
    t_react = next(t for t, on in light[k:j] if on == required)
    if t_react - t_p > spec.max_reaction_delay and now - t_react < resolution:
        return ApplicationLabel.failure(Dimension.REACTION_DELAY)
    return NORMAL


def evaluate_application(state: SimState, spec: AppSpec) -> ApplicationLabel:
    return judge(state.now, state.presence_log, state.light_log, spec,
                 resolution=state.tick_seconds)


def record_intervention(state: SimState, node: int, repair_delay: int, *,
                        unreachable_for: int = 0, escalation_threshold: int = 0) -> SimState:
    """Schedule a manual repair of ``node``; it comes back after ``repair_delay`` ticks."""
    target = state.node(node)
    broken = not target.alive or (escalation_threshold > 0
                                  and unreachable_for >= escalation_threshold)
    if not broken:
        raise ValueError(f"node {node} is healthy; no intervention needed")
    if any(n == node for _, n in state.pending_repairs):
        raise ValueError(f"node {node} already has a repair scheduled")
    state.interventions += 1
    schedule_repair(state, node, state.tick + repair_delay)
    state.event_log.append((state.tick, "intervention", {"node": node, "due": state.tick + repair_delay}))
    return state


@dataclass(frozen=True)
class RunMetrics:
    ticks_total: int = 0
    ticks_normal: int = 0
    failure_transitions: int = 0
    manual_interventions: int = 0
    averted: int = 0
    occurred: int = 0
    expired: int = 0
    unpredicted_failures: int = 0
    last_normal: bool = True

    @property
    def availability(self) -> float:
        return self.ticks_normal / self.ticks_total if self.ticks_total else math.nan

    @property
    def mtbf(self) -> float:
        """Normal ticks per Normal-to-Failure transition; infinite when none."""
        if self.failure_transitions == 0:
            return math.inf
        return self.ticks_normal / self.failure_transitions

    def mission_reliability(self, window: int | None = None) -> float:
        """Probability of a failure-free window under an exponential failure model."""
        window = self.ticks_total if window is None else window
        return math.exp(-window / self.mtbf) if self.mtbf != math.inf else 1.0

    @property
    def prediction_precision(self) -> float | None:
        hits = self.occurred + self.averted
        total = hits + self.expired
        return hits / total if total else None

    @property
    def prediction_recall(self) -> float | None:
        hits = self.occurred + self.averted
        total = hits + self.unpredicted_failures
        return hits / total if total else None

    def to_dict(self) -> dict:
        def num(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return None
            return "inf" if x == math.inf else x

        return {
            "ticks_total": self.ticks_total,
            "ticks_normal": self.ticks_normal,
            "failure_transitions": self.failure_transitions,
            "availability": num(self.availability),
            "mtbf": num(self.mtbf),
            "mission_reliability": num(self.mission_reliability()),
            "manual_interventions": self.manual_interventions,
            "outcomes": {"averted": self.averted, "occurred": self.occurred,
                         "expired": self.expired},
            "unpredicted_failures": self.unpredicted_failures,
            "prediction_precision": num(self.prediction_precision),
            "prediction_recall": num(self.prediction_recall),
        }


def update_metrics(metrics: RunMetrics, label: ApplicationLabel, outcomes=(), *,
                   unpredicted: int = 0, interventions: int = 0) -> RunMetrics:
    """Fold one tick into ``metrics``; call exactly once per tick."""
    from depguard.adaptation import Result

    normal = label.normal
    counts = {r: 0 for r in Result}
    for outcome in outcomes:
        counts[outcome.result] += 1
    return replace(
        metrics,
        ticks_total=metrics.ticks_total + 1,
        ticks_normal=metrics.ticks_normal + normal,
        failure_transitions=metrics.failure_transitions + (metrics.last_normal and not normal),
        manual_interventions=metrics.manual_interventions + interventions,
        averted=metrics.averted + counts[Result.AVERTED],
        occurred=metrics.occurred + counts[Result.OCCURRED],
        expired=metrics.expired + counts[Result.EXPIRED],
        unpredicted_failures=metrics.unpredicted_failures + unpredicted,
        last_normal=normal,
    )
