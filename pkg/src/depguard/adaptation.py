"""Adaptation: action catalogs, epsilon-greedy policy learning, outcome resolution."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from depguard.analysis import FaultPrediction, FaultType, ThresholdModel, classify_value
from depguard.simulator import SimState, apply_controls


@dataclass(frozen=True)
class AdaptationAction:
    """A catalog action; ``target`` is bound when the action is selected.

    ``delta`` holds (field, op, amount) steps with op ``"add"`` or ``"mul"``.
    ``scope`` is ``"self"`` (the predicted node), ``"neighbor"`` (its strongest
    alive neighbor) or ``"escalate"`` (hand over to manual intervention).
    """

    id: str
    fault_type: FaultType
    delta: tuple[tuple[str, str, float], ...]
    description: str
    scope: str = "self"
    target: int | None = None

    def __post_init__(self):
        if self.scope != "escalate" and not self.delta:
            raise ValueError(f"action {self.id} changes no field")

    def bind(self, target: int) -> "AdaptationAction":
        return replace(self, target=target)

    def adjust(self, settings):
        changes = {}
        for name, op, amount in self.delta:
            value = changes.get(name, getattr(settings, name))
            changes[name] = value + amount if op == "add" else value * amount
        return replace(settings, **changes)


def _act(id, fault_type, description, *delta, scope="self"):
    return AdaptationAction(id, fault_type, tuple(delta), description, scope)


BD, CL, ML, NU = (FaultType.BATTERY_DEPLETION, FaultType.CONNECTIVITY_LOSS,
                  FaultType.MESSAGE_LOSS, FaultType.NODE_UNREACHABLE)

DEFAULT_CATALOG: dict[FaultType, tuple[AdaptationAction, ...]] = {
    BD: (
        _act("BD1", BD, "sleep_fraction +0.2", ("sleep_fraction", "add", 0.2)),
        _act("BD2", BD, "tx_schedules -1", ("tx_schedules", "add", -1)),
        _act("BD3", BD, "round_time x2", ("round_time", "mul", 2.0)),
        _act("BD4", BD, "tx_power -3 dB", ("tx_power", "add", -3.0)),
    ),
    CL: (
        _act("CL1", CL, "tx_power +3 dB", ("tx_power", "add", 3.0)),
        _act("CL2", CL, "rx_sensitivity -3 dB", ("rx_sensitivity", "add", -3.0)),
        _act("CL3", CL, "round_time x0.5", ("round_time", "mul", 0.5)),
        _act("CL4", CL, "sleep_fraction -0.2", ("sleep_fraction", "add", -0.2)),
    ),
    ML: (
        _act("ML1", ML, "rx_schedules +1", ("rx_schedules", "add", 1)),
        _act("ML2", ML, "round_time x0.5", ("round_time", "mul", 0.5)),
    ),
    NU: (
        _act("NU1", NU, "neighbor tx_power +3 dB", ("tx_power", "add", 3.0), scope="neighbor"),
        _act("NU2", NU, "escalate to manual intervention", scope="escalate"),
    ),
}


@dataclass
class PolicyState:
    catalogs: dict = field(default_factory=lambda: dict(DEFAULT_CATALOG))
    exploration_rate: float = 0.1
    stats: dict = field(default_factory=dict)  # (fault_type, action id) -> [attempts, successes]

    def __post_init__(self):
        if not 0.0 <= self.exploration_rate <= 1.0:
            raise ValueError("exploration_rate must be in [0, 1]")

    def counts(self, fault_type: FaultType, action_id: str) -> tuple[int, int]:
        attempts, successes = self.stats.get((fault_type, action_id), (0, 0))
        return attempts, successes

    def ratio(self, fault_type: FaultType, action_id: str) -> float:
        attempts, successes = self.counts(fault_type, action_id)
        return 1.0 if attempts == 0 else successes / attempts

    def snapshot(self) -> dict:
        out = {}
        for ft, actions in self.catalogs.items():
            out[ft.value] = {}
            for a in actions:
                attempts, successes = self.counts(ft, a.id)
                out[ft.value][a.id] = {"description": a.description, "attempts": attempts,
                                       "successes": successes,
                                       "ratio": successes / attempts if attempts else None}
        return out


def select_action(prediction: FaultPrediction, policy: PolicyState, rng) -> AdaptationAction:
    """Epsilon-greedy choice; untried actions score 1.0, ties go to the lowest id."""
    catalog = policy.catalogs.get(prediction.fault_type) or ()
    if not catalog:
        raise ValueError(f"empty catalog for {prediction.fault_type.value}")
    if rng.random() < policy.exploration_rate:
        action = catalog[int(rng.integers(len(catalog)))]
    else:
        ft = prediction.fault_type
        action = min(catalog, key=lambda a: (-policy.ratio(ft, a.id), a.id))
    return action.bind(prediction.node)


@dataclass(frozen=True)
class ActionRecord:
    tick: int
    action: AdaptationAction
    target: int | None
    applied: bool
    escalate: bool = False
    reason: str = ""


def strongest_neighbor(state: SimState, node_id: int) -> int | None:
    idx = state.index[node_id]
    best = None
    for j, other in enumerate(state.nodes):
        if j == idx or not other.alive:
            continue
        if best is None or state.loss[idx, j] < state.loss[idx, best]:
            best = j
    return None if best is None else state.nodes[best].id


def apply_action(action: AdaptationAction, state: SimState) -> ActionRecord:
    """Apply ``action`` to ``state`` in place through the simulator's control path."""
    subject = state.node(action.target)
    if action.scope == "escalate":
        state.event_log.append((state.tick, "action", {"id": action.id, "node": subject.id}))
        return ActionRecord(state.tick, action, subject.id, applied=True, escalate=True)
    if not subject.alive:
        state.event_log.append((state.tick, "action_failed",
                                {"id": action.id, "node": subject.id, "reason": "dead"}))
        return ActionRecord(state.tick, action, subject.id, applied=False, escalate=True,
                            reason="dead target")
    target = subject
    if action.scope == "neighbor":
        neighbor = strongest_neighbor(state, subject.id)
        if neighbor is None:
            state.event_log.append((state.tick, "action_failed",
                                    {"id": action.id, "node": subject.id, "reason": "no neighbor"}))
            return ActionRecord(state.tick, action, None, applied=False, reason="no neighbor")
        target = state.node(neighbor)
    apply_controls(state, target.id, action.adjust(target.controls))
    state.event_log.append((state.tick, "action", {"id": action.id, "node": target.id}))
    return ActionRecord(state.tick, action, target.id, applied=True)


class Result(enum.Enum):
    AVERTED = "Averted"
    OCCURRED = "Occurred"
    EXPIRED = "Expired"


@dataclass(frozen=True)
class PredictionOutcome:
    prediction: FaultPrediction
    action: AdaptationAction | None
    result: Result
    resolved_at: int


_LIVENESS_TYPES = (FaultType.BATTERY_DEPLETION, FaultType.NODE_UNREACHABLE)


def fault_observed(prediction: FaultPrediction, frames, model: ThresholdModel) -> bool:
    for f in frames:
        if f.tick < prediction.issued_at or f.tick > prediction.t_max:
            continue
        if not f.reachable:
            if prediction.fault_type in _LIVENESS_TYPES:
                return True
            continue
        if prediction.trigger is not None:
            entry = model[prediction.trigger]
            if classify_value(f.values[prediction.trigger.index], entry).failure:
                return True
    return False


def resolve_outcome(prediction: FaultPrediction, history, model: ThresholdModel, now: int,
                    action: AdaptationAction | None = None, *, since: int | None = None,
                    dead: bool = False) -> PredictionOutcome | None:
    """Outcome of ``prediction`` at tick ``now``, or None while still pending.

    ``since`` restricts the scan to frames newer than that tick (callers that
    check every tick pass the previous tick).  ``dead`` reports that the node
    is known to be out of battery or crashed.
    """
    count = history.count(prediction.node)
    if count:
        first = prediction.issued_at if since is None else max(prediction.issued_at, since + 1)
        length = max(1, min(count, now - first + 1))
        frames = history.frames(prediction.node, length)
        if fault_observed(prediction, frames, model):
            return PredictionOutcome(prediction, action, Result.OCCURRED, now)
    if dead and prediction.fault_type in _LIVENESS_TYPES and now <= prediction.t_max:
        return PredictionOutcome(prediction, action, Result.OCCURRED, now)
    if now > prediction.t_max:
        result = Result.AVERTED if action is not None else Result.EXPIRED
        return PredictionOutcome(prediction, action, result, now)
    return None


def update_policy(policy: PolicyState, outcome: PredictionOutcome | None) -> PolicyState:
    if outcome is None or outcome.action is None:
        return policy
    key = (outcome.prediction.fault_type, outcome.action.id)
    attempts, successes = policy.stats.get(key, (0, 0))
    policy.stats[key] = [attempts + 1, successes + (outcome.result is Result.AVERTED)]
    return policy

