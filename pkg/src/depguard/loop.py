"""The monitor / analyse / adapt / evaluate cycle, one tick at a time."""
from __future__ import annotations

import enum
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from depguard.adaptation import (ActionRecord, PolicyState, PredictionOutcome, apply_action,
                                 resolve_outcome, select_action, update_policy)
from depguard.analysis import (FAULT_OF_TRIGGER, FaultPrediction, FaultType, ThresholdModel,
                               bootstrap_model, failure_mask, learn_from_arrays, predict_faults)
from depguard.core import OBSERVABLES, ApplicationLabel, Feature, Observable
from depguard.evaluation import (AppSpec, RunMetrics, evaluate_application, record_intervention,
                                 update_metrics)
from depguard.monitor import History, ObservationFrame, sample
from depguard.simulator import SimState, init_network, step

log = logging.getLogger(__name__)


class LoopMode(enum.Enum):
    NO_ADAPTATION = "no-adapt"
    REACTIVE = "reactive"
    PROACTIVE = "proactive"


class LabelBuffer:
    """Growable (frame values, failure flag) store for threshold training."""

    def __init__(self, capacity: int = 4096):
        self.values = np.empty((capacity, len(OBSERVABLES)))
        self.failure = np.empty(capacity, dtype=bool)
        self.size = 0

    def extend(self, rows, flags) -> None:
        need = self.size + len(rows)
        if need > len(self.failure):
            cap = max(need, 2 * len(self.failure))
            self.values = np.resize(self.values, (cap, len(OBSERVABLES)))
            self.failure = np.resize(self.failure, cap)
        self.values[self.size:need] = rows
        self.failure[self.size:need] = flags
        self.size = need

    def __len__(self) -> int:
        return self.size

    def arrays(self):
        return self.values[:self.size], self.failure[:self.size]


@dataclass
class LoopState:
    sim: SimState
    spec: AppSpec
    history: History
    model: ThresholdModel
    bootstrap: ThresholdModel
    policy: PolicyState
    metrics: RunMetrics = field(default_factory=RunMetrics)
    open_predictions: list = field(default_factory=list)
    labeled: LabelBuffer = field(default_factory=LabelBuffer)
    path_nodes: frozenset = frozenset()
    nominal_neighbors: dict = field(default_factory=dict)
    actions: dict = field(default_factory=dict)  # prediction key -> AdaptationAction
    busy: dict = field(default_factory=dict)  # node -> key of the prediction its action serves
    quiet_until: dict = field(default_factory=dict)  # node -> last tick of its action cooldown
    unreachable_run: dict = field(default_factory=dict)
    last_frames: dict = field(default_factory=dict)
    last_flags: dict = field(default_factory=dict)
    outcomes: list = field(default_factory=list)
    action_count: int = 0

    @property
    def config(self):
        return self.sim.config


@dataclass
class TickReport:
    tick: int
    frames: list[ObservationFrame]
    label: ApplicationLabel
    predictions: list[FaultPrediction]
    actions: list[ActionRecord]
    interventions: list[int]
    outcomes: list[PredictionOutcome]


def nominal_links(sim: SimState) -> dict[int, set[int]]:
    """Receiver index -> sender indices under initial controls, no shadowing or interference."""
    heard = {j: set() for j in range(len(sim.nodes))}
    floor = sim.environment.noise_floor
    for i, a in enumerate(sim.nodes):
        for j, b in enumerate(sim.nodes):
            if i == j:
                continue
            rssi = a.controls.tx_power - sim.loss[i, j]
            if rssi >= b.controls.rx_sensitivity and rssi >= floor:
                heard[j].add(i)
    return heard


def shortest_path_nodes(sim: SimState, heard) -> frozenset:
    """Node ids on any shortest sensor-to-actuator path of the nominal graph."""
    n = len(sim.nodes)
    src, dst = sim.index[sim.sensor.id], sim.index[sim.actuator.id]
    sends = {i: {j for j in range(n) if i in heard[j]} for i in range(n)}

    def bfs(start, nbrs):
        dist = {start: 0}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in sorted(nbrs[u]):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    forward, backward = bfs(src, sends), bfs(dst, heard)
    if dst not in forward:
        return frozenset()
    total = forward[dst]
    return frozenset(sim.nodes[v].id for v in range(n)
                     if v in forward and v in backward and forward[v] + backward[v] == total)


def init_loop(scenario, seed: int) -> LoopState:
    sim = init_network(scenario, seed)
    cfg = sim.config
    heard = nominal_links(sim)
    rx = np.median([n.controls.rx_sensitivity for n in sim.nodes])
    boot = bootstrap_model(float(rx), cfg.analysis)
    return LoopState(
        sim=sim,
        spec=scenario.app_spec,
        history=History(cfg.monitor.capacity),
        model=boot,
        bootstrap=boot,
        policy=PolicyState(exploration_rate=cfg.adaptation.exploration_rate),
        path_nodes=shortest_path_nodes(sim, heard),
        nominal_neighbors={sim.nodes[j].id: len(s) for j, s in heard.items()},
    )


def frame_label(loop: LoopState, frame: ObservationFrame, app: ApplicationLabel) -> ApplicationLabel:
    """Training label of one node's frame: failures count only for implicated nodes."""
    if app.normal:
        return app
    node = loop.sim.node(frame.node)
    if not node.alive or not frame.reachable:
        return app
    if (frame.node in loop.path_nodes and
            frame.values[Observable.NEIGHBOR_COUNT.index] < loop.nominal_neighbors[frame.node]):
        return app
    return ApplicationLabel()


def _escalate(loop: LoopState, node_id: int, interventions: list[int]) -> None:
    sim = loop.sim
    if any(n == node_id for _, n in sim.pending_repairs):
        return
    node = sim.node(node_id)
    run = loop.unreachable_run.get(node_id, 0)
    threshold = loop.config.analysis.unreachable_after
    if node.alive and run < threshold:
        return
    record_intervention(sim, node_id, loop.config.evaluation.repair_delay,
                        unreachable_for=run, escalation_threshold=threshold)
    interventions.append(node_id)


def tick(loop: LoopState, mode: LoopMode) -> TickReport:
    sim = loop.sim
    cfg = sim.config
    acfg = cfg.analysis
    step(sim)
    now = sim.tick

    # monitoring
    frames = sample(sim, cfg.monitor.window, previous=loop.last_frames)
    loop.history.push(frames)
    for f in frames:
        loop.last_frames[f.node] = f
        loop.unreachable_run[f.node] = 0 if f.reachable else loop.unreachable_run.get(f.node, 0) + 1

    # evaluation feeds the learner
    label = evaluate_application(sim, loop.spec)
    rows, flags = [], []
    for f in frames:
        if f.reachable:
            rows.append(f.values)
            flags.append(not frame_label(loop, f, label).normal)
    if rows:
        loop.labeled.extend(rows, flags)
    if now % acfg.relearn_every == 0:
        values, failure = loop.labeled.arrays()
        loop.model = learn_from_arrays(values, failure, bootstrap=loop.bootstrap,
                                       min_samples=acfg.min_samples,
                                       min_balanced_accuracy=acfg.min_balanced_accuracy)

    # analysis
    open_keys = {p.key for p in loop.open_predictions}
    unpredicted = 0
    flags_now = {}
    live = [f for f in frames if f.reachable]
    if live:
        mask = failure_mask([f.values for f in live], loop.model)
        for f, row in zip(live, mask.tolist()):
            failing = {obs for obs, bad in zip(OBSERVABLES, row) if bad}
            before = loop.last_flags.get(f.node, set())
            for obs in failing - before:
                if (f.node, obs) not in open_keys:
                    unpredicted += 1
            flags_now[f.node] = failing
    loop.last_flags.update(flags_now)

    new: list[FaultPrediction] = []
    if mode is LoopMode.PROACTIVE:
        new = predict_faults(loop.history, loop.model, acfg.horizon,
                             window=acfg.prediction_window, band_k=acfg.band_k,
                             unreachable_after=acfg.unreachable_after, open_keys=open_keys,
                             min_points=acfg.min_trend_points)
    elif mode is LoopMode.REACTIVE:
        for f in frames:
            if f.reachable:
                for obs in OBSERVABLES:
                    if obs in flags_now[f.node] and (f.node, obs) not in open_keys:
                        new.append(FaultPrediction(f.node, obs.feature, FAULT_OF_TRIGGER[obs],
                                                   now, now, now, obs))
            elif (loop.unreachable_run[f.node] >= acfg.unreachable_after
                  and (f.node, None) not in open_keys):
                new.append(FaultPrediction(f.node, Feature.COMMUNICATION,
                                           FaultType.NODE_UNREACHABLE, now, now, now, None))
    loop.open_predictions.extend(new)

    # adaptation
    records: list[ActionRecord] = []
    interventions: list[int] = []
    if mode is not LoopMode.NO_ADAPTATION:
        for p in new:
            if p.node in loop.busy or loop.quiet_until.get(p.node, 0) >= now:
                continue
            action = select_action(p, loop.policy, sim.rng)
            record = apply_action(action, sim)
            records.append(record)
            loop.action_count += 1
            loop.actions[p.key] = action
            loop.busy[p.node] = p.key
            loop.quiet_until[p.node] = now + cfg.adaptation.cooldown
            if record.escalate:
                _escalate(loop, p.node, interventions)

    # outcomes of open predictions
    resolved: list[PredictionOutcome] = []
    still_open = []
    for p in loop.open_predictions:
        action = loop.actions.get(p.key)
        outcome = resolve_outcome(p, loop.history, loop.model, now, action, since=now - 1,
                                  dead=not sim.node(p.node).alive)
        if outcome is None:
            still_open.append(p)
            continue
        resolved.append(outcome)
        update_policy(loop.policy, outcome)
        loop.actions.pop(p.key, None)
        if loop.busy.get(p.node) == p.key:
            del loop.busy[p.node]
    loop.open_predictions = still_open
    loop.outcomes.extend(resolved)

    # users notice a broken application and call for repair of dead nodes
    if not label.normal:
        for node in sim.nodes:
            if not node.alive:
                _escalate(loop, node.id, interventions)

    loop.metrics = update_metrics(loop.metrics, label, resolved, unpredicted=unpredicted,
                                  interventions=len(interventions))
    return TickReport(now, frames, label, new, records, interventions, resolved)


def run_loop(scenario, seed: int, mode: LoopMode, ticks: int, on_tick=None) -> LoopState:
    if ticks < 1:
        raise ValueError("ticks must be >= 1")
    loop = init_loop(scenario, seed)
    for _ in range(ticks):
        report = tick(loop, mode)
        if on_tick is not None:
            on_tick(loop, report)
    return loop


__all__ = ["LoopMode", "LoopState", "TickReport", "init_loop", "tick", "run_loop"]
