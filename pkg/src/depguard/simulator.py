"""Deterministic round-based simulation of a duty-cycled gossip WSN.

One call to :func:`step` advances the network by one global tick.  The tick
length is the smallest initial ``round_time`` in the scenario; a node with a
longer (or shorter) round time runs as many rounds in a tick as round starts
fall inside it.  Presence and absence flags from the sensor spread by
state gossip: every broadcast carries the freshest flag a node knows, with a
hop count, and receivers keep only flags with a newer sequence number.
"""
from __future__ import annotations

import copy
import enum
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from depguard.config import Config
from depguard.core import ControlSettings, CpBounds, Resource, clamp_controls

_EPS = 1e-9


class Role(enum.Enum):
    RELAY = "relay"
    PRESENCE_SENSOR = "presence_sensor"
    LIGHT_ACTUATOR = "light_actuator"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class InterferenceZone:
    center: tuple[float, float]
    radius: float
    extra_noise: float  # dB
    start: int
    end: int

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("interference radius must be > 0")
        if self.extra_noise < 0:
            raise ValueError("extra_noise must be >= 0")
        if self.start > self.end:
            raise ValueError("interference interval must have start <= end")

    def active(self, tick: int) -> bool:
        return self.start <= tick <= self.end

    def covers(self, position) -> bool:
        return math.dist(self.center, position) <= self.radius


@dataclass(frozen=True)
class Environment:
    path_loss_exponent: float = 3.0
    reference_loss: float = 40.0  # dB at 1 m
    noise_floor: float = -100.0  # dBm
    shadowing_sigma: float = 0.0  # dB
    interference_zones: tuple[InterferenceZone, ...] = ()

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.shadowing_sigma < 0:
            raise ValueError("shadowing_sigma must be >= 0")

    def extra_noise_at(self, position, tick: int) -> float:
        return sum(z.extra_noise for z in self.interference_zones
                   if z.active(tick) and z.covers(position))


class FaultKind(enum.Enum):
    NODE_CRASH = "node_crash"
    DRAIN_MULTIPLIER = "drain_multiplier"
    INTERFERENCE = "interference"


@dataclass(frozen=True)
class FaultEvent:
    at_tick: int
    kind: FaultKind
    node: int | None = None
    factor: float = 1.0
    zone: InterferenceZone | None = None

    def __post_init__(self):
        if self.at_tick < 0:
            raise ValueError("at_tick must be >= 0")
        if self.kind is FaultKind.INTERFERENCE:
            if self.zone is None:
                raise ValueError("interference fault needs a zone")
        elif self.node is None:
            raise ValueError(f"{self.kind.value} fault needs a node")
        if self.kind is FaultKind.DRAIN_MULTIPLIER and self.factor < 1:
            raise ValueError("drain factor must be >= 1")

    @classmethod
    def crash(cls, at_tick: int, node: int) -> "FaultEvent":
        return cls(at_tick, FaultKind.NODE_CRASH, node=node)

    @classmethod
    def drain(cls, at_tick: int, node: int, factor: float) -> "FaultEvent":
        return cls(at_tick, FaultKind.DRAIN_MULTIPLIER, node=node, factor=factor)

    @classmethod
    def interference(cls, at_tick: int, zone: InterferenceZone) -> "FaultEvent":
        return cls(at_tick, FaultKind.INTERFERENCE, zone=zone)


@dataclass
class NodeState:
    id: int
    position: tuple[float, float]
    role: Role
    battery: float
    controls: ControlSettings
    initial_battery: float
    initial_controls: ControlSettings
    alive: bool = True
    awake: bool = True
    drain: float = 1.0
    # gossip memory: origin -> (sequence, occupied, hops)
    known: dict = field(default_factory=dict)
    light_on: bool = False


class MessageRecord(NamedTuple):
    tick: int
    sender: int
    receiver: int
    rssi: float


class EnergyItem(NamedTuple):
    """One node's energy bookkeeping for one tick."""

    node: int
    broadcasts: int
    receptions: int
    awake_s: float
    sleep_s: float
    drain: float
    before: float
    after: float
    restored: bool


@dataclass
class TickRecord:
    tick: int
    broadcasts: list[int]  # per node index
    links: list[tuple[int, int, float, int]]  # (sender idx, receiver idx, rssi, count)
    energy: list[EnergyItem]
    counts: np.ndarray | None = None  # [sender, receiver] receptions
    rssi: np.ndarray | None = None  # [sender, receiver] dBm where heard, else 0


@dataclass
class SimState:
    tick: int
    nodes: list[NodeState]
    environment: Environment
    pending_faults: list[FaultEvent]
    rng: np.random.Generator
    event_log: list[tuple[int, str, dict]]
    config: Config
    tick_seconds: float
    presence_script: tuple[tuple[int, bool], ...]
    occupied: bool = False
    presence_seq: int = 0
    presence_log: list[tuple[float, bool]] = field(default_factory=list)
    light_log: list[tuple[float, bool]] = field(default_factory=list)
    records: deque = field(default_factory=deque)
    pending_repairs: list[tuple[int, int]] = field(default_factory=list)
    interventions: int = 0
    index: dict = field(default_factory=dict)
    loss: np.ndarray | None = None  # path loss (dB) between node indices
    presence_at: dict | None = None  # tick -> occupied, built from presence_script

    @property
    def bounds(self) -> CpBounds:
        return self.config.bounds

    def node(self, node_id: int) -> NodeState:
        try:
            return self.nodes[self.index[node_id]]
        except KeyError:
            raise KeyError(f"unknown node {node_id}") from None

    @property
    def sensor(self) -> NodeState:
        return next(n for n in self.nodes if n.role is Role.PRESENCE_SENSOR)

    @property
    def actuator(self) -> NodeState:
        return next(n for n in self.nodes if n.role is Role.LIGHT_ACTUATOR)

    @property
    def now(self) -> float:
        return self.tick * self.tick_seconds

    def copy(self) -> "SimState":
        return copy.deepcopy(self)


def path_loss(distance: float, env: Environment) -> float:
    return env.reference_loss + 10.0 * env.path_loss_exponent * math.log10(distance)


def compute_rssi(tx_power: float, distance: float, env: Environment, rng=None,
                 extra_noise: float = 0.0) -> float:
    """Received power in dBm under log-distance path loss.

    ``extra_noise`` is the interference penalty active at the receiver.
    With ``shadowing_sigma == 0`` the generator is never touched.
    """
    if distance <= 0:
        raise ValueError("distance must be > 0")
    rssi = tx_power - path_loss(distance, env)
    if env.shadowing_sigma > 0:
        if rng is None:
            raise ValueError("shadowing needs a random generator")
        rssi += rng.normal(0.0, env.shadowing_sigma)
    return rssi - extra_noise


def validate_roles(node_ids, roles) -> None:
    seen = set()
    for i, node_id in enumerate(node_ids):
        if node_id in seen:
            raise ScenarioError(f"nodes[{i}].id: duplicate node id {node_id}")
        seen.add(node_id)
    for role in (Role.PRESENCE_SENSOR, Role.LIGHT_ACTUATOR):
        count = sum(r is role for r in roles)
        if count != 1:
            raise ScenarioError(f"nodes: expected exactly one {role.value}, found {count}")


def init_network(scenario, seed: int, config: Config | None = None) -> SimState:
    """Build the tick-0 state of ``scenario`` with a generator seeded by ``seed``."""
    config = config if config is not None else scenario.config
    validate_roles([n.id for n in scenario.nodes], [n.role for n in scenario.nodes])
    nodes = []
    for spec in scenario.nodes:
        battery = config.energy.initial_battery if spec.battery is None else float(spec.battery)
        controls = clamp_controls(spec.controls or ControlSettings(), config.bounds)
        nodes.append(NodeState(spec.id, tuple(spec.position), spec.role, battery, controls,
                               initial_battery=battery, initial_controls=controls))
    for i, n in enumerate(nodes):
        for m in nodes[i + 1:]:
            if math.dist(n.position, m.position) <= 0:
                raise ScenarioError(f"nodes {n.id} and {m.id} share a position")
    positions = np.array([n.position for n in nodes], dtype=float)
    dist = np.sqrt(((positions[:, None, :] - positions[None, :, :]) ** 2).sum(-1))
    np.fill_diagonal(dist, 1.0)
    env = scenario.environment
    loss = env.reference_loss + 10.0 * env.path_loss_exponent * np.log10(dist)
    state = SimState(
        tick=0,
        nodes=nodes,
        environment=env,
        pending_faults=[],
        rng=np.random.default_rng(seed),
        event_log=[],
        config=config,
        tick_seconds=min(n.controls.round_time for n in nodes),
        presence_script=tuple((int(t), bool(o)) for t, o in scenario.presence_script),
        records=deque(maxlen=config.gossip.record_ticks),
        index={n.id: i for i, n in enumerate(nodes)},
        loss=loss,
    )
    for event in scenario.fault_schedule:
        inject_fault(state, event)
    return state


def inject_fault(state: SimState, event: FaultEvent) -> SimState:
    """Schedule ``event``; it is applied by the step that reaches ``event.at_tick``."""
    if event.at_tick < state.tick:
        raise ValueError(f"fault at tick {event.at_tick} is in the past (now {state.tick})")
    if event.node is not None and event.node not in state.index:
        raise KeyError(f"unknown node {event.node}")
    pos = len(state.pending_faults)
    while pos and state.pending_faults[pos - 1].at_tick > event.at_tick:
        pos -= 1
    state.pending_faults.insert(pos, event)
    return state


def apply_controls(state: SimState, node_id: int, settings: ControlSettings) -> SimState:
    node = state.node(node_id)
    if not node.alive:
        raise ValueError(f"node {node_id} is dead")
    node.controls = clamp_controls(settings, state.bounds)
    state.event_log.append((state.tick, "controls", {"node": node_id, **node.controls.to_dict()}))
    return state


def schedule_repair(state: SimState, node_id: int, due_tick: int) -> None:
    state.pending_repairs.append((due_tick, node_id))


def _rounds(round_time: float, tick_seconds: float, k: int) -> int:
    ratio = tick_seconds / round_time
    return math.floor((k + 1) * ratio + _EPS) - math.floor(k * ratio + _EPS)


def _apply_faults(state: SimState) -> None:
    while state.pending_faults and state.pending_faults[0].at_tick <= state.tick:
        event = state.pending_faults.pop(0)
        detail = {"kind": event.kind.value}
        if event.kind is FaultKind.NODE_CRASH:
            node = state.node(event.node)
            node.alive = False
            node.awake = False
            detail["node"] = event.node
        elif event.kind is FaultKind.DRAIN_MULTIPLIER:
            state.node(event.node).drain = float(event.factor)
            detail.update(node=event.node, factor=event.factor)
        else:
            state.environment = replace(
                state.environment,
                interference_zones=state.environment.interference_zones + (event.zone,))
            detail["zone"] = [list(event.zone.center), event.zone.radius, event.zone.extra_noise,
                              event.zone.start, event.zone.end]
        state.event_log.append((state.tick, "fault", detail))


def _apply_repairs(state: SimState) -> set[int]:
    restored = set()
    due = [r for r in state.pending_repairs if r[0] <= state.tick]
    if not due:
        return restored
    state.pending_repairs = [r for r in state.pending_repairs if r[0] > state.tick]
    for _, node_id in sorted(due):
        node = state.node(node_id)
        node.battery = node.initial_battery
        node.controls = node.initial_controls
        node.alive = True
        restored.add(node.id)
        state.event_log.append((state.tick, "restored", {"node": node_id}))
    return restored


def _presence(state: SimState) -> None:
    if state.presence_at is None:
        state.presence_at = dict(state.presence_script)
    occupied = state.presence_at.get(state.tick)
    if occupied is None or occupied == state.occupied:
        return
    state.occupied = occupied
    state.presence_log.append((state.now, occupied))
    state.event_log.append((state.tick, "presence", {"occupied": occupied}))
    sensor = state.sensor
    if sensor.alive and Resource.SENSOR in sensor.controls.active_resources:
        state.presence_seq += 1
        sensor.known[sensor.id] = (state.presence_seq, occupied, 0)


def step(state: SimState) -> list[MessageRecord]:
    """Advance ``state`` in place by one tick; return the receptions of that tick."""
    state.tick += 1
    k = state.tick
    nodes = state.nodes
    n = len(nodes)
    energy_cfg = state.config.energy
    env = state.environment
    T = state.tick_seconds

    _apply_faults(state)
    restored = _apply_repairs(state)
    _presence(state)

    # fixed draw order keeps the stream aligned regardless of node state
    u = state.rng.random(n).tolist()
    shadow = None
    if env.shadowing_sigma > 0:
        # one draw per unordered pair: keep the upper triangle and mirror it
        shadow = np.triu(state.rng.normal(0.0, env.shadowing_sigma, size=(n, n)), 1)
        shadow += shadow.T

    tx = np.array([nd.controls.tx_power for nd in nodes])
    rssi = tx[:, None] - state.loss
    if shadow is not None:
        rssi = rssi + shadow
    if env.interference_zones:
        extra = np.array([env.extra_noise_at(nd.position, k) for nd in nodes])
        rssi = rssi - extra[None, :]

    bcast = np.zeros(n, dtype=np.int64)
    listen = np.zeros(n, dtype=np.int64)
    for i, nd in enumerate(nodes):
        radio = nd.alive and Resource.RADIO in nd.controls.active_resources
        nd.awake = nd.alive and u[i] >= nd.controls.sleep_fraction
        if radio and nd.awake:
            r = _rounds(nd.controls.round_time, T, k)
            bcast[i] = r * nd.controls.tx_schedules
            listen[i] = r * nd.controls.rx_schedules

    sens = np.array([nd.controls.rx_sensitivity for nd in nodes])
    heard = (rssi >= sens[None, :]) & (rssi >= env.noise_floor)
    heard &= (bcast > 0)[:, None] & (listen > 0)[None, :]
    np.fill_diagonal(heard, False)
    counts = np.where(heard, np.minimum(bcast[:, None], listen[None, :]), 0)
    recv = counts.sum(axis=0)
    senders, receivers = np.nonzero(heard)
    links = [(i, j, float(rssi[i, j]), int(counts[i, j]))
             for i, j in zip(senders.tolist(), receivers.tolist())]
    bcast = bcast.tolist()
    recv = recv.tolist()

    # gossip: payloads are snapshots taken before any delivery this tick
    ttl = state.config.gossip.ttl
    payloads = {i: [(o, s, occ, h) for o, (s, occ, h) in nodes[i].known.items() if h < ttl]
                for i in range(n) if bcast[i]}
    for i, j, _, _ in links:
        receiver = nodes[j]
        for origin, seq, occ, hops in payloads[i]:
            mine = receiver.known.get(origin)
            if mine is not None and mine[0] >= seq:
                continue
            receiver.known[origin] = (seq, occ, hops + 1)
            if (receiver.role is Role.LIGHT_ACTUATOR and receiver.light_on != occ
                    and Resource.ACTUATOR in receiver.controls.active_resources):
                receiver.light_on = occ
                state.light_log.append((state.now, occ))
                state.event_log.append((k, "light", {"on": occ}))

    energy = []
    e_tx, e_rx, e_idle, e_sleep = energy_cfg.e_tx, energy_cfg.e_rx, energy_cfg.e_idle, energy_cfg.e_sleep
    for i, nd in enumerate(nodes):
        before = nd.battery
        if nd.alive:
            awake_s = T if nd.awake else 0.0
            sleep_s = T - awake_s
            cost = (e_tx * bcast[i] + e_rx * recv[i] + e_idle * awake_s + e_sleep * sleep_s) * nd.drain
            nd.battery = max(0.0, before - cost)
            if nd.battery == 0.0:
                nd.alive = False
                nd.awake = False
                state.event_log.append((k, "depleted", {"node": nd.id}))
        else:
            awake_s = sleep_s = 0.0
        energy.append(EnergyItem(nd.id, bcast[i], recv[i], awake_s, sleep_s, nd.drain,
                                 before, nd.battery, nd.id in restored))

    state.records.append(TickRecord(k, bcast, links, energy, counts,
                                    np.where(heard, rssi, 0.0)))
    out = []
    for i, j, value, count in links:
        out.extend([MessageRecord(k, nodes[i].id, nodes[j].id, value)] * count)
    return out


def activity_cost(item: EnergyItem, energy_cfg) -> float:
    """Itemized energy of one node-tick, in the same arithmetic order as :func:`step`."""
    return (energy_cfg.e_tx * item.broadcasts + energy_cfg.e_rx * item.receptions
            + energy_cfg.e_idle * item.awake_s + energy_cfg.e_sleep * item.sleep_s) * item.drain
