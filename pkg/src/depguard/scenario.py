"""Scenario documents: strict JSON loading, validation and serialization."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

from depguard.config import Config, apply_overrides
from depguard.core import NUMERIC_CONTROLS, ControlSettings, Resource
from depguard.evaluation import AppSpec
from depguard.simulator import (Environment, FaultEvent, FaultKind, InterferenceZone, Role,
                                ScenarioError)

BENCHMARKS = ("battery_drain", "interference_window", "node_crash", "no_fault")


@dataclass(frozen=True)
class NodeSpec:
    id: int
    position: tuple[float, float]
    role: Role = Role.RELAY
    battery: float | None = None
    controls: ControlSettings | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[NodeSpec, ...]
    environment: Environment = field(default_factory=Environment)
    fault_schedule: tuple[FaultEvent, ...] = ()
    presence_script: tuple[tuple[int, bool], ...] = ()
    app_spec: AppSpec = field(default_factory=AppSpec)
    overrides: tuple[tuple[str, object], ...] = ()

    @property
    def config(self) -> Config:
        return apply_overrides(Config(), dict(self.overrides))


# -- strict readers -----------------------------------------------------------

def _fail(path: str, msg: str):
    raise ScenarioError(f"{path}: {msg}")


def _obj(doc, path, required=(), optional=()):
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    allowed = set(required) | set(optional)
    for key in doc:
        if key not in allowed:
            _fail(f"{path}.{key}" if path else key, "unknown key")
    for key in required:
        if key not in doc:
            _fail(f"{path}.{key}" if path else key, "missing required key")
    return doc


def _num(value, path, *, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    if positive and not value > 0:
        _fail(path, "must be > 0")
    if nonneg and value < 0:
        _fail(path, "must be >= 0")
    return float(value)


def _int(value, path, *, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    if nonneg and value < 0:
        _fail(path, "must be >= 0")
    return value


def _point(value, path):
    if not isinstance(value, list) or len(value) != 2:
        _fail(path, "expected [x, y]")
    return (_num(value[0], f"{path}[0]"), _num(value[1], f"{path}[1]"))


def _enum(enum_cls, value, path):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(e.value for e in enum_cls)
        _fail(path, f"expected one of {choices}")


def _controls(doc, path) -> ControlSettings:
    _obj(doc, path, optional=NUMERIC_CONTROLS + ("active_resources",))
    values = {}
    for key in NUMERIC_CONTROLS:
        if key in doc:
            if key in ("tx_schedules", "rx_schedules"):
                values[key] = _int(doc[key], f"{path}.{key}", nonneg=True)
            else:
                values[key] = _num(doc[key], f"{path}.{key}")
    if "round_time" in values and values["round_time"] <= 0:
        _fail(f"{path}.round_time", "must be > 0")
    if "sleep_fraction" in values and not 0 <= values["sleep_fraction"] < 1:
        _fail(f"{path}.sleep_fraction", "must be in [0, 1)")
    if "active_resources" in doc:
        res = doc["active_resources"]
        if not isinstance(res, list):
            _fail(f"{path}.active_resources", "expected a list")
        values["active_resources"] = frozenset(
            _enum(Resource, r, f"{path}.active_resources[{i}]") for i, r in enumerate(res))
    return ControlSettings(**values)


def _zone(doc, path) -> InterferenceZone:
    _obj(doc, path, required=("center", "radius", "extra_noise", "active_interval"))
    interval = doc["active_interval"]
    if not isinstance(interval, list) or len(interval) != 2:
        _fail(f"{path}.active_interval", "expected [t_start, t_end]")
    start = _int(interval[0], f"{path}.active_interval[0]", nonneg=True)
    end = _int(interval[1], f"{path}.active_interval[1]", nonneg=True)
    if start > end:
        _fail(f"{path}.active_interval", "t_start must be <= t_end")
    return InterferenceZone(_point(doc["center"], f"{path}.center"),
                            _num(doc["radius"], f"{path}.radius", positive=True),
                            _num(doc["extra_noise"], f"{path}.extra_noise", nonneg=True),
                            start, end)


def _environment(doc, path) -> Environment:
    _obj(doc, path, optional=("path_loss_exponent", "reference_loss", "noise_floor",
                              "shadowing_sigma", "interference_zones"))
    kw = {}
    if "path_loss_exponent" in doc:
        kw["path_loss_exponent"] = _num(doc["path_loss_exponent"], f"{path}.path_loss_exponent",
                                        positive=True)
    for key in ("reference_loss", "noise_floor"):
        if key in doc:
            kw[key] = _num(doc[key], f"{path}.{key}")
    if "shadowing_sigma" in doc:
        kw["shadowing_sigma"] = _num(doc["shadowing_sigma"], f"{path}.shadowing_sigma", nonneg=True)
    zones = doc.get("interference_zones", [])
    if not isinstance(zones, list):
        _fail(f"{path}.interference_zones", "expected a list")
    kw["interference_zones"] = tuple(_zone(z, f"{path}.interference_zones[{i}]")
                                     for i, z in enumerate(zones))
    return Environment(**kw)


def _fault(doc, path, node_ids) -> FaultEvent:
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    kind = _enum(FaultKind, doc.get("kind"), f"{path}.kind")
    if kind is FaultKind.INTERFERENCE:
        _obj(doc, path, required=("at_tick", "kind", "zone"))
    elif kind is FaultKind.DRAIN_MULTIPLIER:
        _obj(doc, path, required=("at_tick", "kind", "node", "factor"))
    else:
        _obj(doc, path, required=("at_tick", "kind", "node"))
    at = _int(doc["at_tick"], f"{path}.at_tick", nonneg=True)
    if kind is FaultKind.INTERFERENCE:
        return FaultEvent.interference(at, _zone(doc["zone"], f"{path}.zone"))
    node = _int(doc["node"], f"{path}.node")
    if node not in node_ids:
        _fail(f"{path}.node", f"unknown node {node}")
    if kind is FaultKind.DRAIN_MULTIPLIER:
        factor = _num(doc["factor"], f"{path}.factor")
        if factor < 1:
            _fail(f"{path}.factor", "must be >= 1")
        return FaultEvent.drain(at, node, factor)
    return FaultEvent.crash(at, node)


def parse_scenario(doc) -> Scenario:
    _obj(doc, "", required=("name", "nodes"),
         optional=("environment", "fault_schedule", "presence_script", "app_spec", "config"))
    name = doc["name"]
    if not isinstance(name, str) or not name:
        _fail("name", "expected a non-empty string")
    if not isinstance(doc["nodes"], list) or not doc["nodes"]:
        _fail("nodes", "expected a non-empty list")
    nodes = []
    seen = set()
    for i, nd in enumerate(doc["nodes"]):
        path = f"nodes[{i}]"
        _obj(nd, path, required=("id", "position"), optional=("role", "battery", "controls"))
        node_id = _int(nd["id"], f"{path}.id")
        if node_id in seen:
            _fail(f"{path}.id", f"duplicate node id {node_id}")
        seen.add(node_id)
        role = _enum(Role, nd.get("role", "relay"), f"{path}.role")
        battery = _num(nd["battery"], f"{path}.battery", positive=True) if "battery" in nd else None
        controls = _controls(nd["controls"], f"{path}.controls") if "controls" in nd else None
        nodes.append(NodeSpec(node_id, _point(nd["position"], f"{path}.position"), role,
                              battery, controls))
    for role in (Role.PRESENCE_SENSOR, Role.LIGHT_ACTUATOR):
        count = sum(n.role is role for n in nodes)
        if count != 1:
            _fail("nodes", f"expected exactly one {role.value}, found {count}")
    positions = [n.position for n in nodes]
    for i, p in enumerate(positions):
        if p in positions[:i]:
            _fail(f"nodes[{i}].position", "two nodes share a position")

    env = _environment(doc.get("environment", {}), "environment")
    faults = doc.get("fault_schedule", [])
    if not isinstance(faults, list):
        _fail("fault_schedule", "expected a list")
    faults = tuple(_fault(f, f"fault_schedule[{i}]", seen) for i, f in enumerate(faults))

    script = doc.get("presence_script", [])
    if not isinstance(script, list):
        _fail("presence_script", "expected a list")
    events, last = [], -1
    for i, ev in enumerate(script):
        path = f"presence_script[{i}]"
        _obj(ev, path, required=("tick", "occupied"))
        t = _int(ev["tick"], f"{path}.tick", nonneg=True)
        if t <= last:
            _fail(f"{path}.tick", "ticks must be strictly increasing")
        if not isinstance(ev["occupied"], bool):
            _fail(f"{path}.occupied", "expected true or false")
        events.append((t, ev["occupied"]))
        last = t

    app = doc.get("app_spec", {})
    _obj(app, "app_spec", optional=("max_reaction_delay", "presence_setting", "absence_setting"))
    kw = {}
    if "max_reaction_delay" in app:
        kw["max_reaction_delay"] = _num(app["max_reaction_delay"], "app_spec.max_reaction_delay",
                                        positive=True)
    for key, allowed in (("presence_setting", "on"), ("absence_setting", "off")):
        if key in app:
            if app[key] != allowed:
                _fail(f"app_spec.{key}", f"expected {allowed!r}")
            kw[key] = allowed
    overrides = doc.get("config", {})
    if not isinstance(overrides, dict):
        _fail("config", "expected an object")
    try:
        apply_overrides(Config(), overrides)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    frozen = tuple(sorted((k, tuple(v) if isinstance(v, list) else v)
                          for k, v in overrides.items()))
    return Scenario(name, tuple(nodes), env, faults, tuple(events), AppSpec(**kw), frozen)


def load_scenario(document) -> Scenario:
    """Parse a scenario from JSON text (or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"<document>: invalid JSON at line {exc.lineno} "
                                f"column {exc.colno}: {exc.msg}") from None
    return parse_scenario(document)


def load_scenario_file(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def benchmark(name: str) -> Scenario:
    """One of the shipped scenarios, see :data:`BENCHMARKS`."""
    if name not in BENCHMARKS:
        raise KeyError(f"unknown benchmark {name!r}")
    text = resources.files("depguard.scenarios").joinpath(f"{name}.json").read_text("utf-8")
    return load_scenario(text)


# -- writer -------------------------------------------------------------------

def _zone_doc(z: InterferenceZone) -> dict:
    return {"center": list(z.center), "radius": z.radius, "extra_noise": z.extra_noise,
            "active_interval": [z.start, z.end]}


def scenario_to_dict(sc: Scenario) -> dict:
    nodes = []
    for n in sc.nodes:
        d = {"id": n.id, "position": list(n.position), "role": n.role.value}
        if n.battery is not None:
            d["battery"] = n.battery
        if n.controls is not None:
            d["controls"] = n.controls.to_dict()
        nodes.append(d)
    env = sc.environment
    faults = []
    for f in sc.fault_schedule:
        d = {"at_tick": f.at_tick, "kind": f.kind.value}
        if f.kind is FaultKind.INTERFERENCE:
            d["zone"] = _zone_doc(f.zone)
        else:
            d["node"] = f.node
        if f.kind is FaultKind.DRAIN_MULTIPLIER:
            d["factor"] = f.factor
        faults.append(d)
    return {
        "name": sc.name,
        "nodes": nodes,
        "environment": {
            "path_loss_exponent": env.path_loss_exponent,
            "reference_loss": env.reference_loss,
            "noise_floor": env.noise_floor,
            "shadowing_sigma": env.shadowing_sigma,
            "interference_zones": [_zone_doc(z) for z in env.interference_zones],
        },
        "fault_schedule": faults,
        "presence_script": [{"tick": t, "occupied": o} for t, o in sc.presence_script],
        "app_spec": {"max_reaction_delay": sc.app_spec.max_reaction_delay,
                     "presence_setting": sc.app_spec.presence_setting,
                     "absence_setting": sc.app_spec.absence_setting},
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sc.overrides},
    }


def dump_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=False) + "\n"
