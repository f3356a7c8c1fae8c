import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depguard.config import Config, apply_overrides
from depguard.evaluation import AppSpec
from depguard.scenario import (BENCHMARKS, benchmark, dump_scenario, load_scenario,
                               load_scenario_file, scenario_to_dict)
from depguard.simulator import Environment, Role, ScenarioError

from conftest import line_doc


def test_minimal_document_fills_defaults():
    sc = load_scenario({"name": "tiny", "nodes": [
        {"id": 1, "position": [0, 0], "role": "presence_sensor"},
        {"id": 2, "position": [5, 0]},
        {"id": 3, "position": [10, 0], "role": "light_actuator"}]})
    assert [n.role for n in sc.nodes] == [Role.PRESENCE_SENSOR, Role.RELAY, Role.LIGHT_ACTUATOR]
    assert sc.environment == Environment()
    assert sc.app_spec == AppSpec()
    assert sc.config == Config()


def error_of(doc):
    with pytest.raises(ScenarioError) as info:
        load_scenario(doc)
    return str(info.value)


def test_duplicate_id_names_the_path():
    doc = line_doc()
    doc["nodes"][2]["id"] = 0
    assert error_of(doc).startswith("nodes[2].id")


def test_unknown_top_level_key_rejected():
    doc = line_doc()
    doc["nodez"] = []
    assert error_of(doc).startswith("nodez")


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["nodes"][1].update(colour="red"), "nodes[1].colour"),
    (lambda d: d["nodes"][1].update(position=[1]), "nodes[1].position"),
    (lambda d: d["nodes"][0].update(role="lamp"), "nodes[0].role"),
    (lambda d: d.update(environment={"path_loss_exponent": 0}), "environment.path_loss_exponent"),
    (lambda d: d.update(environment={"shadowing_sigma": -1}), "environment.shadowing_sigma"),
    (lambda d: d.update(presence_script=[{"tick": 5, "occupied": True},
                                         {"tick": 5, "occupied": False}]), "presence_script[1].tick"),
    (lambda d: d.update(fault_schedule=[{"at_tick": 1, "kind": "node_crash", "node": 9}]),
     "fault_schedule[0].node"),
    (lambda d: d.update(fault_schedule=[{"at_tick": 1, "kind": "drain_multiplier", "node": 1,
                                         "factor": 0.5}]), "fault_schedule[0].factor"),
    (lambda d: d.update(fault_schedule=[{"at_tick": 1, "kind": "meteor"}]), "fault_schedule[0].kind"),
    (lambda d: d.update(fault_schedule=[{"at_tick": 1, "kind": "interference", "zone": {
        "center": [0, 0], "radius": 1, "extra_noise": 1, "active_interval": [9, 3]}}]),
     "fault_schedule[0].zone.active_interval"),
    (lambda d: d["nodes"][1].update(controls={"sleep_fraction": 1.0}), "nodes[1].controls.sleep_fraction"),
    (lambda d: d.update(app_spec={"max_reaction_delay": 0}), "app_spec.max_reaction_delay"),
    (lambda d: d.update(config={"analysis.horizonn": 3}), "config.analysis.horizonn"),
    (lambda d: d.update(config={"analysis.horizon": 2.5}), "config.analysis.horizon"),
    (lambda d: d.update(config={"bounds.tx_power": [1]}), "config.bounds.tx_power"),
    (lambda d: d["nodes"].pop(0), "nodes"),
])
def test_violations_name_their_path(mutate, path):
    doc = line_doc()
    mutate(doc)
    assert error_of(doc).startswith(path)


def test_invalid_json_reports_position():
    assert "line 1" in error_of('{"name": ')


def test_shared_position_rejected():
    doc = line_doc()
    doc["nodes"][1]["position"] = doc["nodes"][0]["position"]
    assert error_of(doc).startswith("nodes[1].position")


@pytest.mark.parametrize("name", BENCHMARKS)
def test_benchmarks_round_trip(name, tmp_path):
    sc = benchmark(name)
    assert sc.name == name
    again = load_scenario(dump_scenario(sc))
    assert again == sc
    path = tmp_path / "s.json"
    path.write_text(dump_scenario(sc), encoding="utf-8")
    assert load_scenario_file(path) == sc


def test_unknown_benchmark():
    with pytest.raises(KeyError):
        benchmark("tsunami")


coord = st.integers(-200, 200).map(float)


@st.composite
def documents(draw):
    n = draw(st.integers(2, 8))
    positions = draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n, unique=True))
    ids = draw(st.lists(st.integers(0, 1000), min_size=n, max_size=n, unique=True))
    nodes = []
    for i, (node_id, pos) in enumerate(zip(ids, positions)):
        role = "presence_sensor" if i == 0 else "light_actuator" if i == 1 else "relay"
        nd = {"id": node_id, "position": list(pos), "role": role}
        if draw(st.booleans()):
            nd["battery"] = draw(st.floats(1, 500))
        if draw(st.booleans()):
            nd["controls"] = {"tx_power": draw(st.floats(-10, 5)),
                              "tx_schedules": draw(st.integers(0, 4)),
                              "active_resources": draw(st.lists(
                                  st.sampled_from(["radio", "sensor", "actuator"]), unique=True))}
        nodes.append(nd)
    ticks = sorted(draw(st.sets(st.integers(0, 500), max_size=6)))
    faults = []
    for _ in range(draw(st.integers(0, 3))):
        kind = draw(st.sampled_from(["node_crash", "drain_multiplier", "interference"]))
        f = {"at_tick": draw(st.integers(0, 300)), "kind": kind}
        if kind == "interference":
            a = draw(st.integers(0, 100))
            f["zone"] = {"center": [draw(coord), draw(coord)], "radius": draw(st.floats(0.5, 50)),
                         "extra_noise": draw(st.floats(0, 20)), "active_interval": [a, a + 10]}
        else:
            f["node"] = draw(st.sampled_from(ids))
        if kind == "drain_multiplier":
            f["factor"] = draw(st.floats(1, 10))
        faults.append(f)
    return {"name": "gen", "nodes": nodes, "fault_schedule": faults,
            "environment": {"shadowing_sigma": draw(st.floats(0, 5))},
            "presence_script": [{"tick": t, "occupied": i % 2 == 0} for i, t in enumerate(ticks)],
            "app_spec": {"max_reaction_delay": draw(st.floats(0.1, 20))},
            "config": draw(st.fixed_dictionaries({}, optional={
                "analysis.horizon": st.integers(1, 500),
                "bounds.round_time": st.tuples(st.floats(0.1, 1), st.floats(1, 5)).map(list),
                "energy.e_tx": st.floats(0, 1)}))}


@settings(max_examples=100, deadline=None)
@given(documents())
def test_accepted_documents_round_trip(doc):
    sc = load_scenario(json.dumps(doc))
    assert load_scenario(dump_scenario(sc)) == sc
    assert load_scenario(scenario_to_dict(sc)) == sc


def test_overrides_apply_and_validate():
    cfg = apply_overrides(Config(), {"analysis.horizon": 7, "bounds.tx_power": [-1, 1],
                                     "energy.e_tx": 1})
    assert cfg.analysis.horizon == 7
    assert cfg.bounds.tx_power == (-1.0, 1.0)
    assert cfg.energy.e_tx == 1.0 and isinstance(cfg.energy.e_tx, float)
    for bad in ({"analysis": 1}, {"nope.x": 1}, {"analysis.horizon": True},
                {"energy.e_tx": "lots"}, {"bounds.tx_schedules": [1.5, 2]}):
        with pytest.raises(ValueError):
            apply_overrides(Config(), bad)
    with pytest.raises(ValueError):
        apply_overrides(Config(), {"bounds.tx_power": [5, -5]})


def test_shipped_benchmarks_match_generator():
    import importlib.util
    from pathlib import Path

    script = Path(__file__).resolve().parents[1] / "scripts" / "make_scenarios.py"
    spec = importlib.util.spec_from_file_location("make_scenarios", script)
    gen = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(gen)
    assert gen.main(["--check"]) == 0
