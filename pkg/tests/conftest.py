import json

import pytest

from depguard.scenario import load_scenario


def line_doc(n=3, spacing=10.0, **extra):
    """A small straight-line network: sensor at one end, actuator at the other."""
    nodes = []
    for i in range(n):
        role = "presence_sensor" if i == 0 else "light_actuator" if i == n - 1 else "relay"
        nodes.append({"id": i, "position": [i * spacing, 0.0], "role": role})
    doc = {"name": "line", "nodes": nodes,
           "presence_script": [{"tick": 3, "occupied": True}, {"tick": 40, "occupied": False}]}
    doc.update(extra)
    return doc


@pytest.fixture
def line_scenario():
    return load_scenario(line_doc())


@pytest.fixture
def make_scenario():
    def build(**kw):
        n = kw.pop("n", 3)
        spacing = kw.pop("spacing", 10.0)
        return load_scenario(json.loads(json.dumps(line_doc(n, spacing, **kw))))
    return build


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
