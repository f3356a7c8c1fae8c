import csv
import json

import pytest

from depguard import harness
from depguard.harness import TRACE_COLUMNS, audit_energy, compare, paired_greater, run
from depguard.loop import LoopMode
from depguard.scenario import benchmark, load_scenario

from conftest import line_doc
from oracles import availability_from_trace


@pytest.fixture(scope="module")
def drain_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    report = run(benchmark("battery_drain"), 4, LoopMode.PROACTIVE, 300, out)
    return report, out


def read_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def test_trace_shape_and_encoding(drain_run):
    report, out = drain_run
    raw = (out / "trace.csv").read_bytes()
    assert b"\r" not in raw
    raw.decode("utf-8")
    lines = raw.decode().splitlines()
    assert lines[0].split(",") == list(TRACE_COLUMNS)
    assert len(lines) == 300 * 10 + 1
    rows = read_rows(out / "trace.csv")
    assert {r["tick"] for r in rows} == {str(t) for t in range(1, 301)}
    for r in rows:
        assert r["app_label"] in ("Normal", "Failure")
        assert (r["violated_dimension"] == "") == (r["app_label"] == "Normal")
        assert r["reachable"] in ("0", "1") and r["intervention_flag"] in ("0", "1")
        n = len(r["prediction_fault_type"].split(";")) if r["prediction_fault_type"] else 0
        assert n == (len(r["prediction_t_min"].split(";")) if r["prediction_t_min"] else 0)


def test_summary_mirrors_report_and_trace(drain_run):
    report, out = drain_run
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["scenario"] == "battery_drain" and summary["seed"] == 4
    assert summary["mode"] == "proactive" and summary["ticks"] == 300
    assert summary["trace"] == "trace.csv" and summary["energy"] == "energy.csv"
    assert set(summary) >= {"metrics", "policy", "thresholds", "config"}
    assert summary["metrics"] == json.loads(json.dumps(harness._json_safe(report.metrics)))
    avail, mtbf = availability_from_trace(read_rows(out / "trace.csv"))
    assert summary["metrics"]["availability"] == avail
    expected_mtbf = "inf" if mtbf == float("inf") else mtbf
    assert summary["metrics"]["mtbf"] == expected_mtbf


def test_echoed_config_reproduces_the_run(drain_run, tmp_path):
    report, out = drain_run
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    again = run(load_scenario(summary["config"]["scenario"]), 4, LoopMode.PROACTIVE, 300, tmp_path)
    assert again.metrics == report.metrics
    assert (tmp_path / "trace.csv").read_bytes() == (out / "trace.csv").read_bytes()


def test_energy_ledger_audits_clean(drain_run):
    report, out = drain_run
    assert audit_energy(out / "energy.csv", benchmark("battery_drain").config.energy) == []


def test_energy_audit_catches_tampering(drain_run, tmp_path):
    _, out = drain_run
    rows = read_rows(out / "energy.csv")
    rows[50]["battery_after"] = repr(float(rows[50]["battery_after"]) - 1e-6)
    path = tmp_path / "energy.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    problems = audit_energy(path, benchmark("battery_drain").config.energy)
    assert problems and "expected" in problems[0]


def test_run_without_output_dir_and_bad_ticks():
    report = run(load_scenario(line_doc()), 0, LoopMode.REACTIVE, 20)
    assert report.trace_path is None and report.metrics["ticks_total"] == 20
    with pytest.raises(ValueError):
        run(load_scenario(line_doc()), 0, LoopMode.REACTIVE, 0)


def test_compare_needs_two_seeds():
    with pytest.raises(ValueError):
        compare(load_scenario(line_doc()), [1], 10)


def test_compare_is_deterministic_and_complete(tmp_path):
    sc = load_scenario(line_doc())
    a = compare(sc, [1, 2, 3], 60, tmp_path / "a")
    b = compare(sc, [1, 2, 3], 60, tmp_path / "b")
    assert a == b
    assert (tmp_path / "a" / "comparison.json").read_bytes() == \
           (tmp_path / "b" / "comparison.json").read_bytes()
    assert set(a["modes"]) == {"proactive", "reactive", "no-adapt"}
    for row in a["modes"].values():
        assert set(row) == {"availability", "mtbf", "manual_interventions",
                            "prediction_precision", "prediction_recall"}
    assert set(a["paired_tests"]) == {"proactive_gt_reactive", "reactive_gt_no_adapt"}
    assert (tmp_path / "a" / "reactive" / "seed_2" / "trace.csv").exists()


def test_compare_parallel_matches_serial():
    sc = load_scenario(line_doc())
    assert compare(sc, [1, 2], 40, workers=2) == compare(sc, [1, 2], 40)


def test_failing_cells_do_not_abort_the_rest(monkeypatch):
    real = harness.run

    def flaky(scenario, seed, mode, ticks, out_dir=None):
        if seed == 2 and mode is LoopMode.REACTIVE:
            raise RuntimeError("disk on fire")
        return real(scenario, seed, mode, ticks, out_dir)

    monkeypatch.setattr(harness, "run", flaky)
    summary = compare(load_scenario(line_doc()), [1, 2, 3], 30)
    assert summary["errors"] == [{"seed": 2, "mode": "reactive",
                                  "error": "RuntimeError: disk on fire"}]
    assert summary["modes"]["reactive"]["availability"]["n"] == 2
    assert summary["modes"]["proactive"]["availability"]["n"] == 3
    assert len(summary["availability"]["proactive"]) == 2  # paired on common seeds only


def test_paired_greater():
    assert paired_greater([2, 2, 2], [1, 1, 1]) == {"mean_difference": 1, "p_value": 0.0,
                                                    "significant": True}
    assert not paired_greater([1, 1], [1, 1])["significant"]
    res = paired_greater([0.9, 0.95, 0.97, 0.99], [0.8, 0.9, 0.85, 0.9])
    assert res["significant"] and 0 < res["p_value"] < 0.05
