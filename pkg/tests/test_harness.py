import hashlib
import io
import json

import pytest

from conftest import instant_scenario, sequenced_scenario
from pels import harness
from pels.harness import (
    ConfigError,
    MismatchedStimulus,
    Simulation,
    compare,
    emit_trace,
    load_scenario,
    run,
    sweep,
)


# ------------------------------------------------------------- validation --

def test_load_rejects_bad_mask():
    sc = instant_scenario()
    sc["links"][0]["event_mask"] = "0x100000000"
    with pytest.raises(ConfigError) as exc:
        load_scenario(sc)
    assert "event_mask" in exc.value.location


def test_load_rejects_too_many_links():
    sc = instant_scenario()
    sc["links"] = sc["links"] * 9
    with pytest.raises(ConfigError) as exc:
        load_scenario(sc)
    assert exc.value.location == "links"


def test_load_rejects_program_over_capacity():
    sc = instant_scenario()
    sc["links"][0]["scm_lines"] = 2
    sc["links"][0]["program"] = {"source": "wait 1\nwait 2\nwait 3"}
    with pytest.raises(ConfigError):
        load_scenario(sc)


def test_load_rejects_unknown_peripheral():
    sc = instant_scenario(peripherals=[{"type": "uart", "base_address": 0}])
    with pytest.raises(ConfigError):
        load_scenario(sc)


def test_load_rejects_bad_stimulus_line():
    sc = instant_scenario(stimuli=[[0, 99, 1]])
    with pytest.raises(ConfigError):
        load_scenario(sc)


def test_load_rejects_bad_segment():
    sc = sequenced_scenario()
    sc["links"][0]["segment"] = 1
    with pytest.raises(ConfigError):
        load_scenario(sc)


def test_overlapping_register_blocks_rejected():
    sc = sequenced_scenario()
    sc["peripherals"].append({"type": "regs", "name": "r1",
                              "base_address": "0x40000004", "size_words": 4})
    with pytest.raises(ConfigError):
        Simulation(load_scenario(sc))


def test_assembler_diagnostics_surface_as_config_errors():
    sc = instant_scenario()
    sc["links"][0]["program"] = {"source": "bogus 1"}
    with pytest.raises(ConfigError) as exc:
        load_scenario(sc)
    assert "unknown mnemonic" in str(exc.value)


# ------------------------------------------------------------------- runs --

def test_instant_scenario_latency():
    report = run(instant_scenario())
    lat = report.per_link[0]["latency"]
    assert (lat["min"], lat["max"]) == (2, 2)
    assert report.end_reason == "quiescent"


def test_sequenced_scenario_latency():
    report = run(sequenced_scenario())
    lat = report.per_link[0]["latency"]
    assert (lat["min"], lat["max"]) == (7, 7)


def test_baseline_scenario_latency():
    report = run({
        "clock_limit": 60,
        "baseline": {"event_mask": "0x1"},
        "stimuli": [[0, 0, 1]],
    })
    assert report.baseline["latency"]["samples"] == [16]
    assert report.baseline["shared_memory_fetches"] == 16
    assert report.activity["shared_memory_instruction_fetches"] == 16


def test_scenario_file_program_path(scenario_dir):
    report = run(scenario_dir / "threshold.json")
    assert report.per_link[0]["commands_executed"] == 4
    assert not report.errors


def test_report_self_consistency():
    report = run(sequenced_scenario())
    per_master = report.bus["per_master"]
    total = sum(m["reads"] + m["writes"] for m in per_master.values())
    link_total = sum(e["bus_reads"] + e["bus_writes"] for e in report.per_link)
    assert total == link_total == 2


def test_multi_segment_links_run_in_parallel():
    sc = {
        "clock_limit": 60,
        "bus": {"segments": 2, "transfer_cycles": 2},
        "links": [
            {"scm_lines": 4, "event_mask": "0x1", "base_address": "0x40000000",
             "segment": 0, "program": {"source": "set 0x0, 0x1"}},
            {"scm_lines": 4, "event_mask": "0x1", "base_address": "0x50000000",
             "segment": 1, "program": {"source": "set 0x0, 0x1"}},
        ],
        "peripherals": [
            {"type": "regs", "name": "a", "base_address": "0x40000000", "segment": 0},
            {"type": "regs", "name": "b", "base_address": "0x50000000", "segment": 1},
        ],
        "stimuli": [[0, 0, 1]],
    }
    report = run(sc)
    # no cross-segment contention: both links see the uncontended 7 cycles
    assert report.per_link[0]["latency"]["samples"] == [7]
    assert report.per_link[1]["latency"]["samples"] == [7]


def test_timer_triggered_conversion_chain():
    # periodic timer pulse starts a conversion; the conversion-done pulse
    # triggers a link that captures the fresh sample
    sc = {
        "clock_limit": 40,
        "links": [{"scm_lines": 4, "event_mask": "0x4",
                   "base_address": "0x40000000",
                   "program": {"source": "capture 0x0, 0xffffffff"}}],
        "peripherals": [
            {"type": "sensor", "name": "adc", "base_address": "0x40000000",
             "schedule": [[0, 42]], "event_line": 2, "triggered": True,
             "trigger_line": 3},
            {"type": "timer", "name": "t0", "base_address": "0x40001000",
             "period": 20, "enabled": True, "event_line": 3},
        ],
    }
    sim = Simulation(load_scenario(sc))
    report = sim.run()
    assert sim.links[0].capture_reg == 42
    assert report.per_link[0]["triggers"]["accepted"] == 1
    # pulse at 20 starts the conversion, done pulse lands at 21
    triggers = [r for r in report.trace if r["kind"] == "trigger"]
    assert triggers[0]["t"] == 21


def test_simulation_errors_recorded_not_raised():
    sc = sequenced_scenario(source="write 0x800, 0x1")  # unmapped offset
    report = run(sc)
    assert report.errors and report.errors[0]["link"] == 0
    assert report.per_link[0]["error"]


def test_quiescence_waits_for_pending_work():
    # enabled timer keeps producing events, so the run uses the whole clock
    sc = sequenced_scenario()
    sc["peripherals"].append({"type": "timer", "name": "t0",
                              "base_address": "0x50000000", "period": 25,
                              "enabled": True, "event_line": 5})
    sc["clock_limit"] = 100
    report = run(sc)
    assert report.end_reason == "clock_limit"
    assert report.cycles == 100


def test_run_is_pure_against_scenario_reuse():
    sc = load_scenario(sequenced_scenario())
    r1 = Simulation(sc).run()
    r2 = Simulation(sc).run()
    assert r1.to_json() == r2.to_json()
    t1 = io.StringIO()
    t2 = io.StringIO()
    emit_trace(r1, t1)
    emit_trace(r2, t2)
    assert t1.getvalue() == t2.getvalue()


# ------------------------------------------------------------------ trace --

def test_empty_scenario_trace_is_header_and_quiescence():
    report = run({"clock_limit": 20})
    kinds = [r["kind"] for r in report.trace]
    assert kinds == ["header", "end"]
    assert report.trace[-1]["reason"] == "quiescent"


def test_trace_determinism_digest():
    def digest():
        report = run(instant_scenario())
        sink = io.StringIO()
        emit_trace(report, sink)
        return hashlib.sha256(sink.getvalue().encode()).hexdigest()

    assert digest() == digest()


def test_trace_levels(tmp_path):
    full = run(instant_scenario(), trace_level="full")
    grants = run(sequenced_scenario(), trace_level="grants")
    off = run(instant_scenario(), trace_level="off")
    assert any(r["kind"] == "link" for r in full.trace)
    assert all(r["kind"] in ("header", "bus", "error", "end") for r in grants.trace)
    assert [r["kind"] for r in off.trace] == ["header", "end"]


def test_trace_level_env_override(monkeypatch):
    monkeypatch.setenv("PELS_TRACE_LEVEL", "off")
    report = run(instant_scenario())
    assert [r["kind"] for r in report.trace] == ["header", "end"]


def test_trace_file_output(tmp_path):
    report = run(instant_scenario())
    path = tmp_path / "out.jsonl"
    emit_trace(report, path)
    lines = path.read_text().splitlines()
    assert json.loads(lines[0])["kind"] == "header"
    assert json.loads(lines[-1])["kind"] == "end"


def test_trace_shows_round_robin_grants():
    sc = sequenced_scenario()
    sc["links"] = sc["links"] * 3
    report = run(sc, trace_level="grants")
    grants = [r for r in report.trace if r["kind"] == "bus" and r["event"] == "grant"]
    # same-cycle requests are granted in round-robin order, 2 cycles apart
    assert [g["master"] for g in grants[:3]] == [1, 2, 0]
    times = [g["t"] for g in grants[:3]]
    assert times == [times[0], times[0] + 2, times[0] + 4]


# ---------------------------------------------------------------- compare --

def test_compare_sequenced_ratio(scenario_dir):
    pels = run(sequenced_scenario())
    base = run({
        "clock_limit": 80,
        "peripherals": sequenced_scenario()["peripherals"],
        "baseline": {"event_mask": "0x1"},
        "stimuli": [[0, 0, 1]],
    })
    result = compare(pels, base)
    assert result["latency"]["ratio"] == pytest.approx(16 / 7)


def test_compare_instant_ratio():
    pels = run(instant_scenario())
    base = run({
        "clock_limit": 60,
        "baseline": {"event_mask": "0x1"},
        "stimuli": [[0, 0, 1]],
    })
    result = compare(pels, base)
    assert result["latency"]["ratio"] == pytest.approx(16 / 2)


def test_compare_identical_reports_unity():
    report = run(sequenced_scenario())
    result = compare(report, report)
    assert result["latency"]["ratio"] == 1.0
    assert result["bus_transactions"]["ratio"] == 1.0
    assert result["shared_memory_fetches"]["ratio"] == 1.0


def test_compare_mismatched_stimulus():
    a = run(instant_scenario())
    b = run(instant_scenario(stimuli=[[3, 0, 1]]))
    with pytest.raises(MismatchedStimulus):
        compare(a, b)


def test_compare_wall_clock_annotation():
    # independently clocked sides: 7 cycles at 27 MHz and 16 at 55 MHz
    # both meet a 500 ns latency requirement
    pels = run(sequenced_scenario())
    base = run({
        "clock_limit": 80,
        "peripherals": sequenced_scenario()["peripherals"],
        "baseline": {"event_mask": "0x1"},
        "stimuli": [[0, 0, 1]],
    })
    result = compare(pels, base, pels_mhz=27, baseline_mhz=55)
    wc = result["wall_clock"]
    assert wc["pels_ns"] == pytest.approx(7 / 27e6 * 1e9)
    assert wc["baseline_ns"] == pytest.approx(16 / 55e6 * 1e9)
    assert wc["pels_ns"] < 500 and wc["baseline_ns"] < 500
    assert "wall_clock" not in compare(pels, base)


def test_compare_labels_power_as_not_simulated():
    report = run(instant_scenario())
    result = compare(report, report)
    assert "not simulated" in result["power"]
    assert "power" in report.activity["label"]


# ------------------------------------------------------------------ sweep --

def test_sweep_grid_runs_all_configurations():
    results = sweep(sequenced_scenario(), [1, 2, 3], [4, 6])
    assert len(results) == 6
    assert all(r["ok"] for r in results)
    assert {(r["links"], r["scm_lines"]) for r in results} == {
        (l, s) for l in (1, 2, 3) for s in (4, 6)
    }


def test_sweep_reports_capacity_failures():
    sc = sequenced_scenario(source="wait 1\nwait 2\nwait 3\nwait 4\nwait 5")
    sc["links"][0]["scm_lines"] = 8
    results = sweep(sc, [1], [4, 8])
    by_scm = {r["scm_lines"]: r for r in results}
    assert "error" in by_scm[4]
    assert by_scm[8]["ok"]
