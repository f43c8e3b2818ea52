"""Scenario loading, the global clock loop, reports and comparisons.

A scenario is a JSON document (or an equivalent dict):

    {
      "clock_limit": 200,
      "fabric": {"inputs": 32, "outputs": 32, "loopback": {"0": 5}},
      "bus": {"segments": 1, "transfer_cycles": 2},
      "links": [
        {"scm_lines": 8, "event_mask": "0x1", "trigger_mode": "any",
         "base_address": "0x40000000", "enabled": true, "fifo_depth": 4,
         "segment": 0, "program": "prog.pels" | {"source": "..."}}
      ],
      "peripherals": [
        {"type": "regs",   "name": "r0", "base_address": "0x40000000",
         "size_words": 16, "segment": 0},
        {"type": "gpio",   "name": "g0", "base_address": "0x40001000", "pins": 32},
        {"type": "timer",  "name": "t0", "base_address": "0x40002000",
         "period": 10, "enabled": true, "event_line": 3},
        {"type": "sensor", "name": "s0", "base_address": "0x40003000",
         "schedule": [[5, 100]], "event_line": 2}
      ],
      "baseline": {"interrupt_entry_cycles": 10, "handler_cycles": 6,
                   "memory_fetches_per_handler": 16, "event_mask": "0x4",
                   "peripheral_txns_per_event": 2},
      "stimuli": [[0, 0, 1]]
    }

Stimuli are (cycle, input line, level) settings of held level lines;
peripheral event outputs are one-cycle pulses. Each cycle runs in a
fixed order: stimuli and peripheral ticks settle the input vector, links
step in index order, the baseline model steps, then the bus arbitrates.
A Scenario is immutable run input; every Simulation builds fresh link,
bus and peripheral state, so the trace and report are pure functions of
the scenario.

Within a run, master ids 0..n_links-1 are the links and the baseline
model (when present) takes the next id. The baseline is an accounting
model: it does not contend on the simulated bus; its transaction counts
are reported separately.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .asm import AsmError, Program, assemble_text, validate_against_capacity
from .bus import BusModel
from .core import EventFabric, FsmState, Link, LinkConfig, TriggerMode
from .periph import (
    BaselineCpu,
    BaselineCpuModel,
    Gpio,
    Regs,
    RegisterBlock,
    Sensor,
    Timer,
)

TRACE_LEVELS = ("off", "grants", "full")
TRACE_FORMAT_VERSION = 1

# Record kinds included at the "grants" trace level.
_GRANT_KINDS = frozenset({"header", "bus", "error", "end"})


class ConfigError(Exception):
    """Invalid scenario; `location` names the offending field."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")


class MismatchedStimulus(Exception):
    """compare() was given reports produced from different stimuli."""


@dataclass
class LinkSpec:
    scm_lines: int = 8
    config: LinkConfig = field(default_factory=LinkConfig)
    fifo_depth: int = 4
    segment: int = 0
    program: Program = field(default_factory=lambda: Program(()))


@dataclass
class PeripheralSpec:
    """Declarative peripheral; a fresh block is built for every run."""

    kind: str
    name: str
    base_address: int
    segment: int = 0
    params: dict = field(default_factory=dict)

    def build(self) -> RegisterBlock:
        if self.kind == "gpio":
            return Gpio(self.name, self.base_address, **self.params)
        if self.kind == "regs":
            return Regs(self.name, self.base_address, **self.params)
        if self.kind == "timer":
            return Timer(self.name, self.base_address, **self.params)
        if self.kind == "sensor":
            return Sensor(self.name, self.base_address, **self.params)
        raise ConfigError("peripherals", f"unknown peripheral type {self.kind!r}")


@dataclass
class Scenario:
    clock_limit: int = 10_000
    fabric_inputs: int = 32
    fabric_outputs: int = 32
    loopback: dict[int, int] = field(default_factory=dict)
    bus_segments: int = 1
    transfer_cycles: int = 2
    links: list[LinkSpec] = field(default_factory=list)
    peripherals: list[PeripheralSpec] = field(default_factory=list)
    baseline: Optional[BaselineCpuModel] = None
    stimuli: list[tuple[int, int, int]] = field(default_factory=list)
    source_digest: str = ""

    def stimulus_digest(self) -> str:
        """Digest of everything that generates events: the stimuli plus
        the event-producing peripheral configuration."""
        gens = []
        for p in self.peripherals:
            if p.kind == "timer":
                gens.append(["timer", p.params.get("period", 0),
                             p.params.get("enabled", False),
                             p.params.get("event_line")])
            elif p.kind == "sensor":
                gens.append(["sensor",
                             [list(e) for e in p.params.get("schedule", [])],
                             p.params.get("event_line"),
                             p.params.get("triggered", False)])
        payload = json.dumps(
            {"stimuli": sorted(self.stimuli), "generators": sorted(gens, key=str)},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


def _num(value, location: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(location, "expected a number")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 0)
        except ValueError:
            pass
    raise ConfigError(location, f"expected a number, got {value!r}")


def _load_program(spec, base_dir: Path, location: str, scm_lines: int) -> Program:
    if isinstance(spec, Program):
        prog = spec
    elif isinstance(spec, str):
        path = Path(spec)
        if not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(location, f"program file not found: {path}")
        try:
            prog = assemble_text(path.read_text())
        except AsmError as e:
            raise ConfigError(location, f"{path}: {e}")
    elif isinstance(spec, dict) and "source" in spec:
        try:
            prog = assemble_text(spec["source"])
        except AsmError as e:
            raise ConfigError(location, str(e))
    else:
        raise ConfigError(location, "program must be a path or {'source': ...}")
    try:
        validate_against_capacity(prog, scm_lines)
    except AsmError as e:
        raise ConfigError(location, str(e))
    return prog


_TRIGGER_MODES = {
    "any": TriggerMode.ANY_SELECTED_ACTIVE,
    "all": TriggerMode.ALL_SELECTED_ACTIVE,
}


def load_scenario(source: Union[dict, str, Path],
                  base_dir: Optional[Path] = None) -> Scenario:
    """Build a validated Scenario from a JSON file path or a dict."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(str(source), "scenario file not found")
        except json.JSONDecodeError as e:
            raise ConfigError(str(source), f"invalid JSON: {e}")
        base_dir = path.parent
    else:
        raw = source
        base_dir = Path(base_dir) if base_dir else Path.cwd()
    if not isinstance(raw, dict):
        raise ConfigError("scenario", "top level must be an object")

    sc = Scenario()
    sc.source_digest = hashlib.sha256(
        json.dumps(raw, sort_keys=True, default=str).encode()
    ).hexdigest()
    sc.clock_limit = _num(raw.get("clock_limit", 10_000), "clock_limit")
    if sc.clock_limit < 1:
        raise ConfigError("clock_limit", "must be at least 1")

    fab = raw.get("fabric", {})
    sc.fabric_inputs = _num(fab.get("inputs", 32), "fabric.inputs")
    sc.fabric_outputs = _num(fab.get("outputs", 32), "fabric.outputs")
    if sc.fabric_inputs < 1 or sc.fabric_outputs < 1:
        raise ConfigError("fabric", "needs at least one input and output line")
    for key, val in fab.get("loopback", {}).items():
        out_line = _num(key, "fabric.loopback")
        in_line = _num(val, "fabric.loopback")
        if not 0 <= out_line < sc.fabric_outputs:
            raise ConfigError("fabric.loopback", f"output line {out_line} out of range")
        if not 0 <= in_line < sc.fabric_inputs:
            raise ConfigError("fabric.loopback", f"input line {in_line} out of range")
        sc.loopback[out_line] = in_line

    busraw = raw.get("bus", {})
    sc.bus_segments = _num(busraw.get("segments", 1), "bus.segments")
    sc.transfer_cycles = _num(busraw.get("transfer_cycles", 2), "bus.transfer_cycles")
    if sc.bus_segments < 1:
        raise ConfigError("bus.segments", "must be at least 1")
    if sc.transfer_cycles < 1:
        raise ConfigError("bus.transfer_cycles", "must be at least 1")

    links_raw = raw.get("links", [])
    if len(links_raw) > 8:
        raise ConfigError("links", f"{len(links_raw)} links exceed the supported 8")
    mask_limit = 1 << sc.fabric_inputs
    for i, lr in enumerate(links_raw):
        loc = f"links[{i}]"
        scm_lines = _num(lr.get("scm_lines", 8), f"{loc}.scm_lines")
        if scm_lines < 1:
            raise ConfigError(f"{loc}.scm_lines", "must be positive")
        mask = _num(lr.get("event_mask", 0), f"{loc}.event_mask")
        if not 0 <= mask < mask_limit:
            raise ConfigError(f"{loc}.event_mask",
                              f"mask 0x{mask:x} exceeds {sc.fabric_inputs} input lines")
        mode_name = lr.get("trigger_mode", "any")
        if mode_name not in _TRIGGER_MODES:
            raise ConfigError(f"{loc}.trigger_mode", f"unknown mode {mode_name!r}")
        base = _num(lr.get("base_address", 0), f"{loc}.base_address")
        if base % 4:
            raise ConfigError(f"{loc}.base_address", "must be word aligned")
        fifo_depth = _num(lr.get("fifo_depth", 4), f"{loc}.fifo_depth")
        if not 1 <= fifo_depth <= 16:
            raise ConfigError(f"{loc}.fifo_depth", "must be within 1..16")
        segment = _num(lr.get("segment", 0), f"{loc}.segment")
        if not 0 <= segment < sc.bus_segments:
            raise ConfigError(f"{loc}.segment", f"segment {segment} out of range")
        program = _load_program(lr.get("program", {"source": ""}), base_dir,
                                f"{loc}.program", scm_lines)
        cfg = LinkConfig(
            event_mask=mask,
            trigger_mode=_TRIGGER_MODES[mode_name],
            base_address=base,
            enabled=bool(lr.get("enabled", True)),
        )
        sc.links.append(LinkSpec(scm_lines, cfg, fifo_depth, segment, program))

    for i, pr in enumerate(raw.get("peripherals", [])):
        loc = f"peripherals[{i}]"
        kind = pr.get("type")
        name = pr.get("name", f"{kind}{i}")
        base = _num(pr.get("base_address", 0), f"{loc}.base_address")
        params: dict = {}
        if kind == "gpio":
            params["pins"] = _num(pr.get("pins", 32), f"{loc}.pins")
        elif kind == "regs":
            params["size_words"] = _num(pr.get("size_words", 16), f"{loc}.size_words")
        elif kind == "timer":
            line = pr.get("event_line")
            params["period"] = _num(pr.get("period", 0), f"{loc}.period")
            params["enabled"] = bool(pr.get("enabled", False))
            params["event_line"] = None if line is None else _num(line, loc)
        elif kind == "sensor":
            line = pr.get("event_line")
            trig = pr.get("trigger_line")
            params["schedule"] = [
                (_num(c, loc), _num(v, loc)) for c, v in pr.get("schedule", [])
            ]
            params["event_line"] = None if line is None else _num(line, loc)
            params["triggered"] = bool(pr.get("triggered", False))
            params["trigger_line"] = None if trig is None else _num(trig, loc)
            if params["trigger_line"] is not None and not (
                    0 <= params["trigger_line"] < sc.fabric_inputs):
                raise ConfigError(f"{loc}.trigger_line",
                                  f"line {params['trigger_line']} out of range")
        else:
            raise ConfigError(f"{loc}.type", f"unknown peripheral type {kind!r}")
        event_line = params.get("event_line")
        if event_line is not None and not 0 <= event_line < sc.fabric_inputs:
            raise ConfigError(f"{loc}.event_line", f"line {event_line} out of range")
        segment = _num(pr.get("segment", 0), f"{loc}.segment")
        if not 0 <= segment < sc.bus_segments:
            raise ConfigError(f"{loc}.segment", f"segment {segment} out of range")
        spec = PeripheralSpec(kind, name, base, segment, params)
        try:
            spec.build()  # validate parameters eagerly
        except ValueError as e:
            raise ConfigError(loc, str(e))
        sc.peripherals.append(spec)

    if "baseline" in raw and raw["baseline"] is not None:
        br = raw["baseline"]
        sc.baseline = BaselineCpuModel(
            interrupt_entry_cycles=_num(br.get("interrupt_entry_cycles", 10),
                                        "baseline.interrupt_entry_cycles"),
            handler_cycles=_num(br.get("handler_cycles", 6), "baseline.handler_cycles"),
            memory_fetches_per_handler=_num(br.get("memory_fetches_per_handler", 16),
                                            "baseline.memory_fetches_per_handler"),
            master_id=len(sc.links),
            event_mask=_num(br.get("event_mask", mask_limit - 1),
                            "baseline.event_mask"),
            peripheral_txns_per_event=_num(br.get("peripheral_txns_per_event", 2),
                                           "baseline.peripheral_txns_per_event"),
        )
        if sc.baseline.interrupt_entry_cycles < 0 or sc.baseline.handler_cycles < 0:
            raise ConfigError("baseline", "cycle counts must be non-negative")

    for j, entry in enumerate(raw.get("stimuli", [])):
        loc = f"stimuli[{j}]"
        if len(entry) != 3:
            raise ConfigError(loc, "expected [cycle, line, level]")
        cycle, line, level = (_num(v, loc) for v in entry)
        if cycle < 0:
            raise ConfigError(loc, "cycle must be non-negative")
        if not 0 <= line < sc.fabric_inputs:
            raise ConfigError(loc, f"input line {line} out of range")
        if level not in (0, 1):
            raise ConfigError(loc, "level must be 0 or 1")
        sc.stimuli.append((cycle, line, level))

    return sc


class Trace:
    """Level-filtered, deterministic record accumulator."""

    def __init__(self, level: str = "full"):
        if level not in TRACE_LEVELS:
            raise ConfigError("trace_level", f"unknown level {level!r}")
        self.level = level
        self.records: list[dict] = []

    def emit(self, **record) -> None:
        if self.level == "off" and record.get("kind") not in ("header", "end"):
            return
        if self.level == "grants" and record.get("kind") not in _GRANT_KINDS:
            return
        self.records.append(record)


@dataclass
class SimReport:
    """Aggregate results plus the cycle-stamped trace of one run."""

    scenario_digest: str
    stimulus_digest: str
    cycles: int
    end_reason: str
    per_link: list[dict]
    bus: dict
    baseline: Optional[dict]
    activity: dict
    errors: list[dict]
    trace: list[dict]

    def to_dict(self) -> dict:
        return {
            "scenario_digest": self.scenario_digest,
            "stimulus_digest": self.stimulus_digest,
            "cycles": self.cycles,
            "end_reason": self.end_reason,
            "per_link": self.per_link,
            "bus": self.bus,
            "baseline": self.baseline,
            "activity": self.activity,
            "errors": self.errors,
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _latency_block(samples: list[int]) -> dict:
    if not samples:
        return {"samples": [], "count": 0, "min": None, "max": None,
                "mean": None, "jitter": None}
    return {
        "samples": list(samples),
        "count": len(samples),
        "min": min(samples),
        "max": max(samples),
        "mean": sum(samples) / len(samples),
        "jitter": max(samples) - min(samples),
    }


class Simulation:
    """One scenario bound to fresh fabric/link/bus/peripheral state."""

    def __init__(self, scenario: Scenario, trace_level: Optional[str] = None):
        level = trace_level or os.environ.get("PELS_TRACE_LEVEL", "full")
        self.scenario = scenario
        self.trace = Trace(level)
        self.fabric = EventFabric(scenario.fabric_inputs, scenario.fabric_outputs,
                                  scenario.loopback)
        n_masters = len(scenario.links) + (1 if scenario.baseline else 0)
        self.bus = BusModel(max(n_masters, 1), scenario.bus_segments,
                            scenario.transfer_cycles, trace=self.trace.emit)
        self.blocks: list[RegisterBlock] = []
        for spec in scenario.peripherals:
            block = spec.build()
            self.blocks.append(block)
            try:
                self.bus.segment(spec.segment).attach(block)
            except ValueError as e:
                raise ConfigError(f"peripherals ({spec.name})", str(e))

        self.links: list[Link] = []
        self.link_segments: list[int] = []
        for i, spec in enumerate(scenario.links):
            link = Link(i, spec.config, spec.scm_lines, spec.fifo_depth,
                        master_id=i, trace=self.trace.emit)
            link.load_program(spec.program)
            self.links.append(link)
            self.link_segments.append(spec.segment)

        self.baseline = BaselineCpu(scenario.baseline) if scenario.baseline else None
        self._baseline_cfg = (
            LinkConfig(event_mask=scenario.baseline.event_mask) if scenario.baseline
            else None
        )
        self._stimuli_by_cycle: dict[int, list[tuple[int, int]]] = {}
        for cycle, line, level in scenario.stimuli:
            self._stimuli_by_cycle.setdefault(cycle, []).append((line, level))
        self._last_stimulus = max((c for c, _, _ in scenario.stimuli), default=-1)
        # input-triggered sensors: [block, trigger line, last seen level]
        self._triggered_sensors = [
            [b, b.trigger_line, 0] for b in self.blocks
            if isinstance(b, Sensor) and b.triggered and b.trigger_line is not None
        ]

    def block(self, name: str) -> RegisterBlock:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def _quiescent(self, t: int) -> bool:
        if t < self._last_stimulus:
            return False
        if any(not link.idle for link in self.links):
            return False
        if not self.bus.idle:
            return False
        if self.baseline and not self.baseline.idle:
            return False
        return not any(b.active() for b in self.blocks)

    def run(self) -> SimReport:
        sc = self.scenario
        self.trace.emit(kind="header", version=TRACE_FORMAT_VERSION,
                        scenario_digest=sc.source_digest,
                        stimulus_digest=sc.stimulus_digest(),
                        trace_level=self.trace.level)
        stim_levels = 0
        end_reason = "clock_limit"
        cycles = sc.clock_limit
        last_fabric = (0, 0)
        for t in range(sc.clock_limit):
            for line, level in self._stimuli_by_cycle.get(t, []):
                if level:
                    stim_levels |= 1 << line
                else:
                    stim_levels &= ~(1 << line)
                self.trace.emit(kind="stimulus", t=t, line=line, level=level)

            pulses = 0
            for block in self.blocks:
                pulses |= block.tick(t)
            self.fabric.settle(stim_levels, pulses)

            for entry in self._triggered_sensors:
                sensor, line, last = entry
                level = (self.fabric.inputs >> line) & 1
                if level and not last:
                    sensor.latch(t)  # done pulse arrives with the next tick
                entry[2] = level

            for link, seg in zip(self.links, self.link_segments):
                performed = link.step(t, self.fabric, self.bus.segment(seg))
                self.trace.emit(kind="link", t=t, link=link.link_id,
                                fsm=performed.value, pc=link.pc)

            if self.baseline:
                if self.fabric.rising_trigger(self._baseline_cfg):
                    completion = self.baseline.handle_event(t)
                    self.trace.emit(kind="baseline", t=t, event="irq",
                                    completion=completion)
                for event_cycle, completion in self.baseline.step(t):
                    self.trace.emit(kind="baseline", t=t, event="handled",
                                    latency=completion - event_cycle)

            if (self.fabric.inputs, self.fabric.outputs) != last_fabric:
                last_fabric = (self.fabric.inputs, self.fabric.outputs)
                self.trace.emit(kind="fabric", t=t,
                                inputs=f"0x{self.fabric.inputs:x}",
                                outputs=f"0x{self.fabric.outputs:x}")
            self.bus.step(t)

            if self._quiescent(t):
                end_reason = "quiescent"
                cycles = t + 1
                break

        self.trace.emit(kind="end", t=cycles - 1, reason=end_reason)
        return self._report(cycles, end_reason)

    def _report(self, cycles: int, end_reason: str) -> SimReport:
        sc = self.scenario
        errors: list[dict] = []
        per_link = []
        for link in self.links:
            if link.error:
                errors.append({"link": link.link_id, "detail": link.error_detail})
            pending = len(link.fifo) + (1 if link.state is not FsmState.IDLE else 0)
            per_link.append({
                "link": link.link_id,
                "latency": _latency_block(link.latency_samples),
                "triggers": {
                    "events": link.stats.trigger_events,
                    "accepted": link.stats.triggers_accepted,
                    "dropped": link.stats.triggers_dropped,
                },
                "commands_executed": link.stats.commands_executed,
                "bus_reads": link.stats.bus_reads,
                "bus_writes": link.stats.bus_writes,
                "pending_at_end": pending,
                "error": link.error,
                "error_detail": link.error_detail,
            })

        per_master: dict[str, dict] = {}
        grants = 0
        for seg in self.bus.segments:
            grants += len(seg.grant_log)
            for master in sorted(set(seg.master_reads) | set(seg.master_writes)
                                 | set(seg.grant_waits)):
                entry = per_master.setdefault(
                    str(master), {"reads": 0, "writes": 0, "grant_waits": {}})
                entry["reads"] += seg.master_reads.get(master, 0)
                entry["writes"] += seg.master_writes.get(master, 0)
                for wait, count in sorted(seg.grant_waits.get(master, {}).items()):
                    key = str(wait)
                    entry["grant_waits"][key] = entry["grant_waits"].get(key, 0) + count

        link_bus_txns = sum(l.stats.bus_reads + l.stats.bus_writes for l in self.links)
        baseline_block = None
        baseline_fetches = 0
        baseline_txns = 0
        if self.baseline:
            baseline_fetches = self.baseline.shared_memory_fetches
            baseline_txns = self.baseline.bus_transactions
            baseline_block = {
                "events": self.baseline.events,
                "latency": _latency_block(self.baseline.latency_samples),
                "shared_memory_fetches": baseline_fetches,
                "bus_transactions": baseline_txns,
                "pending_at_end": len(self.baseline.pending),
            }

        return SimReport(
            scenario_digest=sc.source_digest,
            stimulus_digest=sc.stimulus_digest(),
            cycles=cycles,
            end_reason=end_reason,
            per_link=per_link,
            bus={"per_master": per_master, "grants": grants},
            baseline=baseline_block,
            activity={
                "label": "power proxy: activity counts only, power is not simulated",
                "shared_memory_instruction_fetches": baseline_fetches,
                "scm_command_fetches": sum(
                    l.stats.commands_executed for l in self.links),
                "bus_transactions": link_bus_txns + baseline_txns,
            },
            errors=errors,
            trace=self.trace.records,
        )


def run(scenario: Union[Scenario, dict, str, Path],
        trace_level: Optional[str] = None) -> SimReport:
    """Load (if needed) and simulate a scenario to completion."""
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    return Simulation(scenario, trace_level).run()


def _pooled_latency(report: dict) -> Optional[float]:
    samples: list[int] = []
    for entry in report.get("per_link", []):
        samples.extend(entry["latency"]["samples"])
    if not samples and report.get("baseline"):
        samples = list(report["baseline"]["latency"]["samples"])
    if not samples:
        return None
    return sum(samples) / len(samples)


def _ratio(numer: float, denom: float) -> float:
    """Finite activity ratio; equal counts (including 0/0) compare as 1."""
    if numer == denom:
        return 1.0
    return numer / max(denom, 1)


def compare(pels_report: Union[SimReport, dict],
            baseline_report: Union[SimReport, dict],
            pels_mhz: Optional[float] = None,
            baseline_mhz: Optional[float] = None) -> dict:
    """Cycle and activity comparison of two runs of the same stimulus.

    The simulator is frequency-agnostic; pass per-side clock frequencies
    to annotate the cycle counts with wall-clock latencies (iso-latency
    style comparisons at different clocks).
    """
    a = pels_report.to_dict() if isinstance(pels_report, SimReport) else pels_report
    b = (baseline_report.to_dict() if isinstance(baseline_report, SimReport)
         else baseline_report)
    if a["stimulus_digest"] != b["stimulus_digest"]:
        raise MismatchedStimulus(
            f"stimulus digests differ: {a['stimulus_digest'][:12]} vs "
            f"{b['stimulus_digest'][:12]}"
        )
    pels_lat = _pooled_latency(a)
    base_lat = _pooled_latency(b)
    latency_ratio = None
    if pels_lat is not None and pels_lat > 0 and base_lat is not None:
        latency_ratio = base_lat / pels_lat
    pels_fetches = a["activity"]["shared_memory_instruction_fetches"]
    base_fetches = b["activity"]["shared_memory_instruction_fetches"]
    pels_txns = a["activity"]["bus_transactions"]
    base_txns = b["activity"]["bus_transactions"]
    result = {
        "power": "not simulated; activity counts are a power proxy only",
        "stimulus_digest": a["stimulus_digest"],
        "latency": {"pels_mean": pels_lat, "baseline_mean": base_lat,
                    "ratio": latency_ratio},
        "bus_transactions": {"pels": pels_txns, "baseline": base_txns,
                             "ratio": _ratio(base_txns, pels_txns)},
        "shared_memory_fetches": {"pels": pels_fetches, "baseline": base_fetches,
                                  "ratio": _ratio(base_fetches, pels_fetches)},
    }
    if pels_mhz and baseline_mhz:
        result["wall_clock"] = {
            "pels_mhz": pels_mhz,
            "baseline_mhz": baseline_mhz,
            "pels_ns": None if pels_lat is None else pels_lat * 1e3 / pels_mhz,
            "baseline_ns": (None if base_lat is None
                            else base_lat * 1e3 / baseline_mhz),
        }
    return result


def emit_trace(report: SimReport, sink) -> None:
    """Write the trace as JSON Lines; byte-identical across reruns."""
    own = isinstance(sink, (str, Path))
    out = open(sink, "w") if own else sink
    try:
        for record in report.trace:
            out.write(json.dumps(record, separators=(",", ":")) + "\n")
    finally:
        if own:
            out.close()


def sweep(base: Union[Scenario, dict, str, Path],
          link_counts: list[int],
          scm_line_counts: list[int],
          trace_level: str = "off") -> list[dict]:
    """Run the configuration grid of link count x SCM capacity."""
    base_sc = base if isinstance(base, Scenario) else load_scenario(base)
    if not base_sc.links:
        raise ConfigError("links", "sweep needs at least one template link")

    results = []
    for n_links in link_counts:
        for scm_lines in scm_line_counts:
            entry: dict = {"links": n_links, "scm_lines": scm_lines, "ok": False}
            try:
                derived = _derive(base_sc, n_links, scm_lines)
                report = Simulation(derived, trace_level).run()
                samples = [s for e in report.per_link
                           for s in e["latency"]["samples"]]
                entry.update(
                    ok=not report.errors,
                    cycles=report.cycles,
                    end_reason=report.end_reason,
                    accepted=sum(e["triggers"]["accepted"] for e in report.per_link),
                    dropped=sum(e["triggers"]["dropped"] for e in report.per_link),
                    latency_max=max(samples) if samples else None,
                    errors=report.errors,
                )
            except (ConfigError, AsmError) as e:
                entry["error"] = str(e)
            results.append(entry)
    return results


def _derive(base: Scenario, n_links: int, scm_lines: int) -> Scenario:
    if not 1 <= n_links <= 8:
        raise ConfigError("links", f"link count {n_links} outside 1..8")
    links = []
    for i in range(n_links):
        template = base.links[i % len(base.links)]
        validate_against_capacity(template.program, scm_lines)
        links.append(LinkSpec(
            scm_lines=scm_lines,
            config=LinkConfig(
                event_mask=template.config.event_mask,
                trigger_mode=template.config.trigger_mode,
                base_address=template.config.base_address,
                enabled=template.config.enabled,
            ),
            fifo_depth=template.fifo_depth,
            segment=template.segment,
            program=template.program,
        ))
    return Scenario(
        clock_limit=base.clock_limit,
        fabric_inputs=base.fabric_inputs,
        fabric_outputs=base.fabric_outputs,
        loopback=dict(base.loopback),
        bus_segments=base.bus_segments,
        transfer_cycles=base.transfer_cycles,
        links=links,
        peripherals=list(base.peripherals),
        baseline=base.baseline,
        stimuli=list(base.stimuli),
        source_digest=base.source_digest + f":links={n_links}:scm={scm_lines}",
    )
