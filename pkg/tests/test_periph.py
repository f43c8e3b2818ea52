import pytest

from pels.periph import BaselineCpu, BaselineCpuModel, Gpio, Regs, Sensor, Timer


# ------------------------------------------------------------------- gpio --

def test_gpio_out_write_replaces():
    g = Gpio("g", 0x4000_0000)
    g.write(Gpio.OUT, 0b0101, t=0)
    assert g.pins == 0b0101


def test_gpio_toggle_register():
    g = Gpio("g", 0x4000_0000)
    g.write(Gpio.OUT, 0b0101, t=0)
    g.write(Gpio.TGL, 0b0011, t=1)
    assert g.pins == 0b0110


def test_gpio_set_register_then_read():
    g = Gpio("g", 0x4000_0000)
    g.write(Gpio.OUT, 0b0101, t=0)
    g.write(Gpio.SET, 0b1000, t=1)
    assert g.read(Gpio.OUT, t=2) == 0b1101


def test_gpio_clear_register():
    g = Gpio("g", 0x4000_0000)
    g.write(Gpio.OUT, 0b1111, t=0)
    g.write(Gpio.CLR, 0b0101, t=1)
    assert g.pins == 0b1010


def test_gpio_pin_mask():
    g = Gpio("g", 0x4000_0000, pins=4)
    g.write(Gpio.OUT, 0xFF, t=0)
    assert g.pins == 0xF


# ------------------------------------------------------------------ timer --

def run_timer(timer, cycles):
    pulses = []
    for t in range(cycles):
        if timer.tick(t):
            pulses.append(t)
    return pulses


def test_timer_period_10_pulses():
    t = Timer("t", 0x4000_0000, period=10, enabled=True, event_line=0)
    assert run_timer(t, 35) == [10, 20, 30]


def test_timer_disabled_never_pulses():
    t = Timer("t", 0x4000_0000, period=10, enabled=False, event_line=0)
    assert run_timer(t, 50) == []
    assert not t.active()


def test_timer_period_1_pulses_every_cycle():
    t = Timer("t", 0x4000_0000, period=1, enabled=True, event_line=0)
    assert run_timer(t, 6) == [1, 2, 3, 4, 5]


def test_timer_registers():
    t = Timer("t", 0x4000_0000, period=5, enabled=False, event_line=0)
    assert t.read(Timer.CTRL, 0) == 0
    t.write(Timer.CTRL, 1, t=3)  # enable resets and re-arms
    assert t.read(Timer.CTRL, 4) == 1
    pulses = []
    for cyc in range(4, 20):
        if t.tick(cyc):
            pulses.append(cyc)
    assert pulses == [9, 14, 19]  # armed at 4, first match one period later
    t.write(Timer.PERIOD, 7, t=20)
    assert t.read(Timer.PERIOD, 21) == 7


def test_timer_without_event_line_is_silent():
    t = Timer("t", 0x4000_0000, period=3, enabled=True, event_line=None)
    assert run_timer(t, 10) == []
    assert not t.active()


# ----------------------------------------------------------------- sensor --

def test_sensor_schedule_lands_samples():
    s = Sensor("s", 0x4000_0000, schedule=[(5, 100), (9, 200)], event_line=2)
    seen = {}
    for t in range(12):
        pulse = s.tick(t)
        seen[t] = (s.read(Sensor.SAMPLE, t), pulse)
    assert seen[4] == (0, 0)
    assert seen[5] == (100, 1 << 2)       # lands and pulses at its cycle
    assert seen[8] == (100, 0)
    assert seen[9] == (200, 1 << 2)
    assert not s.active()


def test_sensor_no_time_travel():
    s = Sensor("s", 0x4000_0000, schedule=[(10, 77)])
    for t in range(10):
        s.tick(t)
        assert s.read(Sensor.SAMPLE, t) == 0
    s.tick(10)
    assert s.read(Sensor.SAMPLE, 10) == 77


def test_sensor_triggered_mode_latches_on_start():
    s = Sensor("s", 0x4000_0000, schedule=[(0, 5), (20, 9)], triggered=True,
               event_line=1)
    for t in range(40):
        assert s.tick(t) == 0  # no autonomous landings
    assert s.read(Sensor.SAMPLE, 40) == 0
    s.write(Sensor.START, 1, t=25)  # conversion start picks the current value
    assert s.read(Sensor.SAMPLE, 26) == 9


# --------------------------------------------------------------- baseline --

def test_baseline_default_latency_is_16():
    cpu = BaselineCpu(BaselineCpuModel())
    completion = cpu.handle_event(3)
    assert completion == 19
    for t in range(4, 20):
        cpu.step(t)
    assert cpu.latency_samples == [16]
    assert cpu.shared_memory_fetches == 16
    assert cpu.bus_transactions == 2


def test_baseline_degenerate_zero_latency():
    cpu = BaselineCpu(BaselineCpuModel(interrupt_entry_cycles=0, handler_cycles=0))
    assert cpu.handle_event(7) == 7
    cpu.step(7)
    assert cpu.latency_samples == [0]


def test_baseline_latency_has_no_jitter():
    cpu = BaselineCpu(BaselineCpuModel())
    for event in (0, 30, 61, 95):
        cpu.handle_event(event)
    for t in range(0, 130):
        cpu.step(t)
    assert cpu.latency_samples == [16, 16, 16, 16]
    assert cpu.idle


def test_baseline_activity_scales_with_events():
    cpu = BaselineCpu(BaselineCpuModel(memory_fetches_per_handler=16,
                                       peripheral_txns_per_event=2))
    for event in (0, 40):
        cpu.handle_event(event)
    for t in range(0, 60):
        cpu.step(t)
    assert cpu.shared_memory_fetches == 32
    assert cpu.bus_transactions == 4


# --------------------------------------------------------------- validation --

def test_register_block_rejects_unaligned_base():
    with pytest.raises(ValueError):
        Regs("r", 0x4000_0002, 4)


def test_register_block_rejects_empty():
    with pytest.raises(ValueError):
        Regs("r", 0x4000_0000, 0)
