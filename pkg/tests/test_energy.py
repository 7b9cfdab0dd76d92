"""Tick ledger accounting and the power conversion arithmetic."""

import math
import random
from fractions import Fraction

import pytest

from motesim.energy import (
    CpuState,
    CurrentProfile,
    Domain,
    EnergestLedger,
    RadioState,
    battery_power,
    component_power,
    total_power,
)


# ---------------------------------------------------------------------------
# Ledger

def test_new_ledger_is_zeroed_active_off():
    ledger = EnergestLedger()
    assert (ledger.cpu_ticks, ledger.lpm_ticks, ledger.tx_ticks, ledger.rx_ticks) == (0, 0, 0, 0)
    assert ledger.cpu_state is CpuState.ACTIVE
    assert ledger.radio_state is RadioState.OFF


def test_settle_accrues_into_current_states():
    ledger = EnergestLedger()
    ledger.settle(100)
    assert ledger.cpu_ticks == 100
    assert ledger.lpm_ticks == 0
    assert ledger.tx_ticks == 0 and ledger.rx_ticks == 0


def test_cpu_transition_splits_time():
    ledger = EnergestLedger()
    ledger.transition(Domain.CPU, CpuState.LPM, 60)
    ledger.settle(100)
    assert ledger.cpu_ticks == 60
    assert ledger.lpm_ticks == 40
    assert ledger.cpu_ticks + ledger.lpm_ticks == 100


def test_radio_walk_accrues_tx_and_rx():
    ledger = EnergestLedger()
    ledger.transition(Domain.RADIO, RadioState.TX, 10)
    ledger.transition(Domain.RADIO, RadioState.RX, 25)
    ledger.transition(Domain.RADIO, RadioState.OFF, 40)
    ledger.settle(100)
    assert ledger.tx_ticks == 15
    assert ledger.rx_ticks == 15
    assert ledger.cpu_ticks == 100  # radio walk leaves the CPU domain alone


def test_settle_backwards_rejected():
    ledger = EnergestLedger()
    ledger.settle(50)
    with pytest.raises(ValueError):
        ledger.settle(49)
    ledger.settle(50)  # same instant is a no-op


def test_transition_rejects_wrong_state_type():
    ledger = EnergestLedger()
    with pytest.raises(ValueError):
        ledger.transition(Domain.CPU, RadioState.TX, 5)
    with pytest.raises(ValueError):
        ledger.transition(Domain.RADIO, CpuState.LPM, 5)


def test_transition_to_same_state_is_harmless():
    ledger = EnergestLedger()
    ledger.transition(Domain.RADIO, RadioState.OFF, 30)
    ledger.settle(60)
    assert ledger.tx_ticks == 0 and ledger.rx_ticks == 0
    assert ledger.cpu_ticks == 60


def test_snapshot_is_independent_copy():
    ledger = EnergestLedger()
    ledger.settle(10)
    snap = ledger.snapshot()
    ledger.settle(90)
    assert snap.cpu_ticks == 10
    assert ledger.cpu_ticks == 90


def test_random_walk_conserves_every_tick():
    # against a naive per-segment recomputation, over many random walks
    rng = random.Random(20240917)
    for _ in range(200):
        ledger = EnergestLedger()
        now = 0
        cpu_time = {CpuState.ACTIVE: 0, CpuState.LPM: 0}
        radio_time = {RadioState.OFF: 0, RadioState.TX: 0, RadioState.RX: 0}
        cpu, radio = CpuState.ACTIVE, RadioState.OFF
        for _ in range(rng.randint(1, 30)):
            step = rng.randint(0, 50)
            cpu_time[cpu] += step
            radio_time[radio] += step
            now += step
            if rng.random() < 0.5:
                cpu = rng.choice(list(CpuState))
                ledger.transition(Domain.CPU, cpu, now)
            else:
                radio = rng.choice(list(RadioState))
                ledger.transition(Domain.RADIO, radio, now)
        ledger.settle(now)
        assert ledger.cpu_ticks == cpu_time[CpuState.ACTIVE]
        assert ledger.lpm_ticks == cpu_time[CpuState.LPM]
        assert ledger.tx_ticks == radio_time[RadioState.TX]
        assert ledger.rx_ticks == radio_time[RadioState.RX]
        assert ledger.cpu_ticks + ledger.lpm_ticks == now
        assert ledger.tx_ticks + ledger.rx_ticks <= now


# ---------------------------------------------------------------------------
# Current profile

def test_default_profile_matches_platform_datasheet():
    profile = CurrentProfile()
    assert profile.cpu_active_ma == 4.0
    assert profile.tx_ma == 17.4
    assert profile.rx_ma == 18.8
    assert profile.voltage_v == 3.0
    assert profile.rtimer_hz == 32768
    assert 0 < profile.lpm_ma < profile.cpu_active_ma


def test_profile_validation():
    with pytest.raises(ValueError):
        CurrentProfile(cpu_active_ma=-1.0)
    with pytest.raises(ValueError):
        CurrentProfile(voltage_v=0.0)
    with pytest.raises(ValueError):
        CurrentProfile(lpm_ma=5.0)  # LPM draw must undercut the active draw
    with pytest.raises(ValueError):
        CurrentProfile(rtimer_hz=0)


# ---------------------------------------------------------------------------
# Power conversion

def test_component_power_full_interval_is_exact_ixv():
    # the whole interval in one state collapses to I times V exactly
    assert component_power(327680, 17.4, 3.0, 32768, 10.0) == 17.4 * 3.0
    assert component_power(32768, 4.0, 3.0, 32768, 1.0) == 12.0


def test_component_power_zero_ticks_is_zero():
    assert component_power(0, 17.4, 3.0, 32768, 10.0) == 0.0


def test_component_power_known_value():
    # 32768 of 327680 ticks at 4 mA, 3 V: a tenth of 12 mW
    got = component_power(32768, 4.0, 3.0, 32768, 10.0)
    assert math.isclose(got, 1.2, rel_tol=1e-12)


def test_component_power_matches_exact_arithmetic():
    rng = random.Random(424242)
    for _ in range(1000):
        hz = 32768
        runtime = rng.choice([1.0, 2.0, 5.0, 10.0, 60.0, 100.0]) * rng.choice([1, 1, 3])
        total = int(hz * runtime)
        delta = rng.randint(0, total)
        current = rng.uniform(0.01, 25.0)
        voltage = rng.uniform(1.8, 3.6)
        got = component_power(delta, current, voltage, hz, runtime)
        exact = (Fraction(delta) / (Fraction(hz) * Fraction(runtime))
                 * Fraction(current) * Fraction(voltage))
        assert math.isclose(got, float(exact), rel_tol=1e-12)


def test_component_power_is_linear_in_ticks():
    base = component_power(1000, 18.8, 3.0, 32768, 10.0)
    assert math.isclose(component_power(3000, 18.8, 3.0, 32768, 10.0),
                        3 * base, rel_tol=1e-12)


def test_component_power_input_validation():
    with pytest.raises(ValueError):
        component_power(-1, 4.0, 3.0, 32768, 10.0)
    with pytest.raises(ValueError):
        component_power(100, 4.0, 3.0, 32768, 0.0)
    with pytest.raises(ValueError):
        component_power(100, 4.0, 3.0, 0, 10.0)
    with pytest.raises(ValueError):
        # more ticks than the interval holds
        component_power(327681, 4.0, 3.0, 32768, 10.0)


def test_total_power_is_plain_left_to_right_sum():
    rng = random.Random(7)
    for _ in range(200):
        parts = [rng.uniform(0, 2) for _ in range(4)]
        assert total_power(*parts) == ((parts[0] + parts[1]) + parts[2]) + parts[3]


def test_total_power_rejects_negative_component():
    with pytest.raises(ValueError):
        total_power(1.0, -0.1, 0.0, 0.0)


def test_battery_power_product():
    assert battery_power(2.5, 3.0) == 7.5
    assert battery_power(0.0, 3.0) == 0.0
