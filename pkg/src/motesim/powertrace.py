"""Interval sampler: ledger snapshots to per-interval power rows and averages."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .energy import CurrentProfile, EnergestLedger, PowerSample, component_power, total_power


class LedgerRegression(RuntimeError):
    """Cumulative counters moved backwards between two samplings."""


@dataclass(frozen=True)
class TraceRow:
    """Raw tick deltas for one interval plus their power conversion."""

    interval_end_s: float
    cpu_delta: int
    lpm_delta: int
    tx_delta: int
    rx_delta: int
    sample: PowerSample


def take_sample(
    prev: EnergestLedger,
    now: EnergestLedger,
    profile: CurrentProfile,
    interval_s: float,
) -> TraceRow:
    """Difference two settled ledger snapshots and convert to power.

    Each state's power uses the interval as the runtime, so rows are mutually
    independent and a full-interval state yields exactly I * V.
    """
    deltas = {
        "cpu": now.cpu_ticks - prev.cpu_ticks,
        "lpm": now.lpm_ticks - prev.lpm_ticks,
        "tx": now.tx_ticks - prev.tx_ticks,
        "rx": now.rx_ticks - prev.rx_ticks,
    }
    for name, delta in deltas.items():
        if delta < 0:
            raise LedgerRegression(f"{name} counter decreased by {-delta} ticks")
    cpu_mw = component_power(deltas["cpu"], profile.cpu_active_ma, profile.voltage_v,
                             profile.rtimer_hz, interval_s)
    lpm_mw = component_power(deltas["lpm"], profile.lpm_ma, profile.voltage_v,
                             profile.rtimer_hz, interval_s)
    tx_mw = component_power(deltas["tx"], profile.tx_ma, profile.voltage_v,
                            profile.rtimer_hz, interval_s)
    rx_mw = component_power(deltas["rx"], profile.rx_ma, profile.voltage_v,
                            profile.rtimer_hz, interval_s)
    interval_end_s = now.last_cpu_change / profile.rtimer_hz
    sample = PowerSample(interval_end_s, cpu_mw, lpm_mw, tx_mw, rx_mw,
                         total_power(cpu_mw, lpm_mw, tx_mw, rx_mw))
    return TraceRow(interval_end_s, deltas["cpu"], deltas["lpm"], deltas["tx"],
                    deltas["rx"], sample)


def summarize(samples: Sequence[PowerSample]) -> PowerSample:
    """Arithmetic mean of every column; the average total is the mean of the
    row totals, not the sum of the averaged components."""
    if not samples:
        raise ValueError("cannot summarize an empty trace")
    n = len(samples)
    return PowerSample(
        interval_end_s=sum(s.interval_end_s for s in samples) / n,
        cpu_mw=sum(s.cpu_mw for s in samples) / n,
        lpm_mw=sum(s.lpm_mw for s in samples) / n,
        tx_mw=sum(s.tx_mw for s in samples) / n,
        rx_mw=sum(s.rx_mw for s in samples) / n,
        total_mw=sum(s.total_mw for s in samples) / n,
    )
