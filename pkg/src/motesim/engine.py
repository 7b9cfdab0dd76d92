"""Deterministic discrete-event core: virtual tick clock, event queue, run loop."""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable

# RTimer ticks per second on the modeled platform.
RTIMER_HZ = 32768

# Tick counts are plain non-negative ints; 32768 ticks equal one second.
TickTime = int


def seconds_to_ticks(seconds: float) -> TickTime:
    """Convert a duration in seconds to ticks, rounding sub-tick remainders up."""
    if seconds < 0:
        raise ValueError(f"negative duration: {seconds}")
    ticks = seconds * RTIMER_HZ
    whole = int(ticks)
    return whole if whole == ticks else whole + 1


def ticks_to_seconds(ticks: TickTime) -> float:
    return ticks / RTIMER_HZ


@dataclass
class SimEvent:
    """One queued occurrence; dispatch order is (fire_at, seq)."""

    fire_at: TickTime
    target: str = ""
    kind: str = ""
    payload: Any = None
    seq: int = 0
    cancelled: bool = False


@dataclass(frozen=True)
class RunSummary:
    events_dispatched: int
    final_clock: TickTime


class Engine:
    """Single-threaded event loop with a seeded RNG for all stochastic draws."""

    def __init__(self, seed: int = 0):
        self.now: TickTime = 0
        self.rng = random.Random(seed)
        self._heap: list[tuple[TickTime, int, SimEvent]] = []
        self._next_seq = 1
        self._live: dict[int, SimEvent] = {}
        self._handlers: dict[str, Callable[[SimEvent], None]] = {}

    def register(self, target: str, handler: Callable[[SimEvent], None]) -> None:
        self._handlers[target] = handler

    def schedule(self, event: SimEvent) -> int:
        """Enqueue an event; returns an id usable with cancel()."""
        if event.fire_at < self.now:
            raise ValueError(
                f"schedule at tick {event.fire_at} is in the past (now {self.now})"
            )
        seq = self._next_seq
        self._next_seq += 1
        event.seq = seq
        heapq.heappush(self._heap, (event.fire_at, seq, event))
        self._live[seq] = event
        return seq

    def call_at(self, fire_at: TickTime, fn: Callable, *args: Any) -> int:
        """Schedule a plain callback; sugar over schedule()."""
        return self.schedule(SimEvent(fire_at=fire_at, kind="call", payload=(fn, args)))

    def call_in(self, delay_ticks: TickTime, fn: Callable, *args: Any) -> int:
        return self.call_at(self.now + delay_ticks, fn, *args)

    def cancel(self, event_id: int) -> bool:
        """True iff the event existed and had not fired; cancelled events never run."""
        event = self._live.pop(event_id, None)
        if event is None:
            return False
        event.cancelled = True
        return True

    def run(self, until: TickTime) -> RunSummary:
        """Dispatch every event with fire_at <= until in (fire_at, seq) order."""
        if until < self.now:
            raise ValueError(f"run until tick {until} is in the past (now {self.now})")
        dispatched = 0
        while self._heap and self._heap[0][0] <= until:
            fire_at, seq, event = heapq.heappop(self._heap)
            if event.cancelled:
                continue
            del self._live[seq]
            self.now = fire_at
            dispatched += 1
            self._dispatch(event)
        self.now = until
        return RunSummary(dispatched, self.now)

    def pending(self) -> int:
        return len(self._live)

    def _dispatch(self, event: SimEvent) -> None:
        if event.kind == "call":
            fn, args = event.payload
            fn(*args)
            return
        handler = self._handlers.get(event.target)
        if handler is not None:
            handler(event)
