"""Deterministic discrete-event kernel.

A single virtual clock plus one ordered event queue.  Events are dispatched
in (time, sequence-number) order; the sequence number is assigned at
scheduling time from a global counter, so ties at equal timestamps resolve
in scheduling order and the full dispatch sequence is a pure function of
the actors' behavior.  Time is a float in milliseconds with no quantization.

One engine instance is strictly single-threaded; run as many independent
instances in parallel as you like.
"""

from __future__ import annotations

import enum
import heapq
from typing import Callable, NamedTuple

from .core import SimulationError


class EventKind(enum.IntEnum):
    INFERENCE_COMPLETE = 0
    REQUEST_ARRIVAL = 1
    BATCH_COMPLETE = 2
    RESULT_DELIVERY = 3
    WINDOW_TICK = 4
    THRESHOLD_DELIVERY = 5
    SWITCH_CHECK = 6
    DEVICE_OFFLINE = 7
    DEVICE_ONLINE = 8
    RUN_END = 9


class SimEvent(NamedTuple):
    time_ms: float
    seq: int
    kind: EventKind
    actor: str


Handler = Callable[[object], None]


class Engine:
    """Virtual clock + ordered event queue."""

    __slots__ = ("now_ms", "_heap", "_seq", "dispatched", "_stopped", "event_log")

    def __init__(self, event_log: list[SimEvent] | None = None):
        self.now_ms = 0.0
        self._heap: list[tuple[float, int, EventKind, str, Handler | None, object]] = []
        self._seq = 0
        self.dispatched = 0
        self._stopped = False
        # When not None, one SimEvent is appended per dispatch (replay log).
        self.event_log = event_log

    def schedule(self, time_ms: float, kind: EventKind, handler: Handler | None,
                 payload: object = None, actor: str = "") -> int:
        if time_ms < self.now_ms:
            raise SimulationError(
                f"event {kind.name} scheduled into the past "
                f"({time_ms} < clock {self.now_ms}) by {actor or 'unknown actor'}")
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (time_ms, seq, kind, actor, handler, payload))
        return seq

    def stop(self) -> None:
        """Stop after the current event; used by RUN_END handlers."""
        self._stopped = True

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: float | None = None) -> float:
        """Dispatch events in order until the queue drains, RUN_END fires,
        or the time bound is passed.  Returns the final clock value."""
        heap = self._heap
        log = self.event_log
        self._stopped = False
        while heap and not self._stopped:
            if until is not None and heap[0][0] > until:
                self.now_ms = until
                break
            time_ms, seq, kind, actor, handler, payload = heapq.heappop(heap)
            self.now_ms = time_ms
            self.dispatched += 1
            if log is not None:
                log.append(SimEvent(time_ms, seq, kind, actor))
            if kind == EventKind.RUN_END:
                if handler is not None:
                    handler(payload)
                self._stopped = True
                break
            if handler is not None:
                handler(payload)
        return self.now_ms
