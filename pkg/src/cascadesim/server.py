"""Shared edge-server actor: FIFO queue, dynamic batching, model swapping.

The server drains its request queue with the largest allowed batch that
fits both the current queue length and the deployed model's batch cap.
Batches are non-preemptive: a requested model swap takes effect at the next
batch boundary, and queued requests are retained and served by the new
model.  Results fan out to their devices as soon as the batch completes.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

from .core import (ALLOWED_BATCH_SIZES, ServerModelProfile, SimulationError,
                   ValidationError, batch_latency_ms)
from .engine import Engine, EventKind

log = logging.getLogger(__name__)

#: Dispatch history kept for the batch-size policy signal.
BATCH_HISTORY_LEN = 32


def select_batch(queue_len: int, model: ServerModelProfile) -> int | None:
    """Largest allowed batch size <= min(queue length, model cap); None if empty."""
    if queue_len < 0:
        raise ValidationError(f"queue_len must be >= 0, got {queue_len}")
    limit = min(queue_len, model.max_batch)
    best = None
    for b in ALLOWED_BATCH_SIZES:
        if b > limit:
            break
        best = b
    return best


@dataclass
class BatchJob:
    items: list          # (device, sample_id, enqueue_ms)
    model_id: str
    start_ms: float
    finish_ms: float

    @property
    def batch_size(self) -> int:
        return len(self.items)


class Server:
    def __init__(self, engine: Engine, catalog: dict[str, ServerModelProfile],
                 deployed: str, downlink_ms: float = 0.0,
                 swap_delay_ms: float = 0.0, cooldown_ms: float = 15000.0,
                 metrics=None):
        if deployed not in catalog:
            raise ValidationError(f"deployed model {deployed!r} not in catalog "
                                  f"{sorted(catalog)}")
        self.engine = engine
        self.catalog = catalog
        self.deployed = deployed
        self.downlink_ms = downlink_ms
        self.swap_delay_ms = swap_delay_ms
        self.cooldown_ms = cooldown_ms
        self.metrics = metrics
        self.queue: deque = deque()
        self.busy = False
        self.pending_swap: str | None = None
        self.last_switch_time_ms = -float("inf")
        self.recent_batches: deque[int] = deque(maxlen=BATCH_HISTORY_LEN)
        self.last_batch_size = 0
        self.swaps: list[tuple[float, str, str]] = []
        self.ignored_swaps = 0

    # -- request path ----------------------------------------------------

    def on_arrival(self, payload) -> None:
        device, sample_id = payload
        self.queue.append((device, sample_id, self.engine.now_ms))
        if not self.busy:
            self.dispatch()

    def dispatch(self) -> None:
        b = select_batch(len(self.queue), self.catalog[self.deployed])
        if b is None:
            return
        now = self.engine.now_ms
        items = [self.queue.popleft() for _ in range(b)]
        latency = batch_latency_ms(self.catalog[self.deployed], b)
        job = BatchJob(items=items, model_id=self.deployed,
                       start_ms=now, finish_ms=now + latency)
        self.busy = True
        self.recent_batches.append(b)
        self.last_batch_size = b
        if self.metrics is not None:
            self.metrics.record_dispatch(now, len(self.queue), b)
        self.engine.schedule(job.finish_ms, EventKind.BATCH_COMPLETE,
                             self.on_batch_complete, job, actor="server")

    def on_batch_complete(self, job: BatchJob) -> None:
        now = self.engine.now_ms
        self.busy = False
        for device, sample_id, _enqueue_ms in job.items:
            self.engine.schedule(now + self.downlink_ms, EventKind.RESULT_DELIVERY,
                                 device.on_result, (sample_id, job.model_id),
                                 actor=f"device:{device.device_id}")
        if self.metrics is not None:
            self.metrics.record_completion(now, len(self.queue), job.batch_size)
        if self.pending_swap is not None:
            self._apply_swap(self.pending_swap)
            self.pending_swap = None
            if self.swap_delay_ms > 0:
                return  # dispatch resumes when the swap pause ends
        self.dispatch()

    # -- model swapping ----------------------------------------------------

    def swap_model(self, target: str) -> bool:
        """Request a switch to ``target``; returns True if accepted."""
        if target not in self.catalog:
            raise ValidationError(f"unknown model {target!r}; catalog has "
                                  f"{sorted(self.catalog)}")
        now = self.engine.now_ms
        if target == self.deployed or self.pending_swap is not None:
            return False
        if now - self.last_switch_time_ms < self.cooldown_ms:
            self.ignored_swaps += 1
            log.info("swap to %s at t=%.1f ignored: cooldown active", target, now)
            return False
        if self.busy:
            self.pending_swap = target
        else:
            self._apply_swap(target)
            if self.swap_delay_ms > 0:
                return True
            self.dispatch()
        return True

    def _apply_swap(self, target: str) -> None:
        now = self.engine.now_ms
        self.swaps.append((now, self.deployed, target))
        self.deployed = target
        self.last_switch_time_ms = now
        if self.swap_delay_ms > 0:
            # Model load time modeled as an empty service interval.
            self.busy = True
            self.engine.schedule(now + self.swap_delay_ms, EventKind.BATCH_COMPLETE,
                                 self._on_swap_pause_end, None, actor="server")

    def _on_swap_pause_end(self, _payload) -> None:
        self.busy = False
        self.dispatch()
