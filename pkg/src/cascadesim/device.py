"""Edge-device actor.

Each device walks its trace sequentially: sample k starts local inference
the moment sample k-1 finishes, so generation never blocks on server
replies.  When local confidence falls below the device's current threshold
the sample is forwarded (after the charged local inference) and the device
keeps a record of the outstanding request until the result comes back.

End-to-end latency runs from the start of local inference to the final
result, wherever it was produced.  SLO satisfaction is accumulated in
windows of the configured length and reported to the scheduler at every
window tick while the device is online; results arriving while offline are
still accepted and counted in the window in which they arrive.
"""

from __future__ import annotations

import enum
from typing import NamedTuple, Sequence

import numpy as np

from .core import DeviceProfile, SimulationError
from .engine import Engine, EventKind
from .traces import Trace


class Origin(enum.Enum):
    LOCAL = "local"
    SERVER = "server"


class Decision(enum.Enum):
    KEEP = 0
    FORWARD = 1


class SampleOutcome(NamedTuple):
    sample_id: int
    origin: Origin
    latency_ms: float
    slo_met: bool
    correct: bool


def decide(bvsb: float, threshold: float) -> Decision:
    """Keep the local result iff confidence reaches the threshold."""
    return Decision.KEEP if bvsb >= threshold else Decision.FORWARD


class Device:
    """One simulated device; lives inside a single engine instance."""

    def __init__(self, engine: Engine, metrics, server, scheduler,
                 profile: DeviceProfile, trace: Trace, threshold: float,
                 window_ms: float, uplink_ms: float = 0.0,
                 noise_pct: float = 0.0, noise_rng: np.random.Generator | None = None,
                 offline_schedule: Sequence[tuple[int, float]] = ()):
        if len(trace) < profile.n_samples:
            raise SimulationError(
                f"device {profile.device_id!r}: trace has {len(trace)} records, "
                f"needs {profile.n_samples}")
        self.engine = engine
        self.metrics = metrics
        self.server = server
        self.scheduler = scheduler
        self.profile = profile
        self.device_id = profile.device_id
        self.trace = trace
        self.threshold = threshold
        self.window_ms = window_ms
        self.uplink_ms = uplink_ms
        self.noise_pct = noise_pct
        self.noise_rng = noise_rng
        for idx, duration in offline_schedule:
            if not 0 <= idx <= profile.n_samples:
                raise SimulationError(
                    f"device {profile.device_id!r}: offline index {idx} outside "
                    f"[0, {profile.n_samples}]")
            if duration <= 0:
                raise SimulationError(
                    f"device {profile.device_id!r}: offline duration must be > 0")
        # Entries at index == n_samples can never interrupt generation.
        self.offline_schedule = sorted(
            (e for e in offline_schedule if e[0] < profile.n_samples))
        self._offline_pos = 0
        self.cursor = 0
        self.window_hits = 0
        self.window_total = 0
        self.outstanding: dict[int, float] = {}
        self.online = True
        self.done_generating = profile.n_samples == 0
        self.n_local = 0
        self.n_server = 0
        self._tick_gen = 0
        self._actor = f"device:{profile.device_id}"

    # -- lifecycle -----------------------------------------------------

    @property
    def fully_done(self) -> bool:
        return self.done_generating and not self.outstanding

    def start(self) -> None:
        if self.profile.n_samples > 0:
            dt = self._draw_t_inf()
            self.engine.schedule(dt, EventKind.INFERENCE_COMPLETE,
                                 self._on_inference_complete, (0, 0.0, dt),
                                 actor=self._actor)
        self.engine.schedule(self.window_ms, EventKind.WINDOW_TICK,
                             self._on_window_tick, self._tick_gen, actor=self._actor)

    def _draw_t_inf(self) -> float:
        t = self.profile.t_inf_ms
        if self.noise_pct > 0.0 and self.noise_rng is not None:
            t *= 1.0 + self.noise_pct / 100.0 * (2.0 * self.noise_rng.random() - 1.0)
        return t

    # -- event handlers ------------------------------------------------

    def _on_inference_complete(self, payload) -> None:
        idx, start_ms, dt = payload
        now = self.engine.now_ms
        if self.trace.bvsb[idx] >= self.threshold:
            self._record(idx, Origin.LOCAL, dt, bool(self.trace.light_correct[idx]), now)
        else:
            self.outstanding[idx] = start_ms
            self.engine.schedule(now + self.uplink_ms, EventKind.REQUEST_ARRIVAL,
                                 self.server.on_arrival, (self, idx), actor="server")
        self.cursor = idx + 1
        if self.cursor >= self.profile.n_samples:
            self.done_generating = True
            return
        if self._maybe_go_offline(now):
            return
        self._schedule_next_inference(now)

    def _schedule_next_inference(self, now: float) -> None:
        dt = self._draw_t_inf()
        self.engine.schedule(now + dt, EventKind.INFERENCE_COMPLETE,
                             self._on_inference_complete, (self.cursor, now, dt),
                             actor=self._actor)

    def _maybe_go_offline(self, now: float) -> bool:
        if (self._offline_pos < len(self.offline_schedule)
                and self.offline_schedule[self._offline_pos][0] == self.cursor):
            _, duration = self.offline_schedule[self._offline_pos]
            self._offline_pos += 1
            self.online = False
            self._tick_gen += 1  # pause the window-tick chain
            self.engine.schedule(now, EventKind.DEVICE_OFFLINE, None,
                                 actor=self._actor)
            self.engine.schedule(now + duration, EventKind.DEVICE_ONLINE,
                                 self._on_online, None, actor=self._actor)
            return True
        return False

    def _on_online(self, _payload) -> None:
        now = self.engine.now_ms
        self.online = True
        if self._maybe_go_offline(now):  # back-to-back entries at the same index
            return
        self.engine.schedule(now + self.window_ms, EventKind.WINDOW_TICK,
                             self._on_window_tick, self._tick_gen, actor=self._actor)
        if not self.done_generating:
            self._schedule_next_inference(now)

    def _on_window_tick(self, gen) -> None:
        if gen != self._tick_gen:
            return  # stale tick from before an offline period
        now = self.engine.now_ms
        if self.window_total > 0:
            sr = 100.0 * self.window_hits / self.window_total
            self.window_hits = 0
            self.window_total = 0
            self.scheduler.handle_sr_update(self.device_id, sr, now)
        if not self.fully_done:
            self.engine.schedule(now + self.window_ms, EventKind.WINDOW_TICK,
                                 self._on_window_tick, gen, actor=self._actor)

    def on_result(self, payload) -> None:
        sample_id, model_id = payload
        now = self.engine.now_ms
        start = self.outstanding.pop(sample_id, None)
        if start is None:
            raise SimulationError(
                f"device {self.device_id!r}: result for unknown or already "
                f"delivered sample {sample_id}")
        correct = bool(self.trace.heavy_correct[model_id][sample_id])
        self._record(sample_id, Origin.SERVER, now - start, correct, now)

    def apply_threshold(self, value) -> None:
        # Applied even while offline; affects every decision strictly after now.
        self.threshold = float(value)

    # -- accounting ----------------------------------------------------

    def _record(self, sample_id: int, origin: Origin, latency_ms: float,
                correct: bool, now: float) -> None:
        slo_met = latency_ms <= self.profile.slo_ms
        self.window_total += 1
        if slo_met:
            self.window_hits += 1
        if origin is Origin.LOCAL:
            self.n_local += 1
        else:
            self.n_server += 1
        self.metrics.record_outcome(
            self.device_id,
            SampleOutcome(sample_id, origin, latency_ms, slo_met, correct),
            now)
