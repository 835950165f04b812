"""Server-resident scheduling policies.

Three policies over the same reconfigurable-threshold machinery:

* ``static`` keeps every device at its calibrated threshold.
* ``multitasc`` is the batch-size-step baseline: every window it compares
  the mean recent batch size against an optimal value and steps all
  thresholds up or down by a fixed amount.
* ``multitascpp`` is the continuous controller: each device's window
  satisfaction-rate report moves its threshold proportionally to the error
  against that device's own target, a compounding multiplier accelerates
  recovery from underutilization (with a growth penalty scaled by the
  active device count), and an optional periodic check swaps the deployed
  server model when every device threshold sits outside calibrated limits.

The policy arithmetic lives in pure module-level functions; the
:class:`Scheduler` owns the per-device state table and event wiring.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import ServerModelProfile, ValidationError, batch_latency_ms
from .engine import Engine, EventKind

#: Multiplier growth numerator: m <- m * (1 + MULTIPLIER_GAIN / n_active).
MULTIPLIER_GAIN = 0.1

DEFAULT_SCALING_FACTOR = 0.005
DEFAULT_STEP = 0.05


class PolicyKind(enum.Enum):
    STATIC = "static"
    MULTITASC_STEP = "multitasc"
    MULTITASC_PP = "multitascpp"


@dataclass(frozen=True)
class PolicyConfig:
    kind: PolicyKind
    a: float = DEFAULT_SCALING_FACTOR
    switch_enabled: bool = False
    step: float = DEFAULT_STEP
    optimal_batch: int | None = None        # None -> deployed max_batch / 2
    initial_threshold: float | None = None  # None -> calibrated static value

    def __post_init__(self) -> None:
        if self.a <= 0:
            raise ValidationError(f"scaling factor a must be > 0, got {self.a}")
        if self.kind is PolicyKind.MULTITASC_STEP and self.step <= 0:
            raise ValidationError(f"step must be > 0, got {self.step}")
        if self.initial_threshold is not None and not 0.0 <= self.initial_threshold <= 1.0:
            raise ValidationError(
                f"initial_threshold must be in [0, 1], got {self.initial_threshold}")


@dataclass
class ThresholdState:
    device_id: str
    threshold: float
    tier: str
    sr_target: float
    multiplier: float = 1.0
    last_update_time_ms: float = 0.0
    active: bool = True


@dataclass(frozen=True)
class SwitchLimits:
    c_lower: float
    c_upper: Mapping[str, float]

    def __post_init__(self) -> None:
        if self.c_upper and self.c_lower > min(self.c_upper.values()):
            raise ValidationError(
                f"c_lower ({self.c_lower}) exceeds some tier's c_upper "
                f"({dict(self.c_upper)})")


# ---------------------------------------------------------------------------
# Pure policy arithmetic.
# ---------------------------------------------------------------------------

def continuous_update(sr_target: float, sr_update: float, a: float,
                      threshold: float) -> float:
    """Proportional threshold update; clamping happens after the multiplier."""
    return threshold - a * (sr_target - sr_update)


def apply_multiplier(sr_target: float, sr_update: float, thresh_updated: float,
                     m: float, n: int) -> tuple[float, float]:
    """Scale an upward update by the multiplier; reset it otherwise.

    Returns (final threshold clamped to [0, 1], next multiplier).
    """
    if n < 1:
        raise ValidationError(f"active device count must be >= 1, got {n}")
    if sr_target < sr_update:
        thresh_final = m * thresh_updated
        m_next = m * (1.0 + MULTIPLIER_GAIN / n)
    else:
        thresh_final = thresh_updated
        m_next = 1.0
    return min(1.0, max(0.0, thresh_final)), m_next


def switch_decision(states: Iterable[ThresholdState], limits: SwitchLimits) -> int:
    """-1: switch to a faster model, +1: to a more accurate one, 0: stay.

    -1 fires when some tier's active devices all sit below the lower limit;
    +1 only when every tier's active devices all sit above that tier's upper
    limit.  -1 takes precedence.
    """
    by_tier: dict[str, list[float]] = {}
    for s in states:
        by_tier.setdefault(s.tier, []).append(s.threshold)
    if not by_tier:
        raise ValidationError("switch decision requires at least one active device")
    for tier, thresholds in by_tier.items():
        if tier not in limits.c_upper:
            raise ValidationError(f"no c_upper limit for tier {tier!r}")
        if all(c < limits.c_lower for c in thresholds):
            return -1
    if all(c > limits.c_upper[tier]
           for tier, thresholds in by_tier.items() for c in thresholds):
        return +1
    return 0


def multitasc_step_delta(recent_batches: Iterable[int], optimal_batch: float,
                         step: float) -> float | None:
    """Signed step for the batch-size baseline; None when there is no history."""
    batches = list(recent_batches)
    if not batches:
        return None
    mean = sum(batches) / len(batches)
    if mean > optimal_batch:
        return -step
    if mean < optimal_batch:
        return step
    return 0.0


def switch_target(catalog: Mapping[str, ServerModelProfile], deployed: str,
                  direction: int) -> str | None:
    """Next model one step toward lower latency (-1) or higher accuracy (+1)."""
    if direction == -1:
        lat = lambda m: batch_latency_ms(catalog[m], 1)
        faster = [m for m in catalog if lat(m) < lat(deployed)]
        return max(faster, key=lat) if faster else None
    if direction == +1:
        acc = lambda m: catalog[m].accuracy
        heavier = [m for m in catalog if acc(m) > acc(deployed)]
        return min(heavier, key=acc) if heavier else None
    return None


# ---------------------------------------------------------------------------
# Stateful scheduler actor.
# ---------------------------------------------------------------------------

class Scheduler:
    def __init__(self, engine: Engine, policy: PolicyConfig, window_ms: float,
                 server=None, metrics=None, limits: SwitchLimits | None = None,
                 downlink_ms: float = 0.0):
        if policy.switch_enabled and limits is None:
            raise ValidationError("switch_enabled requires calibrated switch limits")
        self.engine = engine
        self.policy = policy
        self.window_ms = window_ms
        self.server = server
        self.metrics = metrics
        self.limits = limits
        self.downlink_ms = downlink_ms
        self.states: dict[str, ThresholdState] = {}
        self._devices: dict[str, object] = {}
        # One row per delivered update: (time, device, sr_update, threshold, m, n).
        self.update_log: list[tuple[float, str, float, float, float, int]] = []

    # -- registry --------------------------------------------------------

    def register_device(self, device, tier: str, sr_target: float,
                        initial_threshold: float) -> None:
        device_id = device.device_id
        if device_id in self.states:
            raise ValidationError(f"device {device_id!r} registered twice")
        self.states[device_id] = ThresholdState(
            device_id=device_id, threshold=initial_threshold, tier=tier,
            sr_target=sr_target)
        self._devices[device_id] = device

    def start(self) -> None:
        self.engine.schedule(self.window_ms, EventKind.WINDOW_TICK, self._on_tick,
                             None, actor="scheduler")

    def active_count(self) -> int:
        return sum(1 for s in self.states.values() if s.active)

    def mean_active_threshold(self) -> float:
        pool = [s.threshold for s in self.states.values() if s.active]
        if not pool:
            pool = [s.threshold for s in self.states.values()]
        return sum(pool) / len(pool) if pool else 0.0

    # -- SR updates --------------------------------------------------------

    def handle_sr_update(self, device_id: str, sr_update: float, now_ms: float) -> None:
        state = self.states.get(device_id)
        if state is None:
            raise ValidationError(f"SR update from unregistered device {device_id!r}")
        state.active = True
        state.last_update_time_ms = now_ms
        if self.policy.kind is not PolicyKind.MULTITASC_PP:
            return
        n = self.active_count()
        updated = continuous_update(state.sr_target, sr_update, self.policy.a,
                                    state.threshold)
        final, m_next = apply_multiplier(state.sr_target, sr_update, updated,
                                         state.multiplier, n)
        state.threshold = final
        state.multiplier = m_next
        self._deliver(device_id, final, now_ms)
        self.update_log.append((now_ms, device_id, sr_update, final, m_next, n))

    def _deliver(self, device_id: str, value: float, now_ms: float) -> None:
        self.engine.schedule(now_ms + self.downlink_ms, EventKind.THRESHOLD_DELIVERY,
                             self._devices[device_id].apply_threshold, value,
                             actor=f"device:{device_id}")

    # -- periodic work -----------------------------------------------------

    def mark_inactive(self, now_ms: float) -> None:
        horizon = 2.0 * self.window_ms
        for state in self.states.values():
            if now_ms - state.last_update_time_ms > horizon:
                state.active = False

    def _on_tick(self, _payload) -> None:
        now = self.engine.now_ms
        self.mark_inactive(now)
        if self.policy.kind is PolicyKind.MULTITASC_STEP:
            self._step_update(now)
        elif self.policy.kind is PolicyKind.MULTITASC_PP and self.policy.switch_enabled:
            self.periodic_switch_check(now)
        if self.metrics is not None:
            self.metrics.sample_timeseries(now)
        if any(not d.fully_done for d in self._devices.values()):
            self.engine.schedule(now + self.window_ms, EventKind.WINDOW_TICK,
                                 self._on_tick, None, actor="scheduler")

    def _step_update(self, now: float) -> None:
        optimal = self.policy.optimal_batch
        if optimal is None:
            optimal = self.server.catalog[self.server.deployed].max_batch / 2
        delta = multitasc_step_delta(self.server.recent_batches, optimal,
                                     self.policy.step)
        if delta is None or delta == 0.0:
            return
        for device_id, state in self.states.items():
            state.threshold = min(1.0, max(0.0, state.threshold + delta))
            self._deliver(device_id, state.threshold, now)

    def periodic_switch_check(self, now_ms: float) -> None:
        active = [s for s in self.states.values() if s.active]
        if not active:
            return
        decision = switch_decision(active, self.limits)
        if decision == 0:
            return
        target = switch_target(self.server.catalog, self.server.deployed, decision)
        if target is not None:
            self.server.swap_model(target)
