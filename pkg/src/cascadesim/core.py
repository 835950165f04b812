"""Domain model for multi-device cascade inference serving.

A fleet of edge devices runs a light classifier locally and forwards its
low-confidence samples to a shared server, which batches them through a
heavier model.  This module holds the value types shared by the rest of the
package (device and server profiles, the SLO reporting policy) plus the
closed-form load analytics: aggregate arrival rate of forwarded requests,
attainable server throughput at a given batch size, and the
under/over-utilisation classification that frames the congestion problem.

Latencies are stored in milliseconds everywhere; rate computations convert
to seconds in exactly one place (``_MS_PER_S``).

All types are immutable after construction and all operations are pure, so
they are safe to share across any number of concurrently running
simulation instances.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

_MS_PER_S = 1000.0

#: Batch sizes the server may dispatch.
ALLOWED_BATCH_SIZES: tuple[int, ...] = (1, 2, 4, 8, 16, 32, 64)

#: Fraction of the batch-1 latency charged per extra sample when a server
#: profile carries a single latency anchor.
DEFAULT_MARGINAL_COST_FRACTION = 0.05


class ValidationError(ValueError):
    """A profile, config or operation input violated its contract."""


class SimulationError(RuntimeError):
    """An actor broke a simulation invariant (indicates a bug, not bad input)."""


class CongestionState(enum.Enum):
    UNDERUTILIZED = "underutilized"
    EQUILIBRIUM = "equilibrium"
    OVERLOADED = "overloaded"


# Tiers are plain string labels; uniqueness within a scenario is enforced at
# config validation time.
TierId = str


@dataclass(frozen=True)
class DeviceProfile:
    """Static description of one edge device."""

    device_id: str
    tier: TierId
    t_inf_ms: float          # on-device per-sample inference latency
    slo_ms: float            # end-to-end latency objective
    sr_target: float         # target SLO satisfaction rate, percentage points
    n_samples: int
    trace_source: str = "generated"

    def __post_init__(self) -> None:
        if self.t_inf_ms <= 0:
            raise ValidationError(
                f"device {self.device_id!r}: t_inf_ms must be > 0, got {self.t_inf_ms}")
        if self.slo_ms <= 0:
            raise ValidationError(
                f"device {self.device_id!r}: slo_ms must be > 0, got {self.slo_ms}")
        if not 0.0 <= self.sr_target <= 100.0:
            raise ValidationError(
                f"device {self.device_id!r}: sr_target must be in [0, 100], got {self.sr_target}")
        if self.n_samples < 0:
            raise ValidationError(
                f"device {self.device_id!r}: n_samples must be >= 0, got {self.n_samples}")


@dataclass(frozen=True)
class ServerModelProfile:
    """Latency/accuracy profile of one server-hosted model.

    ``latency_anchors`` are measured (batch_size, batch_latency_ms) points.
    Latency between anchors is linearly interpolated in batch size; beyond
    the last anchor the last segment's slope is extrapolated; with a single
    anchor the per-sample marginal cost rule applies.
    """

    model_id: str
    accuracy: float
    latency_anchors: tuple[tuple[int, float], ...]
    max_batch: int = 64
    marginal_cost_ms: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError(
                f"model {self.model_id!r}: accuracy must be in [0, 1], got {self.accuracy}")
        if not self.latency_anchors:
            raise ValidationError(f"model {self.model_id!r}: needs at least one latency anchor")
        for b, lat in self.latency_anchors:
            if b not in ALLOWED_BATCH_SIZES:
                raise ValidationError(
                    f"model {self.model_id!r}: anchor batch {b} not in allowed set "
                    f"{ALLOWED_BATCH_SIZES}")
            if lat <= 0:
                raise ValidationError(
                    f"model {self.model_id!r}: anchor latency must be > 0, got {lat}")
        batches = [b for b, _ in self.latency_anchors]
        lats = [lat for _, lat in self.latency_anchors]
        if any(b2 <= b1 for b1, b2 in zip(batches, batches[1:])):
            raise ValidationError(
                f"model {self.model_id!r}: anchor batch sizes must be strictly increasing")
        if any(l2 < l1 for l1, l2 in zip(lats, lats[1:])):
            raise ValidationError(
                f"model {self.model_id!r}: anchor latencies must be non-decreasing")
        if self.max_batch not in ALLOWED_BATCH_SIZES:
            raise ValidationError(
                f"model {self.model_id!r}: max_batch {self.max_batch} not in allowed set")
        if self.marginal_cost_ms is not None and self.marginal_cost_ms < 0:
            raise ValidationError(
                f"model {self.model_id!r}: marginal_cost_ms must be >= 0")
        # Throughput b / latency(b) must be non-decreasing over the usable set.
        prev = 0.0
        for b in ALLOWED_BATCH_SIZES:
            if b > self.max_batch:
                break
            tp = b / batch_latency_ms(self, b)
            if tp < prev - 1e-12:
                raise ValidationError(
                    f"model {self.model_id!r}: throughput decreases at batch {b} "
                    f"({tp * _MS_PER_S:.1f}/s after {prev * _MS_PER_S:.1f}/s)")
            prev = tp


@dataclass(frozen=True)
class SLOPolicy:
    """Window length for satisfaction-rate reporting and the default target."""

    window_s: float = 1.5
    sr_target_default: float = 95.0

    def __post_init__(self) -> None:
        if self.window_s <= 0:
            raise ValidationError(f"window_s must be > 0, got {self.window_s}")
        if not 0.0 <= self.sr_target_default <= 100.0:
            raise ValidationError(
                f"sr_target_default must be in [0, 100], got {self.sr_target_default}")

    @property
    def window_ms(self) -> float:
        return self.window_s * _MS_PER_S


def batch_latency_ms(model: ServerModelProfile, batch: int) -> float:
    """Latency of one batch of the given size, in milliseconds."""
    anchors = model.latency_anchors
    if len(anchors) == 1:
        b1, l1 = anchors[0]
        marginal = (model.marginal_cost_ms if model.marginal_cost_ms is not None
                    else DEFAULT_MARGINAL_COST_FRACTION * l1)
        return l1 + marginal * (batch - b1)
    # Pick the segment containing `batch`; clamp to the outermost segments
    # for extrapolation on either side.
    for (b_lo, l_lo), (b_hi, l_hi) in zip(anchors, anchors[1:]):
        if batch <= b_hi or (b_hi, l_hi) == anchors[-1]:
            slope = (l_hi - l_lo) / (b_hi - b_lo)
            return l_lo + slope * (batch - b_lo)
    raise AssertionError("unreachable")


def arrival_rate(devices: Sequence[tuple[float, float]]) -> float:
    """Aggregate forwarding rate, in requests/second.

    ``devices`` holds (p_casc, t_inf_ms) pairs: each device contributes its
    forwarding probability divided by its per-sample inference latency.
    """
    total = 0.0
    for i, (p_casc, t_inf_ms) in enumerate(devices):
        if not 0.0 <= p_casc <= 1.0:
            raise ValidationError(f"device {i}: p_casc must be in [0, 1], got {p_casc}")
        if t_inf_ms <= 0:
            raise ValidationError(f"device {i}: t_inf_ms must be > 0, got {t_inf_ms}")
        total += p_casc / (t_inf_ms / _MS_PER_S)
    return total


def server_throughput(model: ServerModelProfile, batch: int) -> float:
    """Attainable processing rate at the given batch size, in samples/second."""
    if batch not in ALLOWED_BATCH_SIZES:
        raise ValidationError(
            f"batch {batch} not in allowed set {ALLOWED_BATCH_SIZES}")
    if batch > model.max_batch:
        raise ValidationError(
            f"batch {batch} exceeds max_batch {model.max_batch} of model {model.model_id!r}")
    return batch / (batch_latency_ms(model, batch) / _MS_PER_S)


def classify_congestion(ar: float, t_server: float, tol: float = 0.0) -> CongestionState:
    """Compare arrival rate against server throughput with a relative tolerance."""
    if t_server <= 0:
        raise ValidationError(f"t_server must be > 0, got {t_server}")
    if ar < 0:
        raise ValidationError(f"arrival rate must be >= 0, got {ar}")
    if tol < 0:
        raise ValidationError(f"tolerance must be >= 0, got {tol}")
    if ar > t_server * (1.0 + tol):
        return CongestionState.OVERLOADED
    if ar < t_server * (1.0 - tol):
        return CongestionState.UNDERUTILIZED
    return CongestionState.EQUILIBRIUM


# ---------------------------------------------------------------------------
# Default profiles.
#
# Device-side latencies and all accuracies are measured values for the listed
# models; server batch-64 / batch-16 anchors for InceptionV3/EfficientNetB3
# are derived from their observed saturation throughputs (1000 and ~300
# samples/s).  DeiT ships with a single anchor and the marginal-cost rule.
# ---------------------------------------------------------------------------

#: tier -> (t_inf_ms, light model top-1 accuracy, model name)
DEVICE_TIER_DEFAULTS: Mapping[str, tuple[float, float, str]] = {
    "low": (31.0, 0.7185, "mobilenetv2"),
    "mid": (43.0, 0.7502, "efficientnetlite0"),
    "high": (33.0, 0.7704, "efficientnetb0"),
    "vit": (57.0, 0.7464, "mobilevit_xs"),
}


def default_server_catalog() -> dict[str, ServerModelProfile]:
    return {
        "inceptionv3": ServerModelProfile(
            model_id="inceptionv3",
            accuracy=0.7829,
            latency_anchors=((1, 15.0), (64, 64.0)),
            max_batch=64,
        ),
        "efficientnetb3": ServerModelProfile(
            model_id="efficientnetb3",
            accuracy=0.8149,
            latency_anchors=((1, 25.0), (16, 53.3)),
            max_batch=16,
        ),
        "deit_base_distilled": ServerModelProfile(
            model_id="deit_base_distilled",
            accuracy=0.8341,
            latency_anchors=((1, 14.0),),
            max_batch=64,
        ),
    }
