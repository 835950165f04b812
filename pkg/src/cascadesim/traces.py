"""Synthetic confidence/correctness traces and offline calibrations.

Real model executions are replaced by per-sample traces: each record carries
the light model's confidence score (gap between the two largest softmax
probabilities) plus correctness bits for the light model and for every
server model in the scenario.  Traces are either generated from a
parametric family or loaded from CSV files.

The calibration half of the module reproduces what is normally done on a
held-out calibration set before deployment: sweeping the decision threshold
to get forwarding-fraction and cascade-accuracy curves, picking the static
baseline threshold (30%-forwarding rule with a 1-pp accuracy guard), and
deriving the lower/upper threshold limits used by the model-switching rule.

Generation and calibration are pure functions of (spec, seed); independent
seeds may run concurrently without coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .core import ValidationError

#: Threshold grid resolution for all calibrations.
GRID_STEP = 0.001

#: Default confidence-distribution shapes: correct predictions sit high,
#: incorrect ones spread low with a heavy confident-but-wrong tail.
DEFAULT_BVSB_CORRECT_SHAPE = (8.0, 2.0)
DEFAULT_BVSB_INCORRECT_SHAPE = (1.2, 0.5)

#: Default fraction of the light model's correct answers the heavy model
#: retains; heavy_given_light_wrong is then pinned by the heavy marginal.
DEFAULT_HEAVY_GIVEN_LIGHT_RIGHT = 0.95

DEFAULT_Q_LOW = 0.05
DEFAULT_Q_HIGH = 0.85


class CalibrationError(ValidationError):
    """A calibration rule could not produce consistent limits."""


class TraceParseError(ValidationError):
    """A trace file failed validation; message carries the line number."""


@dataclass(frozen=True)
class TraceRecord:
    sample_id: int
    bvsb: float
    light_correct: bool
    heavy_correct: Mapping[str, bool]


class Trace(Sequence[TraceRecord]):
    """Array-backed sample trace.

    Behaves as a sequence of :class:`TraceRecord`; simulation actors read
    the underlying numpy arrays directly for speed.
    """

    __slots__ = ("bvsb", "light_correct", "heavy_correct")

    def __init__(self, bvsb: np.ndarray, light_correct: np.ndarray,
                 heavy_correct: dict[str, np.ndarray]):
        n = len(bvsb)
        if len(light_correct) != n or any(len(v) != n for v in heavy_correct.values()):
            raise ValidationError("trace arrays must have equal length")
        if n and (bvsb.min() < 0.0 or bvsb.max() > 1.0):
            raise ValidationError("bvsb values must lie in [0, 1]")
        self.bvsb = np.asarray(bvsb, dtype=np.float64)
        self.light_correct = np.asarray(light_correct, dtype=bool)
        self.heavy_correct = {m: np.asarray(v, dtype=bool) for m, v in heavy_correct.items()}

    @property
    def models(self) -> tuple[str, ...]:
        return tuple(self.heavy_correct)

    def __len__(self) -> int:
        return len(self.bvsb)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return TraceRecord(
            sample_id=i,
            bvsb=float(self.bvsb[i]),
            light_correct=bool(self.light_correct[i]),
            heavy_correct={m: bool(v[i]) for m, v in self.heavy_correct.items()},
        )

    def __iter__(self) -> Iterator[TraceRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.models == other.models
                and np.array_equal(self.bvsb, other.bvsb)
                and np.array_equal(self.light_correct, other.light_correct)
                and all(np.array_equal(self.heavy_correct[m], other.heavy_correct[m])
                        for m in self.models))


@dataclass(frozen=True)
class TraceGenSpec:
    """Parametric family for synthetic traces.

    ``heavy_given_light_wrong`` gives, per server model, the probability the
    heavy model is right when the light one is wrong; the complementary
    conditional is implied by the heavy marginal and must land in [0, 1].
    """

    light_accuracy: float
    heavy_accuracy: Mapping[str, float]
    bvsb_correct_shape: tuple[float, float] = DEFAULT_BVSB_CORRECT_SHAPE
    bvsb_incorrect_shape: tuple[float, float] = DEFAULT_BVSB_INCORRECT_SHAPE
    heavy_given_light_wrong: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.light_accuracy <= 1.0:
            raise ValidationError(f"light_accuracy must be in [0, 1], got {self.light_accuracy}")
        for shape_name in ("bvsb_correct_shape", "bvsb_incorrect_shape"):
            a, b = getattr(self, shape_name)
            if a <= 0 or b <= 0:
                raise ValidationError(f"{shape_name} parameters must be > 0, got ({a}, {b})")
        if set(self.heavy_given_light_wrong) != set(self.heavy_accuracy):
            raise ValidationError(
                "heavy_given_light_wrong must cover exactly the models in heavy_accuracy")
        for model in self.heavy_accuracy:
            self.conditionals(model)  # raises if inconsistent

    def conditionals(self, model: str) -> tuple[float, float]:
        """(P(heavy | light wrong), P(heavy | light right)) for one model."""
        acc_h = self.heavy_accuracy[model]
        if not 0.0 <= acc_h <= 1.0:
            raise ValidationError(f"heavy_accuracy[{model!r}] must be in [0, 1], got {acc_h}")
        p_wrong = self.heavy_given_light_wrong[model]
        if not 0.0 <= p_wrong <= 1.0:
            raise ValidationError(
                f"heavy_given_light_wrong[{model!r}] must be in [0, 1], got {p_wrong}")
        acc_l = self.light_accuracy
        if acc_l == 0.0:
            p_right = 0.0
            implied = (1.0 - acc_l) * p_wrong
            if abs(implied - acc_h) > 1e-9:
                raise ValidationError(
                    f"model {model!r}: with light_accuracy 0 the heavy marginal is fixed "
                    f"at heavy_given_light_wrong ({implied:.4f}), got {acc_h}")
        else:
            p_right = (acc_h - (1.0 - acc_l) * p_wrong) / acc_l
            if not -1e-9 <= p_right <= 1.0 + 1e-9:
                raise ValidationError(
                    f"model {model!r}: implied P(heavy correct | light correct) = "
                    f"{p_right:.4f} outside [0, 1]; adjust heavy_given_light_wrong")
            p_right = min(1.0, max(0.0, p_right))
        return p_wrong, p_right


def default_heavy_given_light_wrong(light_accuracy: float, heavy_accuracy: float) -> float:
    """Default conditional so the heavy model keeps ~95% of light's correct answers."""
    if light_accuracy >= 1.0:
        return min(1.0, heavy_accuracy)
    p = (heavy_accuracy - DEFAULT_HEAVY_GIVEN_LIGHT_RIGHT * light_accuracy) / (1.0 - light_accuracy)
    return min(1.0, max(0.0, round(p, 4)))


def default_gen_spec(light_accuracy: float, heavy_accuracy: Mapping[str, float],
                     seed: int = 0,
                     bvsb_correct_shape: tuple[float, float] = DEFAULT_BVSB_CORRECT_SHAPE,
                     bvsb_incorrect_shape: tuple[float, float] = DEFAULT_BVSB_INCORRECT_SHAPE,
                     ) -> TraceGenSpec:
    return TraceGenSpec(
        light_accuracy=light_accuracy,
        heavy_accuracy=dict(heavy_accuracy),
        bvsb_correct_shape=bvsb_correct_shape,
        bvsb_incorrect_shape=bvsb_incorrect_shape,
        heavy_given_light_wrong={
            m: default_heavy_given_light_wrong(light_accuracy, acc)
            for m, acc in heavy_accuracy.items()
        },
        seed=seed,
    )


def compute_bvsb(softmax: Sequence[float]) -> float:
    """Gap between the largest and second-largest softmax probabilities."""
    probs = np.asarray(softmax, dtype=np.float64)
    if probs.size < 2:
        raise ValidationError(f"softmax vector needs at least 2 classes, got {probs.size}")
    if probs.min() < -1e-12 or probs.max() > 1.0 + 1e-12:
        raise ValidationError("softmax entries must lie in [0, 1]")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValidationError(f"softmax vector must sum to 1 (got {total!r})")
    top2 = np.partition(probs, -2)[-2:]
    return float(top2[1] - top2[0])


def generate_trace(spec: TraceGenSpec, n: int) -> Trace:
    """Draw ``n`` records; deterministic given ``spec.seed``."""
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    conditionals = {m: spec.conditionals(m) for m in spec.heavy_accuracy}
    rng = np.random.default_rng(spec.seed)
    light = rng.random(n) < spec.light_accuracy
    bvsb_correct = rng.beta(*spec.bvsb_correct_shape, size=n)
    bvsb_incorrect = rng.beta(*spec.bvsb_incorrect_shape, size=n)
    bvsb = np.where(light, bvsb_correct, bvsb_incorrect)
    heavy: dict[str, np.ndarray] = {}
    for model in spec.heavy_accuracy:
        p_wrong, p_right = conditionals[model]
        u = rng.random(n)
        heavy[model] = u < np.where(light, p_right, p_wrong)
    return Trace(bvsb=bvsb, light_correct=light, heavy_correct=heavy)


# ---------------------------------------------------------------------------
# Trace file format: CSV with header
#   sample_id,bvsb,light_correct,heavy_<model_id>,...
# booleans as 0/1, bvsb as a decimal in [0, 1].
# ---------------------------------------------------------------------------

_HEAVY_PREFIX = "heavy_"


def save_trace(trace: Trace, path: str | Path) -> None:
    path = Path(path)
    models = trace.models
    header = "sample_id,bvsb,light_correct," + ",".join(_HEAVY_PREFIX + m for m in models)
    lines = [header]
    for i in range(len(trace)):
        bits = ",".join(str(int(trace.heavy_correct[m][i])) for m in models)
        lines.append(f"{i},{float(trace.bvsb[i])!r},{int(trace.light_correct[i])},{bits}")
    path.write_text("\n".join(lines) + "\n")


def load_trace(path: str | Path, models: Sequence[str]) -> Trace:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"trace file not found: {path}")
    lines = path.read_text().splitlines()
    if not lines:
        raise TraceParseError(f"{path}: empty trace file")
    header = lines[0].split(",")
    if header[:3] != ["sample_id", "bvsb", "light_correct"]:
        raise TraceParseError(f"{path}, line 1: bad header {lines[0]!r}")
    file_models = [c[len(_HEAVY_PREFIX):] for c in header[3:] if c.startswith(_HEAVY_PREFIX)]
    if len(file_models) != len(header) - 3:
        raise TraceParseError(f"{path}, line 1: non heavy_* column in header")
    for m in models:
        if m not in file_models:
            raise TraceParseError(f"{path}: missing heavy-correct column for model {m!r}")
    n = len(lines) - 1
    bvsb = np.empty(n)
    light = np.empty(n, dtype=bool)
    heavy = {m: np.empty(n, dtype=bool) for m in file_models}
    for i, line in enumerate(lines[1:]):
        lineno = i + 2
        parts = line.split(",")
        if len(parts) != len(header):
            raise TraceParseError(
                f"{path}, line {lineno}: expected {len(header)} fields, got {len(parts)}")
        try:
            value = float(parts[1])
            light_bit = int(parts[2])
            heavy_bits = [int(p) for p in parts[3:]]
        except ValueError as exc:
            raise TraceParseError(f"{path}, line {lineno}: {exc}") from exc
        if not 0.0 <= value <= 1.0:
            raise TraceParseError(
                f"{path}, line {lineno}: bvsb {value} outside [0, 1]")
        if light_bit not in (0, 1) or any(b not in (0, 1) for b in heavy_bits):
            raise TraceParseError(f"{path}, line {lineno}: boolean fields must be 0/1")
        bvsb[i] = value
        light[i] = bool(light_bit)
        for m, b in zip(file_models, heavy_bits):
            heavy[m][i] = bool(b)
    return Trace(bvsb=bvsb, light_correct=light, heavy_correct=heavy)


# ---------------------------------------------------------------------------
# Calibration.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CalibrationCurve:
    """Forwarding fraction and cascade accuracy over a threshold grid."""

    thresholds: np.ndarray                       # ascending grid in [0, 1]
    forward_fraction: np.ndarray                 # per-threshold fraction in [0, 1]
    expected_accuracy: Mapping[str, np.ndarray]  # per server model

    def accuracy_at(self, model: str, threshold: float) -> float:
        idx = int(np.searchsorted(self.thresholds, threshold))
        idx = min(idx, len(self.thresholds) - 1)
        return float(self.expected_accuracy[model][idx])


def threshold_grid(grid_step: float = GRID_STEP) -> np.ndarray:
    if not 0.0 < grid_step <= 1.0:
        raise ValidationError(f"grid_step must be in (0, 1], got {grid_step}")
    n_steps = int(round(1.0 / grid_step))
    return np.round(np.linspace(0.0, 1.0, n_steps + 1), 12)


def calibration_curve(trace: Trace, models: Sequence[str] | None = None,
                      grid_step: float = GRID_STEP) -> CalibrationCurve:
    """Exact empirical curves: a sample is forwarded at threshold c iff bvsb < c."""
    n = len(trace)
    if n == 0:
        raise ValidationError("calibration requires a non-empty trace")
    if models is None:
        models = trace.models
    grid = threshold_grid(grid_step)
    order = np.argsort(trace.bvsb, kind="stable")
    sorted_bvsb = trace.bvsb[order]
    # forwarded(c) = #{bvsb < c}
    fwd_counts = np.searchsorted(sorted_bvsb, grid, side="left")
    forward_fraction = fwd_counts / n
    light_sorted = trace.light_correct[order].astype(np.int64)
    # At threshold c with k = fwd_counts[c]: forwarded samples are the k
    # lowest-confidence ones, so accuracy = (heavy hits among first k) +
    # (light hits among the rest), via prefix sums over the sorted order.
    light_prefix = np.concatenate(([0], np.cumsum(light_sorted)))
    light_total = light_prefix[-1]
    expected = {}
    for m in models:
        heavy_sorted = trace.heavy_correct[m][order].astype(np.int64)
        heavy_prefix = np.concatenate(([0], np.cumsum(heavy_sorted)))
        hits = heavy_prefix[fwd_counts] + (light_total - light_prefix[fwd_counts])
        expected[m] = hits / n
    return CalibrationCurve(thresholds=grid, forward_fraction=forward_fraction,
                            expected_accuracy=expected)


def calibrate_static_threshold(curve: CalibrationCurve, model: str) -> float:
    """Static baseline threshold: ~30% forwarding unless it costs more than 1 pp.

    Picks the smallest grid threshold forwarding at least 30% of samples; if
    that point trails the best achievable cascade accuracy by more than one
    percentage point, returns the smallest threshold within one point of the
    maximum instead.
    """
    fwd = curve.forward_fraction
    acc = curve.expected_accuracy[model]
    reached = np.nonzero(fwd >= 0.30)[0]
    idx30 = int(reached[0]) if reached.size else len(curve.thresholds) - 1
    max_acc = float(acc.max())
    if max_acc - float(acc[idx30]) > 0.01:
        idx = int(np.nonzero(acc >= max_acc - 0.01)[0][0])
    else:
        idx = idx30
    return float(curve.thresholds[idx])


def calibrate_switch_limits(curves: Mapping[str, CalibrationCurve],
                            tier_latency_ms: Mapping[str, float],
                            q_low: float = DEFAULT_Q_LOW,
                            q_high: float = DEFAULT_Q_HIGH,
                            ) -> tuple[float, dict[str, float]]:
    """Threshold limits for the model-switch rule.

    The lower limit comes from the lowest-latency tier's curve at the
    ``q_low`` forwarding quantile; each tier gets its own upper limit at
    ``q_high``.  Returns (c_lower, {tier: c_upper}).
    """
    if not 0.0 < q_low < q_high < 1.0:
        raise ValidationError(
            f"require 0 < q_low < q_high < 1, got q_low={q_low}, q_high={q_high}")
    if set(curves) != set(tier_latency_ms):
        raise ValidationError("curves and tier_latency_ms must cover the same tiers")

    def smallest_at(curve: CalibrationCurve, q: float) -> float:
        hit = np.nonzero(curve.forward_fraction >= q)[0]
        idx = int(hit[0]) if hit.size else len(curve.thresholds) - 1
        return float(curve.thresholds[idx])

    fastest = min(tier_latency_ms, key=lambda t: (tier_latency_ms[t], t))
    c_lower = smallest_at(curves[fastest], q_low)
    c_upper = {tier: smallest_at(curve, q_high) for tier, curve in curves.items()}
    bad = [t for t, cu in c_upper.items() if c_lower > cu]
    if bad:
        raise CalibrationError(
            f"switch limits cross for tiers {sorted(bad)} (c_lower={c_lower:.3f}); "
            f"widen q_low/q_high")
    return c_lower, c_upper


def save_calibration_curve(curve: CalibrationCurve, path: str | Path) -> None:
    """Calibration report in the trace-table style: one row per grid threshold."""
    models = list(curve.expected_accuracy)
    header = "threshold,forward_fraction," + ",".join("accuracy_" + m for m in models)
    lines = [header]
    for i, c in enumerate(curve.thresholds):
        accs = ",".join(f"{curve.expected_accuracy[m][i]:.6f}" for m in models)
        lines.append(f"{c:.3f},{curve.forward_fraction[i]:.6f},{accs}")
    Path(path).write_text("\n".join(lines) + "\n")
