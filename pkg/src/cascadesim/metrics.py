"""Run metrics: per-sample accounting, aggregation and report files.

One collector per simulation instance.  Devices push every finished sample
through :meth:`Metrics.record_outcome`; the scheduler samples the shared
time series once per window.  After the run drains, :meth:`Metrics.finalize`
produces a :class:`RunReport` with per-device, per-tier and overall
accuracy/SLO figures plus whole-run system throughput (total outcomes over
the makespan, which ends at the last result delivery).

File formats (consumed by the plotting frontend):

* run report: JSON, sorted keys;
* time series: CSV ``time_ms,active_devices,mean_threshold,running_sr,``
  ``running_accuracy,queue_len,deployed_model,batch_size``;
* sweep table: CSV ``devices,seed_count,metric,mean,min,max``.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .core import SimulationError, ValidationError

DEFAULT_RUNNING_WINDOW_S = 10.0

TIMESERIES_HEADER = ("time_ms,active_devices,mean_threshold,running_sr,"
                     "running_accuracy,queue_len,deployed_model,batch_size")
SWEEP_HEADER = "devices,seed_count,metric,mean,min,max"


def config_digest(canonical: Mapping) -> str:
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class _DeviceCounters:
    __slots__ = ("tier", "n_local", "n_server", "n_slo_met", "n_correct")

    def __init__(self, tier: str):
        self.tier = tier
        self.n_local = 0
        self.n_server = 0
        self.n_slo_met = 0
        self.n_correct = 0

    @property
    def total(self) -> int:
        return self.n_local + self.n_server


@dataclass
class RunReport:
    config_digest: str
    policy: str
    seed: int
    total_samples: int
    system_throughput_sps: float
    makespan_ms: float
    overall: dict
    per_device: dict
    per_tier: dict
    swaps: list
    events_dispatched: int
    events_pending: int
    warnings: list

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "policy": self.policy,
            "seed": self.seed,
            "total_samples": self.total_samples,
            "system_throughput_sps": self.system_throughput_sps,
            "makespan_ms": self.makespan_ms,
            "overall": self.overall,
            "per_device": self.per_device,
            "per_tier": self.per_tier,
            "swaps": self.swaps,
            "events_dispatched": self.events_dispatched,
            "events_pending": self.events_pending,
            "warnings": self.warnings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


class Metrics:
    """Collector bound to one simulation instance."""

    def __init__(self, digest: str = "", policy: str = "", seed: int = 0,
                 running_window_s: float = DEFAULT_RUNNING_WINDOW_S,
                 keep_queue_series: bool = False, keep_outcomes: bool = False):
        self.digest = digest
        self.policy = policy
        self.seed = seed
        self.running_window_ms = running_window_s * 1000.0
        self.devices: dict[str, _DeviceCounters] = {}
        self.makespan_ms = 0.0
        self.timeseries: list[tuple] = []
        self._running: deque[tuple[float, int, int]] = deque()
        self._last_running_sr: float | None = None
        self._last_running_acc: float | None = None
        self._scheduler = None
        self._server = None
        self._engine = None
        self.keep_queue_series = keep_queue_series
        self.queue_series: list[tuple[float, int]] = []
        self.last_queue_len = 0
        self.keep_outcomes = keep_outcomes
        self.outcomes: dict[str, list] = {}

    def bind(self, scheduler=None, server=None, engine=None) -> None:
        self._scheduler = scheduler
        self._server = server
        self._engine = engine

    def register_device(self, device_id: str, tier: str) -> None:
        self.devices[device_id] = _DeviceCounters(tier)

    # -- streaming input ---------------------------------------------------

    def record_outcome(self, device_id: str, outcome, now_ms: float) -> None:
        c = self.devices[device_id]
        if outcome.origin.value == "local":
            c.n_local += 1
        else:
            c.n_server += 1
        if outcome.slo_met:
            c.n_slo_met += 1
        if outcome.correct:
            c.n_correct += 1
        if now_ms > self.makespan_ms:
            self.makespan_ms = now_ms
        self._running.append((now_ms, 1 if outcome.slo_met else 0,
                              1 if outcome.correct else 0))
        if self.keep_outcomes:
            self.outcomes.setdefault(device_id, []).append(outcome)

    def record_dispatch(self, now_ms: float, queue_len: int, batch: int) -> None:
        self.last_queue_len = queue_len
        if self.keep_queue_series:
            self.queue_series.append((now_ms, queue_len))

    def record_completion(self, now_ms: float, queue_len: int, batch: int) -> None:
        self.last_queue_len = queue_len
        if self.keep_queue_series:
            self.queue_series.append((now_ms, queue_len))

    def sample_timeseries(self, now_ms: float) -> None:
        horizon = now_ms - self.running_window_ms
        running = self._running
        while running and running[0][0] < horizon:
            running.popleft()
        if running:
            n = len(running)
            self._last_running_sr = 100.0 * sum(r[1] for r in running) / n
            self._last_running_acc = sum(r[2] for r in running) / n
        active = self._scheduler.active_count() if self._scheduler else 0
        mean_thr = self._scheduler.mean_active_threshold() if self._scheduler else 0.0
        queue_len = len(self._server.queue) if self._server else 0
        deployed = self._server.deployed if self._server else ""
        batch = self._server.last_batch_size if self._server else 0
        self.timeseries.append((now_ms, active, mean_thr, self._last_running_sr,
                                self._last_running_acc, queue_len, deployed, batch))

    # -- finalization --------------------------------------------------------

    def finalize(self, now_ms: float, devices=()) -> RunReport:
        stuck = {d.device_id: sorted(d.outstanding) for d in devices if d.outstanding}
        if stuck:
            raise SimulationError(f"outstanding results at finalize: {stuck}")
        report_warnings: list[str] = []
        per_device: dict[str, dict] = {}
        tier_acc: dict[str, dict] = {}
        total = correct = met = 0
        for device_id in sorted(self.devices):
            c = self.devices[device_id]
            if c.total == 0:
                msg = f"device {device_id!r} finished with no outcomes; excluded from averages"
                warnings.warn(msg)
                report_warnings.append(msg)
                per_device[device_id] = {"tier": c.tier, "samples": 0,
                                         "local": 0, "server": 0,
                                         "accuracy": None, "slo_satisfaction": None}
                continue
            per_device[device_id] = {
                "tier": c.tier,
                "samples": c.total,
                "local": c.n_local,
                "server": c.n_server,
                "accuracy": c.n_correct / c.total,
                "slo_satisfaction": 100.0 * c.n_slo_met / c.total,
            }
            t = tier_acc.setdefault(c.tier, {"devices": 0, "samples": 0,
                                             "correct": 0, "met": 0})
            t["devices"] += 1
            t["samples"] += c.total
            t["correct"] += c.n_correct
            t["met"] += c.n_slo_met
            total += c.total
            correct += c.n_correct
            met += c.n_slo_met
        per_tier = {
            tier: {
                "devices": t["devices"],
                "samples": t["samples"],
                "accuracy": t["correct"] / t["samples"],
                "slo_satisfaction": 100.0 * t["met"] / t["samples"],
            }
            for tier, t in sorted(tier_acc.items())
        }
        overall = {
            "accuracy": correct / total if total else None,
            "slo_satisfaction": 100.0 * met / total if total else None,
        }
        makespan = max(self.makespan_ms, now_ms if total == 0 else self.makespan_ms)
        throughput = total / (makespan / 1000.0) if makespan > 0 else 0.0
        return RunReport(
            config_digest=self.digest,
            policy=self.policy,
            seed=self.seed,
            total_samples=total,
            system_throughput_sps=throughput,
            makespan_ms=makespan,
            overall=overall,
            per_device=per_device,
            per_tier=per_tier,
            swaps=[list(s) for s in (self._server.swaps if self._server else [])],
            events_dispatched=self._engine.dispatched if self._engine else 0,
            events_pending=self._engine.pending() if self._engine else 0,
            warnings=report_warnings,
        )

    def timeseries_csv(self) -> str:
        lines = [TIMESERIES_HEADER]
        for (t, active, thr, sr, acc, qlen, deployed, batch) in self.timeseries:
            sr_s = f"{sr:.4f}" if sr is not None else ""
            acc_s = f"{acc:.6f}" if acc is not None else ""
            lines.append(f"{t:.3f},{active},{thr:.6f},{sr_s},{acc_s},"
                         f"{qlen},{deployed},{batch}")
        return "\n".join(lines) + "\n"


def write_run_outputs(report: RunReport, metrics: Metrics, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    (out / "timeseries.csv").write_text(metrics.timeseries_csv())


# ---------------------------------------------------------------------------
# Sweep aggregation.
# ---------------------------------------------------------------------------

#: metric name -> extractor over a RunReport
def _report_metrics(report: RunReport) -> dict[str, float]:
    out = {
        "throughput": report.system_throughput_sps,
        "accuracy": report.overall["accuracy"],
        "slo_satisfaction": report.overall["slo_satisfaction"],
        "makespan_ms": report.makespan_ms,
    }
    for tier, agg in report.per_tier.items():
        out[f"accuracy.{tier}"] = agg["accuracy"]
        out[f"slo_satisfaction.{tier}"] = agg["slo_satisfaction"]
    return out


@dataclass
class SweepReport:
    device_counts: list[int]
    seeds: list[int]
    cells: dict[int, dict[str, tuple[float, float, float]]]  # count -> metric -> (mean, min, max)

    def to_csv(self) -> str:
        lines = [SWEEP_HEADER]
        for count in self.device_counts:
            for metric in sorted(self.cells[count]):
                mean, lo, hi = self.cells[count][metric]
                lines.append(f"{count},{len(self.seeds)},{metric},"
                             f"{mean:.6f},{lo:.6f},{hi:.6f}")
        return "\n".join(lines) + "\n"


def aggregate_sweep(reports: Mapping[tuple[int, int], RunReport]) -> SweepReport:
    counts = sorted({count for count, _ in reports})
    seeds = sorted({seed for _, seed in reports})
    cells: dict[int, dict[str, tuple[float, float, float]]] = {}
    for count in counts:
        per_metric: dict[str, list[float]] = {}
        for seed in seeds:
            report = reports.get((count, seed))
            if report is None:
                raise ValidationError(f"missing sweep cell ({count} devices, seed {seed})")
            for name, value in _report_metrics(report).items():
                if value is not None:
                    per_metric.setdefault(name, []).append(value)
        cells[count] = {
            name: (sum(vals) / len(vals), min(vals), max(vals))
            for name, vals in per_metric.items()
        }
    return SweepReport(device_counts=counts, seeds=seeds, cells=cells)
