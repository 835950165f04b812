"""Scenario assembly and execution.

Builds one simulation instance per (config, seed): generates or loads the
per-device traces, runs the offline calibrations (static thresholds and
switch limits on per-tier calibration traces), wires the engine, server,
devices and scheduler together, runs to drain and finalizes the report.

RNG discipline: every random stream is derived from the scenario seed plus
a stable (device index, purpose) key, so adding a device never perturbs
another device's draws and sweep cells are mutually independent.
"""

from __future__ import annotations

import dataclasses
import zlib
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import alpha as _alpha_dist

from .config import (ConfigError, DeviceGroup, IntermittentSpec, ScenarioConfig,
                     canonical)
from .core import DeviceProfile, ValidationError
from .device import Device
from .engine import Engine, SimEvent
from .metrics import (Metrics, RunReport, SweepReport, aggregate_sweep,
                      config_digest, write_run_outputs)
from .scheduler import PolicyKind, Scheduler, SwitchLimits
from .server import Server
from .traces import (Trace, TraceGenSpec, calibrate_static_threshold,
                     calibrate_switch_limits, calibration_curve,
                     default_heavy_given_light_wrong, generate_trace, load_trace)

# Purpose codes for child RNG streams.
PURPOSE_TRACE = 0
PURPOSE_NOISE = 1
PURPOSE_INTERMITTENT = 2
PURPOSE_CALIBRATION = 3


def derive_rng(root_seed: int, *key: int | str) -> np.random.Generator:
    ints = [root_seed] + [zlib.crc32(k.encode()) if isinstance(k, str) else int(k)
                          for k in key]
    return np.random.default_rng(np.random.SeedSequence(ints))


def derive_seed(root_seed: int, *key: int | str) -> int:
    ints = [root_seed] + [zlib.crc32(k.encode()) if isinstance(k, str) else int(k)
                          for k in key]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


def gen_spec_for(cfg: ScenarioConfig, group: DeviceGroup, seed: int) -> TraceGenSpec:
    heavy_acc = {m: p.accuracy for m, p in cfg.server.catalog.items()}
    overrides = cfg.traces.heavy_given_light_wrong
    return TraceGenSpec(
        light_accuracy=group.light_accuracy,
        heavy_accuracy=heavy_acc,
        bvsb_correct_shape=cfg.traces.bvsb_correct,
        bvsb_incorrect_shape=cfg.traces.bvsb_incorrect,
        heavy_given_light_wrong={
            m: overrides.get(m, default_heavy_given_light_wrong(group.light_accuracy, acc))
            for m, acc in heavy_acc.items()},
        seed=seed,
    )


def _device_trace(cfg: ScenarioConfig, group: DeviceGroup, device_index: int,
                  base_dir: Path) -> Trace:
    if group.trace_file is not None:
        path = base_dir / group.trace_file.format(index=device_index)
        trace = load_trace(path, models=sorted(cfg.server.catalog))
        if len(trace) < group.n_samples:
            raise ConfigError(
                f"trace file {path} has {len(trace)} records, device needs "
                f"{group.n_samples}")
        return trace
    spec = gen_spec_for(cfg, group, derive_seed(cfg.seed, device_index, PURPOSE_TRACE))
    return generate_trace(spec, group.n_samples)


# ---------------------------------------------------------------------------
# Offline calibration.
# ---------------------------------------------------------------------------

def tier_calibrations(cfg: ScenarioConfig):
    """Per-tier calibration curves plus static thresholds for the deployed model.

    Returns (curves, static_thresholds, switch_limits); limits are computed
    only when the policy has model switching enabled.
    """
    curves = {}
    tier_latency = {}
    for group in cfg.devices:
        if group.tier in curves:
            continue
        spec = gen_spec_for(cfg, group,
                            derive_seed(cfg.seed, group.tier, PURPOSE_CALIBRATION))
        trace = generate_trace(spec, cfg.traces.calibration_samples)
        curves[group.tier] = calibration_curve(trace, sorted(cfg.server.catalog))
        tier_latency[group.tier] = group.t_inf_ms
    static = {tier: calibrate_static_threshold(curve, cfg.server.deployed)
              for tier, curve in curves.items()}
    limits = None
    if cfg.policy.switch_enabled:
        c_lower, c_upper = calibrate_switch_limits(curves, tier_latency,
                                                   q_low=cfg.q_low, q_high=cfg.q_high)
        limits = SwitchLimits(c_lower=c_lower, c_upper=c_upper)
    return curves, static, limits


# ---------------------------------------------------------------------------
# Intermittent participation.
# ---------------------------------------------------------------------------

def _draw_duration_ms(spec: IntermittentSpec, rng: np.random.Generator) -> float:
    if spec.duration_family == "alpha":
        scale = spec.median_s / float(_alpha_dist.ppf(0.5, spec.alpha_shape))
        dur_s = float(_alpha_dist.rvs(spec.alpha_shape, scale=scale, random_state=rng))
    else:
        dur_s = float(rng.exponential(spec.mean_s))
    return max(dur_s * 1000.0, 1e-3)


def gen_intermittent_schedule(spec: IntermittentSpec, n_devices: int,
                              n_samples: Sequence[int], seed: int,
                              ) -> list[list[tuple[int, float]]]:
    """Per-device offline schedules: at most one (sample index, duration)."""
    if any(n <= 0 for n in n_samples):
        raise ValidationError("intermittent schedules require n_samples > 0")
    schedules: list[list[tuple[int, float]]] = []
    for i in range(n_devices):
        rng = derive_rng(seed, i, PURPOSE_INTERMITTENT)
        entries: list[tuple[int, float]] = []
        if rng.random() < spec.offline_probability:
            n = n_samples[i]
            idx = int(round(rng.normal(n / 2.0, n / 5.0)))
            idx = min(max(idx, 0), n)
            entries.append((idx, _draw_duration_ms(spec, rng)))
        schedules.append(entries)
    return schedules


# ---------------------------------------------------------------------------
# Simulation assembly.
# ---------------------------------------------------------------------------

class Simulation:
    def __init__(self, cfg: ScenarioConfig, base_dir: str | Path = ".",
                 event_log: list[SimEvent] | None = None,
                 keep_queue_series: bool = False, keep_outcomes: bool = False):
        self.cfg = cfg
        base_dir = Path(base_dir)
        digest = config_digest(canonical(cfg))
        self.engine = Engine(event_log=event_log)
        self.metrics = Metrics(digest=digest, policy=cfg.policy.kind.value,
                               seed=cfg.seed, keep_queue_series=keep_queue_series,
                               keep_outcomes=keep_outcomes)
        self.server = Server(self.engine, catalog=dict(cfg.server.catalog),
                             deployed=cfg.server.deployed,
                             downlink_ms=cfg.network.downlink_ms,
                             swap_delay_ms=cfg.server.swap_delay_ms,
                             cooldown_ms=cfg.server.cooldown_ms,
                             metrics=self.metrics)
        self.curves, self.static_thresholds, limits = tier_calibrations(cfg)
        self.scheduler = Scheduler(self.engine, policy=cfg.policy,
                                   window_ms=cfg.slo.window_ms, server=self.server,
                                   metrics=self.metrics, limits=limits,
                                   downlink_ms=cfg.network.downlink_ms)
        self.metrics.bind(scheduler=self.scheduler, server=self.server,
                          engine=self.engine)

        offline = None
        total_devices = sum(g.count for g in cfg.devices)
        if cfg.intermittent is not None:
            offline = gen_intermittent_schedule(
                cfg.intermittent, total_devices,
                [g.n_samples for g in cfg.devices for _ in range(g.count)],
                cfg.seed)

        self.devices: list[Device] = []
        index = 0
        for group in cfg.devices:
            for k in range(group.count):
                device_id = f"{group.tier}-{index:03d}"
                profile = DeviceProfile(
                    device_id=device_id, tier=group.tier, t_inf_ms=group.t_inf_ms,
                    slo_ms=group.slo_ms, sr_target=group.sr_target,
                    n_samples=group.n_samples,
                    trace_source=group.trace_file or "generated")
                trace = _device_trace(cfg, group, index, base_dir)
                threshold = (cfg.policy.initial_threshold
                             if cfg.policy.initial_threshold is not None
                             else self.static_thresholds[group.tier])
                noise_rng = (derive_rng(cfg.seed, index, PURPOSE_NOISE)
                             if group.latency_noise_pct > 0 else None)
                device = Device(
                    self.engine, self.metrics, self.server, self.scheduler,
                    profile=profile, trace=trace, threshold=threshold,
                    window_ms=cfg.slo.window_ms, uplink_ms=cfg.network.uplink_ms,
                    noise_pct=group.latency_noise_pct, noise_rng=noise_rng,
                    offline_schedule=offline[index] if offline else ())
                self.metrics.register_device(device_id, group.tier)
                self.scheduler.register_device(device, group.tier, group.sr_target,
                                               threshold)
                self.devices.append(device)
                index += 1

    def run(self, until: float | None = None) -> RunReport:
        for device in self.devices:
            device.start()
        self.scheduler.start()
        self.metrics.sample_timeseries(0.0)
        end = self.engine.run(until=until)
        return self.metrics.finalize(end, self.devices)


# ---------------------------------------------------------------------------
# Entry points.
# ---------------------------------------------------------------------------

def _cell_dir(cfg: ScenarioConfig, out_base: str | Path | None) -> Path:
    base = Path(out_base) if out_base is not None else Path(cfg.output)
    total = sum(g.count for g in cfg.devices)
    return base / cfg.scenario / f"{total}devices" / f"seed{cfg.seed}"


def run_scenario(cfg: ScenarioConfig, base_dir: str | Path = ".",
                 out_base: str | Path | None = None, write_outputs: bool = True,
                 event_log_path: str | Path | None = None,
                 keep_queue_series: bool = False,
                 dump_outcomes: bool = False) -> tuple[RunReport, Metrics]:
    event_log: list[SimEvent] | None = [] if event_log_path else None
    sim = Simulation(cfg, base_dir=base_dir, event_log=event_log,
                     keep_queue_series=keep_queue_series,
                     keep_outcomes=dump_outcomes)
    report = sim.run()
    if write_outputs:
        cell = _cell_dir(cfg, out_base)
        write_run_outputs(report, sim.metrics, cell)
        if dump_outcomes:
            _write_outcome_dumps(sim, cell / "outcomes")
    if event_log_path:
        lines = [f"{e.time_ms!r},{e.seq},{e.kind.name},{e.actor}"
                 for e in event_log]
        Path(event_log_path).write_text("\n".join(lines) + "\n")
    return report, sim.metrics


def _write_outcome_dumps(sim: Simulation, dest: Path) -> None:
    """Per-device dump: the trace columns plus what happened to each sample."""
    dest.mkdir(parents=True, exist_ok=True)
    for device in sim.devices:
        trace = device.trace
        models = trace.models
        header = ("sample_id,bvsb,light_correct,"
                  + ",".join(f"heavy_{m}" for m in models)
                  + ",origin,latency_ms,slo_met,correct")
        by_sample = {o.sample_id: o
                     for o in sim.metrics.outcomes.get(device.device_id, [])}
        lines = [header]
        for k in sorted(by_sample):
            o = by_sample[k]
            bits = ",".join(str(int(trace.heavy_correct[m][k])) for m in models)
            lines.append(
                f"{k},{float(trace.bvsb[k])!r},{int(trace.light_correct[k])},{bits},"
                f"{o.origin.value},{o.latency_ms:.6f},{int(o.slo_met)},{int(o.correct)}")
        (dest / f"{device.device_id}.csv").write_text("\n".join(lines) + "\n")


def scale_device_groups(cfg: ScenarioConfig, total: int) -> ScenarioConfig:
    """Rescale group counts to the target total, preserving proportions."""
    if total <= 0:
        raise ValidationError(f"device count must be > 0, got {total}")
    current = sum(g.count for g in cfg.devices)
    ideal = [g.count * total / current for g in cfg.devices]
    counts = [int(f) for f in ideal]
    # Largest-remainder rounding so the counts sum exactly to the target.
    remainders = sorted(range(len(ideal)), key=lambda i: (ideal[i] - counts[i], -i),
                        reverse=True)
    short = total - sum(counts)
    for i in remainders[:short]:
        counts[i] += 1
    groups = tuple(dataclasses.replace(g, count=c)
                   for g, c in zip(cfg.devices, counts) if c > 0)
    return dataclasses.replace(cfg, devices=groups)


def run_sweep(cfg: ScenarioConfig, device_counts: Sequence[int],
              seeds: Sequence[int], base_dir: str | Path = ".",
              out_base: str | Path | None = None, write_outputs: bool = True,
              ) -> tuple[SweepReport, dict[tuple[int, int], RunReport]]:
    if not device_counts:
        raise ValidationError("sweep requires at least one device count")
    if not seeds:
        raise ValidationError("sweep requires at least one seed")
    reports: dict[tuple[int, int], RunReport] = {}
    for count in device_counts:
        scaled = scale_device_groups(cfg, count)
        for seed in seeds:
            cell_cfg = dataclasses.replace(scaled, seed=seed)
            report, _ = run_scenario(cell_cfg, base_dir=base_dir, out_base=out_base,
                                     write_outputs=write_outputs)
            reports[(count, seed)] = report
    sweep = aggregate_sweep(reports)
    if write_outputs:
        base = Path(out_base) if out_base is not None else Path(cfg.output)
        sweep_dir = base / cfg.scenario
        sweep_dir.mkdir(parents=True, exist_ok=True)
        (sweep_dir / "sweep.csv").write_text(sweep.to_csv())
    return sweep, reports
