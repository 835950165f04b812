"""Command-line entry point.

Subcommands:

* ``run``                   one scenario, report + time series on disk
* ``sweep``                 device-count x seed grid, aggregated sweep table
* ``gen-traces``            write the scenario's per-device trace files
* ``calibrate``             write calibration curves, static thresholds, limits
* ``schedule-intermittent`` write the per-device offline schedule

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

import click
import yaml

from .config import ScenarioConfig, dump_config, load_config
from .core import ValidationError
from .runner import (Simulation, derive_seed, gen_intermittent_schedule,
                     gen_spec_for, run_scenario, run_sweep, scale_device_groups,
                     tier_calibrations, PURPOSE_TRACE)
from .scheduler import PolicyKind
from .traces import generate_trace, save_calibration_curve, save_trace


def _fail(exc: Exception, code: int) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _load(config_path: str, seed: int | None, devices: int | None,
          policy: str | None, slo_ms: float | None, out: str | None,
          ) -> ScenarioConfig:
    cfg = load_config(config_path)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if devices is not None:
        cfg = scale_device_groups(cfg, devices)
    if policy is not None:
        cfg = dataclasses.replace(
            cfg, policy=dataclasses.replace(cfg.policy, kind=PolicyKind(policy)))
    if slo_ms is not None:
        cfg = dataclasses.replace(
            cfg, devices=tuple(dataclasses.replace(g, slo_ms=slo_ms)
                               for g in cfg.devices))
    if out is not None:
        cfg = dataclasses.replace(cfg, output=out)
    return cfg


_shared = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=False), help="Scenario YAML file."),
    click.option("--seed", type=int, default=None, help="Override scenario seed."),
    click.option("--devices", type=int, default=None,
                 help="Override the total device count."),
    click.option("--policy", type=click.Choice([k.value for k in PolicyKind]),
                 default=None, help="Override the scheduling policy."),
    click.option("--slo-ms", type=float, default=None,
                 help="Override every device's latency SLO."),
    click.option("--out", type=click.Path(), default=None,
                 help="Override the output directory."),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


@click.group()
def main() -> None:
    """Multi-device cascade inference simulator."""


@main.command()
@shared_options
@click.option("--event-log", "event_log", type=click.Path(), default=None,
              help="Write a replay log of every dispatched event.")
@click.option("--dump-outcomes", is_flag=True, default=False,
              help="Write a per-device per-sample outcome table.")
def run(config_path, seed, devices, policy, slo_ms, out, event_log, dump_outcomes):
    """Run one scenario to drain and write its report."""
    try:
        cfg = _load(config_path, seed, devices, policy, slo_ms, out)
    except ValidationError as exc:
        _fail(exc, 1)
    try:
        report, _ = run_scenario(cfg, base_dir=Path(config_path).parent,
                                 event_log_path=event_log,
                                 dump_outcomes=dump_outcomes)
    except ValidationError as exc:
        _fail(exc, 1)
    except Exception as exc:  # noqa: BLE001 - map anything else to exit 2
        _fail(exc, 2)
    click.echo(f"throughput: {report.system_throughput_sps:.2f} samples/s")
    click.echo(f"accuracy: {report.overall['accuracy']:.4f}")
    click.echo(f"slo_satisfaction: {report.overall['slo_satisfaction']:.2f}")
    click.echo(f"makespan: {report.makespan_ms / 1000.0:.2f} s")


@main.command()
@shared_options
@click.option("--device-counts", "counts", default=None,
              help="Comma-separated device counts (default: the config's total).")
@click.option("--seeds", default=None,
              help="Comma-separated seeds (default: the config's seed).")
def sweep(config_path, seed, devices, policy, slo_ms, out, counts, seeds):
    """Run a device-count x seed sweep and aggregate the metrics."""
    try:
        cfg = _load(config_path, seed, devices, policy, slo_ms, out)
        count_list = ([int(c) for c in counts.split(",")] if counts
                      else [sum(g.count for g in cfg.devices)])
        seed_list = [int(s) for s in seeds.split(",")] if seeds else [cfg.seed]
    except (ValidationError, ValueError) as exc:
        _fail(exc, 1)
    try:
        sweep_report, _ = run_sweep(cfg, count_list, seed_list,
                                    base_dir=Path(config_path).parent)
    except ValidationError as exc:
        _fail(exc, 1)
    except Exception as exc:  # noqa: BLE001
        _fail(exc, 2)
    click.echo(sweep_report.to_csv(), nl=False)


@main.command("gen-traces")
@shared_options
def gen_traces(config_path, seed, devices, policy, slo_ms, out):
    """Generate and write every device's trace file."""
    try:
        cfg = _load(config_path, seed, devices, policy, slo_ms, out)
    except ValidationError as exc:
        _fail(exc, 1)
    try:
        dest = Path(cfg.output) / cfg.scenario / "traces"
        dest.mkdir(parents=True, exist_ok=True)
        index = 0
        for group in cfg.devices:
            for _ in range(group.count):
                spec = gen_spec_for(cfg, group,
                                    derive_seed(cfg.seed, index, PURPOSE_TRACE))
                trace = generate_trace(spec, group.n_samples)
                save_trace(trace, dest / f"{group.tier}-{index:03d}.csv")
                index += 1
        click.echo(f"wrote {index} trace files to {dest}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc, 2)


@main.command()
@shared_options
def calibrate(config_path, seed, devices, policy, slo_ms, out):
    """Run the offline calibrations and write curves plus chosen thresholds."""
    try:
        cfg = _load(config_path, seed, devices, policy, slo_ms, out)
    except ValidationError as exc:
        _fail(exc, 1)
    try:
        curves, static, limits = tier_calibrations(cfg)
        dest = Path(cfg.output) / cfg.scenario / "calibration"
        dest.mkdir(parents=True, exist_ok=True)
        for tier, curve in curves.items():
            save_calibration_curve(curve, dest / f"curve_{tier}.csv")
        summary = {"static_thresholds": {t: float(v) for t, v in static.items()}}
        if limits is not None:
            summary["switch_limits"] = {
                "c_lower": float(limits.c_lower),
                "c_upper": {t: float(v) for t, v in limits.c_upper.items()},
            }
        (dest / "summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=True))
        click.echo(f"wrote calibration outputs to {dest}")
    except ValidationError as exc:
        _fail(exc, 1)
    except Exception as exc:  # noqa: BLE001
        _fail(exc, 2)


@main.command("schedule-intermittent")
@shared_options
def schedule_intermittent(config_path, seed, devices, policy, slo_ms, out):
    """Draw the per-device offline schedule implied by the config."""
    try:
        cfg = _load(config_path, seed, devices, policy, slo_ms, out)
        if cfg.intermittent is None:
            raise ValidationError("config has no intermittent section")
    except ValidationError as exc:
        _fail(exc, 1)
    try:
        n_samples = [g.n_samples for g in cfg.devices for _ in range(g.count)]
        schedules = gen_intermittent_schedule(
            cfg.intermittent, len(n_samples), n_samples, cfg.seed)
        dest = Path(cfg.output) / cfg.scenario
        dest.mkdir(parents=True, exist_ok=True)
        lines = ["device_index,offline_at_index,duration_ms"]
        for i, entries in enumerate(schedules):
            for idx, dur in entries:
                lines.append(f"{i},{idx},{dur:.3f}")
        (dest / "intermittent.csv").write_text("\n".join(lines) + "\n")
        click.echo(f"wrote schedule for {len(schedules)} devices to {dest}")
    except Exception as exc:  # noqa: BLE001
        _fail(exc, 2)


if __name__ == "__main__":
    main()
