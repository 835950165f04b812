"""Scenario configuration: YAML schema, validation, canonical form.

A scenario file describes everything one simulation needs: the device
fleet (tier templates with counts), the server model catalog, the policy,
SLO windowing, network delays, trace generation parameters and the
optional intermittent-participation model.  ``parse_config`` validates
eagerly and reports the offending path; ``canonical`` returns a fully
defaulted plain dict usable for digests and lossless round-trips.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import (DEVICE_TIER_DEFAULTS, DeviceProfile, SLOPolicy,
                   ServerModelProfile, ValidationError, default_server_catalog)
from .scheduler import PolicyConfig, PolicyKind
from .traces import DEFAULT_BVSB_CORRECT_SHAPE, DEFAULT_BVSB_INCORRECT_SHAPE

SCHEMA_VERSION = 1


class ConfigError(ValidationError):
    """Scenario config failed validation."""


@dataclass(frozen=True)
class NetworkConfig:
    uplink_ms: float = 0.0
    downlink_ms: float = 0.0

    def __post_init__(self):
        if self.uplink_ms < 0 or self.downlink_ms < 0:
            raise ConfigError("network delays must be >= 0")


@dataclass(frozen=True)
class ServerConfig:
    deployed: str
    catalog: Mapping[str, ServerModelProfile]
    cooldown_ms: float
    swap_delay_ms: float = 0.0

    def __post_init__(self):
        if self.deployed not in self.catalog:
            raise ConfigError(
                f"server.deployed {self.deployed!r} not in catalog {sorted(self.catalog)}")
        if self.swap_delay_ms < 0 or self.cooldown_ms < 0:
            raise ConfigError("server.swap_delay_ms and cooldown must be >= 0")


@dataclass(frozen=True)
class DeviceGroup:
    tier: str
    count: int
    t_inf_ms: float
    slo_ms: float
    sr_target: float
    n_samples: int
    light_accuracy: float
    latency_noise_pct: float = 0.0
    trace_file: str | None = None  # None -> generated; may contain "{index}"

    def __post_init__(self):
        if self.count <= 0:
            raise ConfigError(f"devices[tier={self.tier!r}].count must be > 0")
        if not 0.0 <= self.light_accuracy <= 1.0:
            raise ConfigError(f"devices[tier={self.tier!r}].light_accuracy outside [0, 1]")
        if self.latency_noise_pct < 0:
            raise ConfigError(f"devices[tier={self.tier!r}].latency_noise_pct must be >= 0")


@dataclass(frozen=True)
class TraceDefaults:
    calibration_samples: int = 5000
    bvsb_correct: tuple[float, float] = DEFAULT_BVSB_CORRECT_SHAPE
    bvsb_incorrect: tuple[float, float] = DEFAULT_BVSB_INCORRECT_SHAPE
    # Optional per-model override of P(heavy correct | light wrong).
    heavy_given_light_wrong: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.calibration_samples <= 0:
            raise ConfigError("traces.calibration_samples must be > 0")


@dataclass(frozen=True)
class IntermittentSpec:
    offline_probability: float = 0.5
    duration_family: str = "alpha"   # "alpha" | "exponential"
    alpha_shape: float = 60.0
    median_s: float = 60.0           # alpha family: median offline duration
    mean_s: float = 60.0             # exponential family: mean offline duration

    def __post_init__(self):
        if not 0.0 <= self.offline_probability <= 1.0:
            raise ConfigError("intermittent.offline_probability must be in [0, 1]")
        if self.duration_family not in ("alpha", "exponential"):
            raise ConfigError(
                f"intermittent.duration.family must be alpha|exponential, "
                f"got {self.duration_family!r}")
        if self.alpha_shape <= 0 or self.median_s <= 0 or self.mean_s <= 0:
            raise ConfigError("intermittent duration parameters must be > 0")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    slo: SLOPolicy
    network: NetworkConfig
    server: ServerConfig
    policy: PolicyConfig
    devices: tuple[DeviceGroup, ...]
    traces: TraceDefaults
    intermittent: IntermittentSpec | None = None
    q_low: float = 0.05
    q_high: float = 0.85
    output: str = "out"

    def __post_init__(self):
        if not self.devices:
            raise ConfigError("at least one device group is required")
        seen: dict[str, tuple[float, float]] = {}
        for g in self.devices:
            key = (g.t_inf_ms, g.light_accuracy)
            if g.tier in seen and seen[g.tier] != key:
                raise ConfigError(
                    f"tier {g.tier!r} used with inconsistent latency/accuracy across groups")
            seen[g.tier] = key
        if not 0.0 < self.q_low < self.q_high < 1.0:
            raise ConfigError(
                f"require 0 < q_low < q_high < 1, got ({self.q_low}, {self.q_high})")


def _require(data: Mapping, key: str, where: str):
    if key not in data:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return data[key]


def _parse_server(data: Mapping, default_cooldown_ms: float) -> ServerConfig:
    defaults = default_server_catalog()
    raw_catalog = data.get("catalog", list(defaults))
    catalog: dict[str, ServerModelProfile] = {}
    for entry in raw_catalog:
        if isinstance(entry, str):
            if entry not in defaults:
                raise ConfigError(
                    f"server.catalog: unknown default model {entry!r}; "
                    f"known: {sorted(defaults)}")
            catalog[entry] = defaults[entry]
        elif isinstance(entry, Mapping):
            model_id = _require(entry, "model_id", "server.catalog[]")
            anchors = tuple(
                (int(b), float(lat))
                for b, lat in _require(entry, "latency_anchors", f"model {model_id!r}"))
            catalog[model_id] = ServerModelProfile(
                model_id=model_id,
                accuracy=float(_require(entry, "accuracy", f"model {model_id!r}")),
                latency_anchors=anchors,
                max_batch=int(entry.get("max_batch", 64)),
                marginal_cost_ms=(float(entry["marginal_cost_ms"])
                                  if "marginal_cost_ms" in entry else None),
            )
        else:
            raise ConfigError("server.catalog entries must be names or profile maps")
    deployed = data.get("deployed") or next(iter(catalog))
    cooldown_s = data.get("cooldown_s")
    return ServerConfig(
        deployed=deployed,
        catalog=catalog,
        cooldown_ms=(float(cooldown_s) * 1000.0 if cooldown_s is not None
                     else default_cooldown_ms),
        swap_delay_ms=float(data.get("swap_delay_ms", 0.0)),
    )


def _parse_policy(data: Mapping) -> PolicyConfig:
    kind_raw = str(data.get("kind", "multitascpp"))
    try:
        kind = PolicyKind(kind_raw)
    except ValueError:
        raise ConfigError(
            f"policy.kind must be one of "
            f"{[k.value for k in PolicyKind]}, got {kind_raw!r}") from None
    initial = data.get("initial_threshold", "calibrated")
    if initial == "calibrated" or initial is None:
        initial_threshold = None
    else:
        initial_threshold = float(initial)
    optimal = data.get("optimal_batch")
    return PolicyConfig(
        kind=kind,
        a=float(data.get("a", 0.005)),
        switch_enabled=bool(data.get("switch_enabled", False)),
        step=float(data.get("step", 0.05)),
        optimal_batch=int(optimal) if optimal is not None else None,
        initial_threshold=initial_threshold,
    )


def _parse_group(entry: Mapping, slo: SLOPolicy, idx: int) -> DeviceGroup:
    where = f"devices[{idx}]"
    tier = str(_require(entry, "tier", where))
    tier_default = DEVICE_TIER_DEFAULTS.get(tier)
    t_inf = entry.get("t_inf_ms", tier_default[0] if tier_default else None)
    light_acc = entry.get("light_accuracy", tier_default[1] if tier_default else None)
    if t_inf is None or light_acc is None:
        raise ConfigError(
            f"{where}: custom tier {tier!r} requires explicit t_inf_ms and light_accuracy")
    trace = entry.get("trace", "generated")
    trace_file = None
    if isinstance(trace, Mapping):
        trace_file = str(_require(trace, "file", f"{where}.trace"))
    elif trace != "generated":
        raise ConfigError(f"{where}.trace must be 'generated' or a {{file: ...}} map")
    return DeviceGroup(
        tier=tier,
        count=int(entry.get("count", 1)),
        t_inf_ms=float(t_inf),
        slo_ms=float(entry.get("slo_ms", 100.0)),
        sr_target=float(entry.get("sr_target", slo.sr_target_default)),
        n_samples=int(entry.get("n_samples", 5000)),
        light_accuracy=float(light_acc),
        latency_noise_pct=float(entry.get("latency_noise_pct", 0.0)),
        trace_file=trace_file,
    )


def parse_config(data: Mapping, base_dir: str | Path = ".") -> ScenarioConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("scenario config must be a mapping")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}; this build reads "
                          f"{SCHEMA_VERSION}")
    slo_data = data.get("slo", {})
    slo = SLOPolicy(window_s=float(slo_data.get("window_s", 1.5)),
                    sr_target_default=float(slo_data.get("sr_target_default", 95.0)))
    net_data = data.get("network", {})
    network = NetworkConfig(uplink_ms=float(net_data.get("uplink_ms", 0.0)),
                            downlink_ms=float(net_data.get("downlink_ms", 0.0)))
    server_cfg = _parse_server(data.get("server", {}),
                               default_cooldown_ms=10.0 * slo.window_s * 1000.0)
    policy = _parse_policy(data.get("policy", {}))
    groups = tuple(
        _parse_group(entry, slo, i)
        for i, entry in enumerate(_require(data, "devices", "config")))
    traces_data = data.get("traces", {})
    trace_defaults = TraceDefaults(
        calibration_samples=int(traces_data.get("calibration_samples", 5000)),
        bvsb_correct=tuple(float(x) for x in traces_data.get(
            "bvsb_correct", DEFAULT_BVSB_CORRECT_SHAPE)),
        bvsb_incorrect=tuple(float(x) for x in traces_data.get(
            "bvsb_incorrect", DEFAULT_BVSB_INCORRECT_SHAPE)),
        heavy_given_light_wrong={
            str(m): float(v)
            for m, v in traces_data.get("heavy_given_light_wrong", {}).items()},
    )
    inter = None
    if data.get("intermittent") is not None:
        inter_data = data["intermittent"]
        duration = inter_data.get("duration", {})
        inter = IntermittentSpec(
            offline_probability=float(inter_data.get("offline_probability", 0.5)),
            duration_family=str(duration.get("family", "alpha")),
            alpha_shape=float(duration.get("shape", 60.0)),
            median_s=float(duration.get("median_s", 60.0)),
            mean_s=float(duration.get("mean_s", 60.0)),
        )
    cfg = ScenarioConfig(
        scenario=str(data.get("scenario", "scenario")),
        seed=int(data.get("seed", 0)),
        slo=slo,
        network=network,
        server=server_cfg,
        policy=policy,
        devices=groups,
        traces=trace_defaults,
        intermittent=inter,
        q_low=float(data.get("q_low", 0.05)),
        q_high=float(data.get("q_high", 0.85)),
        output=str(data.get("output", "out")),
    )
    _check_trace_files(cfg, base_dir)
    return cfg


def _check_trace_files(cfg: ScenarioConfig, base_dir: str | Path) -> None:
    base = Path(base_dir)
    index = 0
    for g in cfg.devices:
        for _ in range(g.count):
            if g.trace_file is not None:
                path = base / g.trace_file.format(index=index)
                if not path.exists():
                    raise ConfigError(f"trace file not found: {path}")
            index += 1


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return parse_config(data, base_dir=path.parent)


def canonical(cfg: ScenarioConfig) -> dict:
    """Fully defaulted plain dict; parse(canonical(cfg)) == cfg."""
    out: dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "output": cfg.output,
        "q_low": cfg.q_low,
        "q_high": cfg.q_high,
        "slo": {"window_s": cfg.slo.window_s,
                "sr_target_default": cfg.slo.sr_target_default},
        "network": {"uplink_ms": cfg.network.uplink_ms,
                    "downlink_ms": cfg.network.downlink_ms},
        "server": {
            "deployed": cfg.server.deployed,
            "cooldown_s": cfg.server.cooldown_ms / 1000.0,
            "swap_delay_ms": cfg.server.swap_delay_ms,
            "catalog": [
                {
                    "model_id": m.model_id,
                    "accuracy": m.accuracy,
                    "latency_anchors": [[b, lat] for b, lat in m.latency_anchors],
                    "max_batch": m.max_batch,
                    **({"marginal_cost_ms": m.marginal_cost_ms}
                       if m.marginal_cost_ms is not None else {}),
                }
                for _, m in sorted(cfg.server.catalog.items())
            ],
        },
        "policy": {
            "kind": cfg.policy.kind.value,
            "a": cfg.policy.a,
            "switch_enabled": cfg.policy.switch_enabled,
            "step": cfg.policy.step,
            "optimal_batch": cfg.policy.optimal_batch,
            "initial_threshold": (cfg.policy.initial_threshold
                                  if cfg.policy.initial_threshold is not None
                                  else "calibrated"),
        },
        "devices": [
            {
                "tier": g.tier,
                "count": g.count,
                "t_inf_ms": g.t_inf_ms,
                "slo_ms": g.slo_ms,
                "sr_target": g.sr_target,
                "n_samples": g.n_samples,
                "light_accuracy": g.light_accuracy,
                "latency_noise_pct": g.latency_noise_pct,
                "trace": ("generated" if g.trace_file is None
                          else {"file": g.trace_file}),
            }
            for g in cfg.devices
        ],
        "traces": {
            "calibration_samples": cfg.traces.calibration_samples,
            "bvsb_correct": list(cfg.traces.bvsb_correct),
            "bvsb_incorrect": list(cfg.traces.bvsb_incorrect),
            "heavy_given_light_wrong": dict(sorted(
                cfg.traces.heavy_given_light_wrong.items())),
        },
    }
    if cfg.intermittent is not None:
        i = cfg.intermittent
        out["intermittent"] = {
            "offline_probability": i.offline_probability,
            "duration": {"family": i.duration_family, "shape": i.alpha_shape,
                         "median_s": i.median_s, "mean_s": i.mean_s},
        }
    return out


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(canonical(cfg), sort_keys=True)
