"""Trace-driven simulator and adaptive scheduler for multi-device cascade inference."""

from .config import ScenarioConfig, load_config, parse_config
from .core import (ALLOWED_BATCH_SIZES, CongestionState, DeviceProfile, SLOPolicy,
                   ServerModelProfile, SimulationError, ValidationError,
                   arrival_rate, batch_latency_ms, classify_congestion,
                   default_server_catalog, server_throughput)
from .device import Decision, Origin, SampleOutcome, decide
from .engine import Engine, EventKind, SimEvent
from .metrics import Metrics, RunReport, SweepReport
from .runner import (Simulation, gen_intermittent_schedule, run_scenario,
                     run_sweep)
from .scheduler import (PolicyConfig, PolicyKind, SwitchLimits, ThresholdState,
                        apply_multiplier, continuous_update, switch_decision)
from .traces import (CalibrationCurve, Trace, TraceGenSpec, TraceRecord,
                     calibrate_static_threshold, calibrate_switch_limits,
                     calibration_curve, compute_bvsb, generate_trace, load_trace,
                     save_trace)

__version__ = "0.1.0"
