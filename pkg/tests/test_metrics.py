import json

import pytest

from cascadesim.core import SimulationError, ValidationError
from cascadesim.device import Origin, SampleOutcome
from cascadesim.metrics import (Metrics, RunReport, TIMESERIES_HEADER,
                                aggregate_sweep, config_digest)
from cascadesim.runner import run_scenario
from conftest import make_scenario


def outcome(sample_id=0, origin=Origin.LOCAL, latency=31.0, slo_met=True,
            correct=True):
    return SampleOutcome(sample_id, origin, latency, slo_met, correct)


def fill(metrics, device_id, n, n_met, n_correct, origin=Origin.LOCAL, t0=0.0):
    for i in range(n):
        metrics.record_outcome(device_id, outcome(
            i, origin, 31.0, i < n_met, i < n_correct), t0 + 31.0 * (i + 1))


class TestCounters:
    def test_slo_ratio(self):
        m = Metrics()
        m.register_device("d0", "low")
        fill(m, "d0", 100, 95, 80)
        report = m.finalize(3100.0)
        assert report.per_device["d0"]["slo_satisfaction"] == pytest.approx(95.0)
        assert report.per_device["d0"]["accuracy"] == pytest.approx(0.80)

    def test_zero_outcome_device_excluded_with_warning(self):
        m = Metrics()
        m.register_device("d0", "low")
        m.register_device("empty", "low")
        fill(m, "d0", 10, 10, 10)
        with pytest.warns(UserWarning, match="no outcomes"):
            report = m.finalize(310.0)
        assert report.per_device["empty"]["accuracy"] is None
        assert report.overall["accuracy"] == 1.0
        assert report.warnings

    def test_throughput_single_device(self):
        m = Metrics()
        m.register_device("d0", "low")
        fill(m, "d0", 100, 100, 72)
        report = m.finalize(3100.0)
        assert report.makespan_ms == pytest.approx(3100.0)
        assert report.system_throughput_sps == pytest.approx(100 / 3.1, rel=1e-9)

    def test_two_local_only_devices_double_throughput(self):
        m = Metrics()
        for d in ("d0", "d1"):
            m.register_device(d, "low")
            fill(m, d, 100, 100, 72)
        report = m.finalize(3100.0)
        assert report.system_throughput_sps == pytest.approx(200 / 3.1, rel=1e-9)
        assert report.per_device["d0"]["accuracy"] == report.per_device["d1"]["accuracy"]

    def test_tier_aggregates_partition_devices(self):
        m = Metrics()
        m.register_device("a", "low")
        m.register_device("b", "mid")
        m.register_device("c", "mid")
        for d in ("a", "b", "c"):
            fill(m, d, 10, 9, 7)
        report = m.finalize(310.0)
        assert sum(t["devices"] for t in report.per_tier.values()) == 3
        assert sum(t["samples"] for t in report.per_tier.values()) == 30
        # overall accuracy is the sample-weighted mean of per-device accuracies
        weighted = sum(v["accuracy"] * v["samples"]
                       for v in report.per_device.values()) / 30
        assert report.overall["accuracy"] == pytest.approx(weighted, rel=1e-12)

    def test_outstanding_at_finalize_raises(self):
        m = Metrics()
        m.register_device("d0", "low")
        fill(m, "d0", 5, 5, 5)

        class Stuck:
            device_id = "d0"
            outstanding = {7: 0.0}

        with pytest.raises(SimulationError, match="7"):
            m.finalize(200.0, devices=[Stuck()])


class TestTimeSeries:
    def test_header_and_alignment(self, tmp_path):
        cfg = make_scenario(n_devices=2, n_samples=400)
        report, metrics = run_scenario(cfg, write_outputs=False)
        csv = metrics.timeseries_csv()
        lines = csv.strip().split("\n")
        assert lines[0] == TIMESERIES_HEADER
        times = [float(line.split(",")[0]) for line in lines[1:]]
        assert times == sorted(times)

    def test_running_window_evicts_old_outcomes(self):
        m = Metrics(running_window_s=1.0)
        m.register_device("d0", "low")
        m.record_outcome("d0", outcome(slo_met=False), 100.0)
        m.record_outcome("d0", outcome(slo_met=True), 1500.0)
        m.sample_timeseries(1600.0)  # the miss at t=100 fell out of the window
        assert m.timeseries[-1][3] == 100.0


class TestReports:
    def test_report_bytes_deterministic(self):
        cfg = make_scenario(n_devices=3, n_samples=500)
        r1, m1 = run_scenario(cfg, write_outputs=False)
        r2, m2 = run_scenario(cfg, write_outputs=False)
        assert r1.to_json() == r2.to_json()
        assert m1.timeseries_csv() == m2.timeseries_csv()

    def test_report_json_round_trips(self):
        cfg = make_scenario(n_devices=2, n_samples=300)
        report, _ = run_scenario(cfg, write_outputs=False)
        parsed = json.loads(report.to_json())
        assert parsed["total_samples"] == 600
        assert set(parsed["per_device"]) == {"low-000", "low-001"}

    def test_digest_stable(self):
        assert config_digest({"a": 1}) == config_digest({"a": 1})
        assert config_digest({"a": 1}) != config_digest({"a": 2})


def fake_report(count, seed, throughput):
    return RunReport(config_digest="x", policy="static", seed=seed,
                     total_samples=count * 10,
                     system_throughput_sps=throughput, makespan_ms=1000.0,
                     overall={"accuracy": 0.75, "slo_satisfaction": 95.0},
                     per_device={}, per_tier={}, swaps=[],
                     events_dispatched=0, events_pending=0, warnings=[])


class TestSweepAggregation:
    def test_min_mean_max_ordering(self):
        reports = {(2, s): fake_report(2, s, tp)
                   for s, tp in zip((1, 2, 3), (10.0, 12.0, 14.0))}
        sweep = aggregate_sweep(reports)
        mean, lo, hi = sweep.cells[2]["throughput"]
        assert lo <= mean <= hi
        assert (mean, lo, hi) == (12.0, 10.0, 14.0)

    def test_missing_cell_rejected(self):
        reports = {(2, 1): fake_report(2, 1, 10.0), (4, 2): fake_report(4, 2, 20.0)}
        with pytest.raises(ValidationError, match="missing sweep cell"):
            aggregate_sweep(reports)

    def test_csv_schema(self):
        reports = {(2, 1): fake_report(2, 1, 10.0)}
        csv = aggregate_sweep(reports).to_csv()
        assert csv.startswith("devices,seed_count,metric,mean,min,max\n")
        assert "2,1,throughput,10.000000,10.000000,10.000000" in csv
