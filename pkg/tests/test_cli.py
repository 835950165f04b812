import yaml
from click.testing import CliRunner

from cascadesim.cli import main
from cascadesim.config import canonical
from conftest import make_scenario


def write_config(path, **over):
    over.setdefault("n_devices", 2)
    over.setdefault("n_samples", 300)
    cfg = make_scenario(**over)
    data = canonical(cfg)
    path.write_text(yaml.safe_dump(data))
    return data


def test_run_writes_outputs(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"))
    result = CliRunner().invoke(main, ["run", "--config", str(cfg_path)])
    assert result.exit_code == 0, result.output
    assert "throughput:" in result.output
    cell = tmp_path / "out" / "test" / "2devices" / "seed1"
    assert (cell / "report.json").exists()
    assert (cell / "timeseries.csv").exists()


def test_run_overrides(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"))
    result = CliRunner().invoke(main, [
        "run", "--config", str(cfg_path), "--devices", "3", "--seed", "9",
        "--policy", "static", "--slo-ms", "150"])
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "test" / "3devices" / "seed9" / "report.json").exists()


def test_missing_config_is_validation_error(tmp_path):
    result = CliRunner().invoke(main, ["run", "--config", str(tmp_path / "no.yaml")])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_invalid_config_is_validation_error(tmp_path):
    cfg_path = tmp_path / "bad.yaml"
    cfg_path.write_text(yaml.safe_dump({
        "scenario": "bad", "seed": 1,
        "devices": [{"tier": "low", "count": 1, "n_samples": 10,
                     "trace": {"file": "missing_{index}.csv"}}]}))
    result = CliRunner().invoke(main, ["run", "--config", str(cfg_path)])
    assert result.exit_code == 1
    assert "missing_0.csv" in result.output


def test_event_log_flag(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"), n_samples=100)
    log_path = tmp_path / "events.log"
    result = CliRunner().invoke(main, ["run", "--config", str(cfg_path),
                                       "--event-log", str(log_path)])
    assert result.exit_code == 0, result.output
    assert log_path.exists() and log_path.stat().st_size > 0


def test_sweep_emits_table(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"))
    result = CliRunner().invoke(main, [
        "sweep", "--config", str(cfg_path), "--device-counts", "2,4",
        "--seeds", "1,2"])
    assert result.exit_code == 0, result.output
    assert result.output.startswith("devices,seed_count,metric,mean,min,max")
    assert (tmp_path / "out" / "test" / "sweep.csv").exists()


def test_sweep_bad_counts_is_validation_error(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path)
    result = CliRunner().invoke(main, [
        "sweep", "--config", str(cfg_path), "--device-counts", "two"])
    assert result.exit_code == 1


def test_gen_traces(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"))
    result = CliRunner().invoke(main, ["gen-traces", "--config", str(cfg_path)])
    assert result.exit_code == 0, result.output
    traces = list((tmp_path / "out" / "test" / "traces").glob("*.csv"))
    assert len(traces) == 2


def test_calibrate(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"),
                 catalog=["inceptionv3", "efficientnetb3"], switch_enabled=True)
    result = CliRunner().invoke(main, ["calibrate", "--config", str(cfg_path)])
    assert result.exit_code == 0, result.output
    dest = tmp_path / "out" / "test" / "calibration"
    assert (dest / "curve_low.csv").exists()
    summary = yaml.safe_load((dest / "summary.yaml").read_text())
    assert "static_thresholds" in summary and "switch_limits" in summary


def test_schedule_intermittent(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path, output=str(tmp_path / "out"),
                 intermittent={"offline_probability": 1.0})
    result = CliRunner().invoke(main, ["schedule-intermittent",
                                       "--config", str(cfg_path)])
    assert result.exit_code == 0, result.output
    table = (tmp_path / "out" / "test" / "intermittent.csv").read_text()
    assert table.startswith("device_index,offline_at_index,duration_ms")
    assert len(table.strip().split("\n")) == 3  # header + 2 devices


def test_schedule_intermittent_requires_section(tmp_path):
    cfg_path = tmp_path / "cfg.yaml"
    write_config(cfg_path)
    result = CliRunner().invoke(main, ["schedule-intermittent",
                                       "--config", str(cfg_path)])
    assert result.exit_code == 1
