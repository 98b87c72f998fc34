"""Command-line interface: verb wiring, file outputs, and error paths.

The CLI is exercised in process through main(argv) so failures surface as
ordinary assertions; the heavier determinism check lives in the acceptance
suite."""

import numpy as np
import pytest

from whiskertrack import cli, experiments, sensor_model


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "config.ini"
    p.write_text("[trial]\nduration = 1.5\nseed = 3\n")
    return str(p)


@pytest.fixture
def model_path(straight_model, tmp_path):
    p = tmp_path / "model.txt"
    sensor_model.save_model(straight_model, p)
    return str(p)


def test_simulate_writes_schema_csv(config_path, tmp_path):
    out = tmp_path / "trial.csv"
    assert cli.main(["simulate", "--config", config_path, "--out", str(out)]) == 0
    record = experiments.ingest_log(out)
    assert len(record) == 375  # 1.5 s at 250 Hz
    assert record.contact.any()


def test_calibrate_writes_loadable_model(config_path, tmp_path):
    out = tmp_path / "model.txt"
    assert cli.main(["calibrate", "--config", config_path, "--out", str(out)]) == 0
    model = sensor_model.load_model(out)
    assert model.degree == 5
    assert model.fit_stats["r_squared"] >= 0.99


def test_track_and_report(config_path, model_path, tmp_path):
    trial = tmp_path / "trial.csv"
    cli.main(["simulate", "--config", config_path, "--out", str(trial)])
    est_out = tmp_path / "est.csv"
    assert cli.main([
        "track", str(trial), "--config", config_path, "--model", model_path,
        "--method", "ukf", "--downsample", "10", "--out", str(est_out),
    ]) == 0
    lines = est_out.read_text().splitlines()
    assert lines[0] == "t,est_x,est_y,gt_x,gt_y"
    assert len(lines) > 10
    rep_out = tmp_path / "report.jsonl"
    assert cli.main([
        "report", str(trial), "--config", config_path, "--model", model_path,
        "--format", "jsonl", "--out", str(rep_out),
    ]) == 0
    assert len(rep_out.read_text().splitlines()) == 2


def test_replay_is_deterministic(config_path, model_path, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"rep{k}.jsonl"
        assert cli.main([
            "replay", "--config", config_path, "--model", model_path,
            "--seed", "3", "--out", str(out),
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_replay(config_path, model_path, tmp_path):
    outs = []
    for seed in ("3", "4"):
        out = tmp_path / f"rep{seed}.jsonl"
        cli.main([
            "replay", "--config", config_path, "--model", model_path,
            "--seed", seed, "--out", str(out),
        ])
        outs.append(out.read_bytes())
    assert outs[0] != outs[1]


def test_missing_input_is_an_error(tmp_path, capsys):
    rc = cli.main(["track", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bad_method_rejected_by_parser(tmp_path):
    with pytest.raises(SystemExit):
        cli.main(["track", "t.csv", "--method", "magic", "--out", "o.csv"])
