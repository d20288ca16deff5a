"""Experiment configs, file formats, CLI exit codes, deterministic plots."""

import json
import subprocess
import sys

import numpy as np
import pytest

from shred.errors import ConfigError, FormatError, UnsupportedVersion
from shred.pipeline.config import dump_config, load_config, parse_config
from shred.pipeline.io import (
    load_checkpoint,
    load_measurements,
    load_snapshots,
    save_checkpoint,
    save_measurements,
    save_snapshots,
)
from shred.pipeline.plots import svg_heatmap, svg_line_plot
from shred.pipeline.runner import run_experiment, write_metrics_csv
from shred.rom import thin_svd
from shred.shrednet import ShredModel
from shred.simulate import SnapshotMatrix, TimeGrid
from shred.spectral import SpatialGrid

GRID = SpatialGrid(2 * np.pi, 16)


def _base_config(**overrides):
    doc = {
        "scenario": "linear_exact",
        "grid": {"length": 6.283185307179586, "num_points": 64,
                 "boundary": "periodic"},
        "time": {"t_start": 0.0, "t_end": 1.0, "num_steps": 20},
        "num_modes": 9,
        "operator": [0.0, 1.0, 0.05],
        "sensors": {"stationary": [20]},
        "seed": 11,
    }
    doc.update(overrides)
    return doc


# -- configuration ------------------------------------------------------------

def test_parse_valid_config():
    cfg = parse_config(_base_config())
    assert cfg.scenario == "linear_exact"
    assert cfg.grid.num_points == 64
    assert cfg.num_modes == 9


def test_config_rejects_unknown_field():
    with pytest.raises(ConfigError):
        parse_config(_base_config(surprise=1))


def test_config_rejects_bad_scenario():
    with pytest.raises(ConfigError):
        parse_config(_base_config(scenario="warp_drive"))


def test_config_scenario_requirements():
    doc = _base_config(scenario="coupled")
    del doc["operator"]
    with pytest.raises(ConfigError):
        parse_config(doc)  # coupled needs coupled_operators


def test_config_hash_stable_under_key_order():
    doc = _base_config()
    reordered = json.loads(json.dumps(doc, sort_keys=True))
    assert parse_config(doc).config_hash == parse_config(reordered).config_hash


def test_config_dump_round_trip(tmp_path):
    doc = _base_config()
    p = tmp_path / "c.json"
    p.write_text(json.dumps(doc))
    cfg = load_config(p)
    assert json.loads(dump_config(cfg)) == doc


# -- file formats --------------------------------------------------------------

def test_snapshot_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    snap = SnapshotMatrix(rng.standard_normal((16, 5)), GRID,
                          TimeGrid.uniform(0, 1, 5))
    p = tmp_path / "snap.csv"
    save_snapshots(p, snap)
    header = p.read_text().splitlines()[0]
    assert header.startswith("# shred-snapshots v1; Nh=16; Nt=5;")
    back = load_snapshots(p)
    assert np.array_equal(back.values, snap.values)  # bit-exact
    assert back.grid == GRID


def test_snapshot_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1.0,2.0\n3.0,4.0\n")
    with pytest.raises(FormatError):
        load_snapshots(p)


def test_snapshot_csv_rejects_row_count_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("# shred-snapshots v1; Nh=3; Nt=2; L=1.0; bc=periodic\n1.0,2.0\n")
    with pytest.raises(FormatError):
        load_snapshots(p)


def test_measurement_csv_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    values = rng.standard_normal((3, 7))
    instants = np.linspace(0.0, 2.0, 7)
    p = tmp_path / "meas.csv"
    save_measurements(p, values, instants)
    back_values, back_instants = load_measurements(p)
    assert np.array_equal(back_values, values)
    assert np.array_equal(back_instants, instants)


def test_svd_checkpoint_round_trip(tmp_path):
    bundle = thin_svd(np.random.default_rng(2).standard_normal((16, 6)))
    p = tmp_path / "svd.ckpt"
    save_checkpoint(p, bundle)
    assert p.read_bytes()[:4] == b"SHRD"
    back = load_checkpoint(p)
    assert np.array_equal(back.U, bundle.U)
    assert np.array_equal(back.singular_values, bundle.singular_values)
    assert np.array_equal(back.V_latent, bundle.V_latent)


def test_model_checkpoint_round_trip(tmp_path):
    model = ShredModel.build(2, 3, lag=4, hidden_size=5, num_lstm_layers=2,
                             decoder_widths=(6,), seed=1)
    p = tmp_path / "model.ckpt"
    save_checkpoint(p, model)
    back = load_checkpoint(p)
    assert back.lag == model.lag
    for (na, a), (nb, b) in zip(model.parameters(), back.parameters()):
        assert na == nb and np.array_equal(a, b)


def test_checkpoint_rejects_future_version(tmp_path):
    bundle = thin_svd(np.eye(4))
    p = tmp_path / "svd.ckpt"
    save_checkpoint(p, bundle)
    raw = bytearray(p.read_bytes())
    raw[4] = 99  # bump the little-endian version field
    p.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersion):
        load_checkpoint(p)


# -- plots and metrics ---------------------------------------------------------

def test_svg_output_is_deterministic(tmp_path):
    x = np.linspace(0, 1, 50)
    series = {"a": (x, np.sin(x)), "b": (x, np.cos(x))}
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    svg_line_plot(p1, series, title="t")
    svg_line_plot(p2, series, title="t")
    assert p1.read_bytes() == p2.read_bytes()
    h1, h2 = tmp_path / "h1.svg", tmp_path / "h2.svg"
    M = np.outer(np.sin(x), np.cos(x))
    svg_heatmap(h1, M, title="m")
    svg_heatmap(h2, M, title="m")
    assert h1.read_bytes() == h2.read_bytes()
    assert "<svg" in p1.read_text()


def test_svg_empty_series_warns_not_raises(tmp_path):
    assert svg_line_plot(tmp_path / "e.svg", {}) is False


def test_metrics_csv_sorted(tmp_path):
    p = tmp_path / "m.csv"
    write_metrics_csv(p, {"zeta": 1.0, "alpha": 0.25})
    lines = p.read_text().splitlines()
    assert lines[0] == "metric,value"
    assert lines[1].startswith("alpha,") and lines[2].startswith("zeta,")


# -- runner and CLI ------------------------------------------------------------

def test_run_experiment_linear_exact(tmp_path):
    cfg = parse_config(_base_config())
    report = run_experiment(cfg, tmp_path, stage="report")
    assert report.metrics["field_relative_error"] < 1e-8
    assert (tmp_path / "metrics.csv").exists()
    assert (tmp_path / "report.json").exists()
    assert (tmp_path / "snapshots.csv").exists()


def test_run_experiment_stage_gating(tmp_path):
    cfg = parse_config(_base_config())
    run_experiment(cfg, tmp_path, stage="sample")
    assert (tmp_path / "measurements.csv").exists()
    assert not (tmp_path / "metrics.csv").exists()


def test_run_experiment_rejects_inapplicable_stage(tmp_path):
    cfg = parse_config(_base_config())
    with pytest.raises(ConfigError):
        run_experiment(cfg, tmp_path, stage="train")


def _cli(args):
    return subprocess.run([sys.executable, "-m", "shred.pipeline.cli", *args],
                          capture_output=True, text=True)


def test_cli_success_exit_0(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(_base_config()))
    out = tmp_path / "out"
    r = _cli(["reconstruct", "--config", str(cfg_path), "--out", str(out)])
    assert r.returncode == 0, r.stderr
    assert "condition_estimate" in r.stdout


def test_cli_validation_error_exit_2(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(_base_config(scenario="bogus")))
    r = _cli(["reconstruct", "--config", str(cfg_path),
              "--out", str(tmp_path / "out")])
    assert r.returncode == 2
    assert "error" in r.stderr.lower()


def test_cli_numerical_failure_exit_3(tmp_path):
    # single stationary sensor + heat equation: degenerate system
    doc = _base_config(operator=[0.0, 0.0, 1.0])
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps(doc))
    r = _cli(["reconstruct", "--config", str(cfg_path),
              "--out", str(tmp_path / "out")])
    assert r.returncode == 3
    assert "condition" in r.stderr.lower() or "singular" in r.stderr.lower()


def test_cli_lists_subcommands():
    r = _cli(["--help"])
    for name in ("simulate", "sample", "reconstruct", "svd", "train",
                 "eval", "report"):
        assert name in r.stdout
