"""Scenario orchestration: simulate -> sample -> (reconstruct | svd +
train) -> evaluate -> emit.

Every stage writes its artifacts under the output directory; reruns
with the same config and seed produce byte-identical CSV metrics and
checkpoints.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..reconstruct import (
    attach_measurements,
    build_coupled_system,
    build_system,
    default_measurement_times,
    reconstruct_field,
    required_trajectory_length,
    solve_coefficients,
    split_coupled_coefficients,
)
from ..rom import (
    compress,
    relative_error,
    stack_parametric,
    thin_svd,
    truncate,
)
from ..sense import SensorSpec, add_noise, random_sensor_configs, sample
from ..shrednet import (
    ShredModel,
    WindowDataset,
    build_windows,
    ensemble_train,
    evaluate,
    predict,
    split_parametric,
    split_temporal,
    train,
)
from ..simulate import (
    GalerkinSystem,
    SnapshotMatrix,
    TimeGrid,
    canonical_basis,
    coupled_mode_matrices,
    coupled_propagators,
    evolve_coupled_linear,
    evolve_galerkin,
    evolve_linear,
    make_snapshots,
)
from ..spectral import OperatorSpec, build_basis, random_real_coefficients, synthesize
from .config import ExperimentConfig
from .io import save_checkpoint, save_measurements, save_snapshots
from .plots import emit_plots

EXACT_SCENARIOS = ("linear_exact", "multi_sensor", "mobile", "coupled")
SHRED_SCENARIOS = ("nonlinear_galerkin", "parametric_shred", "forecast_shred")

STAGE_ORDER = {
    "exact": ["simulate", "sample", "reconstruct", "eval", "report"],
    "shred": ["simulate", "sample", "svd", "train", "eval", "report"],
}


@dataclass
class RunReport:
    scenario: str
    config_hash: str
    timings: dict = dc_field(default_factory=dict)
    metrics: dict = dc_field(default_factory=dict)
    artifacts: list = dc_field(default_factory=list)

    def to_json(self) -> str:
        doc = {
            "scenario": self.scenario,
            "config_hash": self.config_hash,
            "timings": {k: round(v, 6) for k, v in self.timings.items()},
            "metrics": self.metrics,
            "artifacts": self.artifacts,
        }
        return json.dumps(doc, sort_keys=True, indent=2)


def write_metrics_csv(path, metrics: dict) -> None:
    lines = ["metric,value"]
    for key in sorted(metrics):
        lines.append(f"{key},{repr(float(metrics[key]))}")
    Path(path).write_text("\n".join(lines) + "\n")


class _Stages:
    """Tracks which stages run and times them."""

    def __init__(self, kind: str, requested: str, report: RunReport):
        if requested not in STAGE_ORDER[kind]:
            raise ConfigError(
                f"stage {requested!r} does not apply to this scenario "
                f"(expected one of {STAGE_ORDER[kind]})"
            )
        self.sequence = STAGE_ORDER[kind]
        self.last = requested
        self.report = report

    def active(self, stage: str) -> bool:
        return self.sequence.index(stage) <= self.sequence.index(self.last)

    def timed(self, stage: str):
        report = self.report

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                report.timings[stage] = (
                    report.timings.get(stage, 0.0) + time.perf_counter() - self.start
                )

        return _Timer()


def run_experiment(cfg: ExperimentConfig, out_dir, stage: str = "report") -> RunReport:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = RunReport(scenario=cfg.scenario, config_hash=cfg.config_hash)
    kind = "exact" if cfg.scenario in EXACT_SCENARIOS else "shred"
    stages = _Stages(kind, stage, report)

    if cfg.scenario == "coupled":
        _run_coupled(cfg, out, stages, report)
    elif cfg.scenario in EXACT_SCENARIOS:
        _run_exact_linear(cfg, out, stages, report)
    elif cfg.scenario == "parametric_shred":
        _run_parametric_shred(cfg, out, stages, report)
    else:
        _run_forecast_shred(cfg, out, stages, report)

    if stages.active("report"):
        report_path = out / "report.json"
        report.artifacts.append(str(report_path))
        report_path.write_text(report.to_json() + "\n")
    return report


# -- shared helpers ----------------------------------------------------------

def _initial_coefficients(basis, cfg: ExperimentConfig) -> np.ndarray:
    """Random real-field coefficients, amplitude decaying geometrically
    with |n| so the modal spectrum is controllable from the config."""
    a0 = random_real_coefficients(basis, cfg.seed, scale=cfg.initial_scale)
    decay = cfg.mode_decay ** np.abs(basis.wavenumber_indices)
    return a0 * decay


def _resolve_sensors(cfg: ExperimentConfig, num_meas_times: int) -> list:
    s = cfg.sensors
    if "stationary" in s:
        return [SensorSpec.stationary(i, id=f"s{k}")
                for k, i in enumerate(s["stationary"])]
    if "mobile" in s:
        return [SensorSpec.mobile(s["mobile"], id="mobile0")]
    if cfg.scenario == "mobile":
        rng = np.random.default_rng(cfg.seed + 1)
        path = rng.choice(cfg.grid.num_points, size=num_meas_times,
                          replace=num_meas_times > cfg.grid.num_points)
        return [SensorSpec.mobile(path.tolist(), id="mobile0")]
    if "random" in s:
        configs = random_sensor_configs(cfg.grid, s["random"]["num_sensors"],
                                        s["random"]["num_configs"], cfg.seed + 1)
        return configs[0]
    # fall back to a single off-center stationary sensor (avoids the
    # symmetric midpoint where odd eigenfunctions vanish)
    return [SensorSpec.stationary(cfg.grid.num_points // 3, id="s0")]


def _write_stage_files(out, stages, report, truth=None, traj=None):
    if truth is not None:
        p = out / "snapshots.csv"
        save_snapshots(p, truth)
        report.artifacts.append(str(p))
    if traj is not None:
        p = out / "measurements.csv"
        save_measurements(p, traj.values, traj.times.instants)
        report.artifacts.append(str(p))


# -- exact linear-theory scenarios -------------------------------------------

def _run_exact_linear(cfg: ExperimentConfig, out, stages: _Stages, report: RunReport):
    basis = build_basis(cfg.grid, cfg.operator, cfg.num_modes)
    N = cfg.num_modes
    a0 = _initial_coefficients(basis, cfg)

    with stages.timed("simulate"):
        truth = make_snapshots(
            evolve_linear(a0, basis, cfg.time, t_ref=0.0), basis, cfg.grid,
            times=cfg.time,
        )
    _write_stage_files(out, stages, report, truth=truth)
    if not stages.active("sample"):
        return

    with stages.timed("sample"):
        if cfg.scenario == "mobile":
            meas_times = default_measurement_times(basis, N)
        else:
            m = len(cfg.sensors.get("stationary", [0])) or 1
            meas_times = default_measurement_times(
                basis, required_trajectory_length(N, m))
        sensors = _resolve_sensors(cfg, meas_times.num_steps)
        meas_snap = make_snapshots(
            evolve_linear(a0, basis, meas_times, t_ref=0.0), basis, cfg.grid,
            times=meas_times,
        )
        traj = sample(meas_snap, sensors)
        if cfg.noise_sigma > 0:
            traj = add_noise(traj, cfg.noise_sigma, cfg.seed + 2)
    _write_stage_files(out, stages, report, traj=traj)
    if not stages.active("reconstruct"):
        return

    with stages.timed("reconstruct"):
        system = build_system(basis, sensors, meas_times)
        attach_measurements(system, traj)
        a_rec, diag = solve_coefficients(system)
        recon = reconstruct_field(a_rec, basis, cfg.time, cfg.grid)
    report.metrics["condition_estimate"] = diag.condition_estimate
    report.metrics["solve_residual"] = diag.residual
    if not stages.active("eval"):
        return

    with stages.timed("eval"):
        report.metrics["field_relative_error"] = relative_error(recon, truth)
        report.metrics["coefficient_relative_error"] = float(
            np.linalg.norm(a_rec - a0) / np.linalg.norm(a0)
        )
        p = out / "metrics.csv"
        write_metrics_csv(p, report.metrics)
        report.artifacts.append(str(p))

    if stages.active("report"):
        with stages.timed("report"):
            series = {}
            for sensor in sensors:
                if sensor.kind == "stationary":
                    i = sensor.indices[0]
                    series[sensor.id] = {
                        "truth": truth.values[i, :],
                        "prediction": recon.values[i, :],
                    }
            report.artifacts.extend(emit_plots(
                out, series, truth=truth.values, prediction=recon.values,
                instants=cfg.time.instants,
            ))


def _run_coupled(cfg: ExperimentConfig, out, stages: _Stages, report: RunReport):
    basis = canonical_basis(cfg.grid, cfg.num_modes)
    N = cfg.num_modes
    ops = cfg.coupled_operators
    a0 = _initial_coefficients(basis, cfg)
    b0 = random_real_coefficients(basis, cfg.seed + 10, scale=cfg.initial_scale)
    u0 = synthesize(a0, basis)
    v0 = synthesize(b0, basis)

    with stages.timed("simulate"):
        truth_u, truth_v = evolve_coupled_linear(
            ops, u0, v0, cfg.grid, N, cfg.time, t_ref=0.0)
    _write_stage_files(out, stages, report, truth=truth_u)
    if not stages.active("sample"):
        return

    with stages.timed("sample"):
        S = coupled_mode_matrices(ops, basis)
        eigs = np.concatenate([np.linalg.eigvals(S[n]) for n in range(N)])
        meas_times = _times_for_eigenvalues(eigs, 2 * N)
        meas_u, _ = evolve_coupled_linear(ops, u0, v0, cfg.grid, N, meas_times,
                                          t_ref=0.0)
        sensors = _resolve_sensors(cfg, meas_times.num_steps)
        traj = sample(meas_u, sensors[:1])
        if cfg.noise_sigma > 0:
            traj = add_noise(traj, cfg.noise_sigma, cfg.seed + 2)
    _write_stage_files(out, stages, report, traj=traj)
    if not stages.active("reconstruct"):
        return

    with stages.timed("reconstruct"):
        system = build_coupled_system(ops, basis, sensors[0], meas_times)
        attach_measurements(system, traj)
        x, diag = solve_coefficients(system)
        a_rec, b_rec = split_coupled_coefficients(x)
        recon_u, recon_v = _coupled_fields_from_coefficients(
            ops, basis, a_rec, b_rec, cfg.time, cfg.grid)
    report.metrics["condition_estimate"] = diag.condition_estimate
    report.metrics["solve_residual"] = diag.residual
    if not stages.active("eval"):
        return

    with stages.timed("eval"):
        report.metrics["u_relative_error"] = relative_error(recon_u, truth_u)
        report.metrics["v_relative_error"] = relative_error(recon_v, truth_v)
        p = out / "metrics.csv"
        write_metrics_csv(p, report.metrics)
        report.artifacts.append(str(p))

    if stages.active("report"):
        with stages.timed("report"):
            report.artifacts.extend(emit_plots(
                out, {}, truth=truth_v.values, prediction=recon_v.values,
                instants=cfg.time.instants, prefix="v_",
            ))


def _times_for_eigenvalues(eigs: np.ndarray, count: int) -> TimeGrid:
    dt_bounds = [1.0]
    im_max = np.abs(eigs.imag).max(initial=0.0)
    re_max = np.abs(eigs.real).max(initial=0.0)
    if im_max > 0:
        dt_bounds.append(np.pi / (2.0 * im_max))
    if re_max > 0 and count > 1:
        dt_bounds.append(9.0 / (re_max * (count - 1)))
    return TimeGrid(min(dt_bounds) * np.arange(count))


def _coupled_fields_from_coefficients(ops, basis, a, b, times: TimeGrid, grid):
    S = coupled_mode_matrices(ops, basis)
    N = basis.num_modes
    a_traj = np.empty((N, times.num_steps), dtype=complex)
    b_traj = np.empty((N, times.num_steps), dtype=complex)
    for j, t in enumerate(times.instants):
        E = coupled_propagators(S, t)
        a_traj[:, j] = E[:, 0, 0] * a + E[:, 0, 1] * b
        b_traj[:, j] = E[:, 1, 0] * a + E[:, 1, 1] * b
    return (make_snapshots(a_traj, basis, grid, "u", times),
            make_snapshots(b_traj, basis, grid, "v", times))


# -- SHRED scenarios ----------------------------------------------------------

def _simulate_single_trajectory(cfg: ExperimentConfig) -> SnapshotMatrix:
    if cfg.scenario == "nonlinear_galerkin":
        basis = canonical_basis(cfg.grid, cfg.num_modes)
        a0 = _initial_coefficients(basis, cfg)
        sys = GalerkinSystem.burgers(basis, cfg.burgers_viscosity)
        dt = cfg.dt_internal
        if dt is None:
            span = cfg.time.instants[1] - cfg.time.instants[0]
            lam_max = max(np.abs(sys.linear_eigenvalues).max(), 1.0)
            dt = span / max(1, math.ceil(span * lam_max / 1.0))
        traj = evolve_galerkin(sys, a0, cfg.time, dt)
        return make_snapshots(traj, basis, cfg.grid, times=cfg.time)
    basis = build_basis(cfg.grid, cfg.operator, cfg.num_modes)
    a0 = _initial_coefficients(basis, cfg)
    return make_snapshots(evolve_linear(a0, basis, cfg.time, t_ref=0.0),
                          basis, cfg.grid, times=cfg.time)


def _run_forecast_shred(cfg: ExperimentConfig, out, stages: _Stages, report: RunReport):
    with stages.timed("simulate"):
        truth = _simulate_single_trajectory(cfg)
    _write_stage_files(out, stages, report, truth=truth)
    if not stages.active("sample"):
        return

    nt = cfg.time.num_steps
    tr_range, va_range, te_range = split_temporal(nt)
    with stages.timed("sample"):
        sensors = _resolve_sensors(cfg, nt)
        traj = sample(truth, sensors)
        if cfg.noise_sigma > 0:
            traj = add_noise(traj, cfg.noise_sigma, cfg.seed + 2)
    _write_stage_files(out, stages, report, traj=traj)
    if not stages.active("svd"):
        return

    with stages.timed("svd"):
        train_block = SnapshotMatrix(
            truth.values[:, tr_range.start:tr_range.stop], truth.grid,
            TimeGrid(cfg.time.instants[tr_range.start:tr_range.stop]))
        bundle = truncate(thin_svd(train_block),
                          min(cfg.svd_rank, min(train_block.values.shape)))
        latent_all = compress(truth, bundle)
        p = out / "svd.ckpt"
        save_checkpoint(p, bundle)
        report.artifacts.append(str(p))
    if not stages.active("train"):
        return

    with stages.timed("train"):
        windows = build_windows(traj, latent_all, cfg.lag)
        tcfg = cfg.train_config()
        model = ShredModel.build(
            input_width=windows.inputs.shape[2],
            output_width=bundle.rank,
            lag=cfg.lag,
            hidden_size=cfg.train.get("hidden_size", 64),
            num_lstm_layers=cfg.train.get("num_lstm_layers", 2),
            decoder_widths=cfg.train.get("decoder_widths", [350, 400]),
            seed=cfg.seed,
        )
        model, history = train(model, windows.subset(list(tr_range)),
                               windows.subset(list(va_range)), tcfg)
        p = out / "model.ckpt"
        save_checkpoint(p, model)
        report.artifacts.append(str(p))
        hist_path = out / "history.csv"
        lines = ["epoch,train_loss,valid_loss"]
        for e, (tl, vl) in enumerate(zip(history.train_loss, history.valid_loss)):
            lines.append(f"{e},{tl!r},{vl!r}")
        hist_path.write_text("\n".join(lines) + "\n")
        report.artifacts.append(str(hist_path))
    if not stages.active("eval"):
        return

    with stages.timed("eval"):
        te_idx = list(te_range)
        test_truth = truth.values[:, te_idx]
        metrics = evaluate(model, bundle, windows.inputs[te_idx], test_truth,
                           sensors=[s for s in sensors if s.kind == "stationary"])
        report.metrics["test_latent_relative_error"] = metrics.latent_relative_error
        report.metrics["test_field_relative_error"] = metrics.full_field_relative_error
        report.metrics["rank_truncation_floor"] = relative_error(
            bundle.U @ (bundle.U.T @ test_truth), test_truth)
        # tracking error against the (possibly noisy) inputs at the sensors
        sensor_dev = []
        for k, sensor in enumerate(sensors):
            if sensor.kind != "stationary":
                continue
            i = sensor.indices[0]
            pred = metrics.sensor_series[sensor.id]["prediction"]
            sensor_dev.append(np.sqrt(np.mean((pred - traj.values[k, te_idx]) ** 2)))
        if sensor_dev:
            report.metrics["sensor_tracking_rmse"] = float(np.max(sensor_dev))
        p = out / "metrics.csv"
        write_metrics_csv(p, report.metrics)
        report.artifacts.append(str(p))

    if stages.active("report"):
        with stages.timed("report"):
            pred_field = bundle.U @ predict(model, windows.inputs[te_idx]).T
            report.artifacts.extend(emit_plots(
                out, metrics.sensor_series, truth=test_truth,
                prediction=pred_field, instants=cfg.time.instants[te_idx],
            ))


def _run_parametric_shred(cfg: ExperimentConfig, out, stages: _Stages, report: RunReport):
    values = cfg.parametric["values"]
    base = np.array(cfg.operator.coefficients)

    with stages.timed("simulate"):
        snaps = []
        for mu in values:
            op_mu = OperatorSpec(tuple(mu * base))
            basis = build_basis(cfg.grid, op_mu, cfg.num_modes)
            a0 = _initial_coefficients(basis, cfg)
            snaps.append(make_snapshots(
                evolve_linear(a0, basis, cfg.time, t_ref=0.0), basis, cfg.grid,
                times=cfg.time))
        stacked = stack_parametric(snaps)
    _write_stage_files(out, stages, report, truth=stacked)
    if not stages.active("sample"):
        return

    tr_idx, va_idx, te_idx = split_parametric(len(values), seed=cfg.seed)
    rand = cfg.sensors.get("random", {"num_sensors": 3, "num_configs": 10})
    sensor_configs = random_sensor_configs(
        cfg.grid, rand["num_sensors"], rand["num_configs"], cfg.seed + 1)

    with stages.timed("sample"):
        trajs = [sample(s, sensor_configs[0]) for s in snaps]
        if cfg.noise_sigma > 0:
            trajs = [add_noise(t, cfg.noise_sigma, cfg.seed + 2 + i)
                     for i, t in enumerate(trajs)]
    _write_stage_files(out, stages, report, traj=trajs[0])
    if not stages.active("svd"):
        return

    with stages.timed("svd"):
        train_stack = stack_parametric([snaps[i] for i in tr_idx])
        bundle = truncate(thin_svd(train_stack),
                          min(cfg.svd_rank, min(train_stack.values.shape)))
        p = out / "svd.ckpt"
        save_checkpoint(p, bundle)
        report.artifacts.append(str(p))
    if not stages.active("train"):
        return

    lag = cfg.lag
    tcfg = cfg.train_config()

    def datasets_for(sensors):
        def block(indices):
            parts = [
                build_windows(
                    add_noise(sample(snaps[i], sensors), cfg.noise_sigma,
                              cfg.seed + 2 + i)
                    if cfg.noise_sigma > 0 else sample(snaps[i], sensors),
                    compress(snaps[i], bundle), lag, params=[values[i]])
                for i in indices
            ]
            return WindowDataset(
                inputs=np.concatenate([d.inputs for d in parts]),
                targets=np.concatenate([d.targets for d in parts]),
                padded=np.concatenate([d.padded for d in parts]),
            )
        return block(tr_idx), block(va_idx), block(te_idx)

    def make_member(sensors, seed):
        train_ds, valid_ds, test_ds = datasets_for(sensors)
        model = ShredModel.build(
            input_width=train_ds.inputs.shape[2],
            output_width=bundle.rank,
            lag=lag,
            hidden_size=cfg.train.get("hidden_size", 64),
            num_lstm_layers=cfg.train.get("num_lstm_layers", 2),
            decoder_widths=cfg.train.get("decoder_widths", [350, 400]),
            seed=seed,
        )
        return model, train_ds, valid_ds, test_ds.inputs

    with stages.timed("train"):
        result = ensemble_train(make_member, sensor_configs, tcfg, bundle)
        for i, model in enumerate(result.models):
            p = out / f"model_{i:02d}.ckpt"
            save_checkpoint(p, model)
            report.artifacts.append(str(p))
    if not stages.active("eval"):
        return

    with stages.timed("eval"):
        test_truth = np.hstack([snaps[i].values for i in te_idx])
        latent_true = bundle.U.T @ test_truth
        latent_mean = bundle.U.T @ result.mean_field
        report.metrics["mean_latent_relative_error"] = relative_error(
            latent_mean, latent_true)
        report.metrics["mean_field_relative_error"] = relative_error(
            result.mean_field, test_truth)
        report.metrics["rank_truncation_floor"] = relative_error(
            bundle.U @ latent_true, test_truth)
        report.metrics["ensemble_std_mean"] = float(result.std_field.mean())
        p = out / "metrics.csv"
        write_metrics_csv(p, report.metrics)
        report.artifacts.append(str(p))

    if stages.active("report"):
        with stages.timed("report"):
            report.artifacts.extend(emit_plots(
                out, {}, truth=test_truth, prediction=result.mean_field,
            ))
