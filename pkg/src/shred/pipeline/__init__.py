"""Experiment orchestration: configs, file formats, runner, plots, CLI."""

from .config import ExperimentConfig, dump_config, load_config, parse_config
from .io import (
    load_checkpoint,
    load_measurements,
    load_snapshots,
    save_checkpoint,
    save_measurements,
    save_snapshots,
)
from .plots import emit_plots, svg_heatmap, svg_line_plot
from .runner import RunReport, run_experiment, write_metrics_csv

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "dump_config",
    "emit_plots",
    "load_checkpoint",
    "load_config",
    "load_measurements",
    "load_snapshots",
    "parse_config",
    "run_experiment",
    "save_checkpoint",
    "save_measurements",
    "save_snapshots",
    "svg_heatmap",
    "svg_line_plot",
    "write_metrics_csv",
]
