"""End-to-end experiment pipeline, from a JSON config to metrics on disk.

The pipeline ties the library together: it validates a config against
the shipped JSON schema, simulates the scenario, samples sensors,
reconstructs or trains, and writes snapshots, measurements, metrics,
and SVG plots into an output directory.  The same experiments are
reachable from the command line via ``python -m shred.pipeline.cli``
(subcommands simulate / sample / reconstruct / svd / train / eval /
report, exit codes 0 = success, 2 = bad config, 3 = numerical failure).
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from shred.pipeline import parse_config, run_experiment

workdir = Path(tempfile.mkdtemp(prefix="shred-demo-"))

doc = {
    "scenario": "multi_sensor",
    "grid": {"length": 1.0, "num_points": 128, "boundary": "periodic"},
    "time": {"t_start": 0.0, "t_end": 0.05, "num_steps": 51},
    "num_modes": 17,
    "operator": [0, 0, 1],
    "sensors": {"stationary": [12, 57]},
    "seed": 7,
}

# 1) library entry point
out_dir = workdir / "heat_two_sensors"
report = run_experiment(parse_config(doc), out_dir, stage="report")
print("library run:", json.dumps(report.metrics, indent=None, sort_keys=True))
for p in sorted(out_dir.iterdir()):
    print("  wrote", p.name)

# 2) the same config through the CLI
cfg_path = workdir / "experiment.json"
cfg_path.write_text(json.dumps(doc))
proc = subprocess.run(
    [sys.executable, "-m", "shred.pipeline.cli", "reconstruct",
     "--config", str(cfg_path), "--out", str(workdir / "cli_run")],
    capture_output=True, text=True,
)
print(f"cli run: exit code {proc.returncode}")
print(proc.stdout.strip())

# 3) a broken config is rejected with exit code 2, not a traceback
bad = dict(doc, scenario="time_travel")
bad_path = workdir / "bad.json"
bad_path.write_text(json.dumps(bad))
proc = subprocess.run(
    [sys.executable, "-m", "shred.pipeline.cli", "reconstruct",
     "--config", str(bad_path), "--out", str(workdir / "bad_run")],
    capture_output=True, text=True,
)
print(f"bad config: exit code {proc.returncode} ({proc.stderr.strip()})")
