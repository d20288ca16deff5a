"""Experiment configuration: schema-validated JSON in, dataclass out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from ..errors import ConfigError
from ..shrednet import TrainConfig
from ..simulate import TimeGrid
from ..spectral import OperatorSpec, SpatialGrid

SCENARIOS = ("linear_exact", "multi_sensor", "mobile", "coupled",
             "nonlinear_galerkin", "parametric_shred", "forecast_shred")


def _schema() -> dict:
    text = resources.files("shred.pipeline").joinpath("experiment.schema.json").read_text()
    return json.loads(text)


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``raw`` keeps the exact JSON
    document for hashing and round trips."""

    scenario: str
    grid: SpatialGrid
    time: TimeGrid
    num_modes: int
    raw: dict
    operator: Optional[OperatorSpec] = None
    coupled_operators: Optional[list] = None
    burgers_viscosity: Optional[float] = None
    dt_internal: Optional[float] = None
    initial_scale: float = 1.0
    mode_decay: float = 1.0
    sensors: dict = field(default_factory=dict)
    noise_sigma: float = 0.0
    svd_rank: Optional[int] = None
    parametric: Optional[dict] = None
    train: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: Optional[str] = None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()
        ).hexdigest()

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        t = self.train
        return TrainConfig(
            learning_rate=t.get("learning_rate", 1e-3),
            batch_size=t.get("batch_size", 64),
            max_epochs=t.get("max_epochs", 2000),
            patience=t.get("patience", 50),
            seed=self.seed if seed is None else seed,
        )

    @property
    def lag(self) -> int:
        return self.train.get("lag", 50)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a JSON document against the shipped schema and build the
    config object.  Unknown keys are rejected by the schema."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message) from exc

    g = doc["grid"]
    grid = SpatialGrid(length=g["length"], num_points=g["num_points"],
                       boundary_kind=g.get("boundary", "periodic"))
    t = doc["time"]
    time = TimeGrid.uniform(t["t_start"], t["t_end"], t["num_steps"])

    operator = None
    if "operator" in doc:
        operator = OperatorSpec(tuple(doc["operator"]))
    coupled = None
    if "coupled_operators" in doc:
        coupled = [OperatorSpec(tuple(c)) if any(c) else None
                   for c in doc["coupled_operators"]]

    cfg = ExperimentConfig(
        scenario=doc["scenario"],
        grid=grid,
        time=time,
        num_modes=doc["num_modes"],
        raw=doc,
        operator=operator,
        coupled_operators=coupled,
        burgers_viscosity=doc.get("burgers_viscosity"),
        dt_internal=doc.get("dt_internal"),
        initial_scale=doc.get("initial_scale", 1.0),
        mode_decay=doc.get("mode_decay", 1.0),
        sensors=doc.get("sensors", {}),
        noise_sigma=doc.get("noise_sigma", 0.0),
        svd_rank=doc.get("svd_rank"),
        parametric=doc.get("parametric"),
        train=doc.get("train", {}),
        seed=doc.get("seed", 0),
        output_dir=doc.get("output_dir"),
    )
    _check_scenario_requirements(cfg)
    return cfg


def _check_scenario_requirements(cfg: ExperimentConfig) -> None:
    need = {
        "linear_exact": ["operator"],
        "multi_sensor": ["operator"],
        "mobile": ["operator"],
        "coupled": ["coupled_operators"],
        "nonlinear_galerkin": ["burgers_viscosity", "svd_rank"],
        "parametric_shred": ["operator", "parametric", "svd_rank"],
        "forecast_shred": ["operator", "svd_rank"],
    }
    for fieldname in need[cfg.scenario]:
        if getattr(cfg, fieldname) is None:
            raise ConfigError(
                f"scenario {cfg.scenario!r} requires the {fieldname!r} field"
            )


def load_config(path) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc)


def dump_config(cfg: ExperimentConfig) -> str:
    """Serialize back to canonical JSON; parse(dump(cfg)) == cfg.raw."""
    return json.dumps(cfg.raw, sort_keys=True, indent=2)
