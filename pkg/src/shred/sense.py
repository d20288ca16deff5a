"""Sensor sampling of snapshot matrices and measurement noise.

Sensors live on grid indices (no interpolation), so sampling is an
exact gather and exactness tests stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import IndexOutOfRange, PathLengthMismatch
from .simulate import SnapshotMatrix, TimeGrid

STATIONARY = "stationary"
MOBILE = "mobile"

#: Default measurement noise (field units), after the thermocouple
#: uncertainty that motivates robustness tests.
DEFAULT_NOISE_SIGMA = 0.5


@dataclass(frozen=True)
class SensorSpec:
    """A stationary sensor at one grid index, or a mobile sensor whose
    index path s(t_j) has one entry per time instant."""

    kind: str
    indices: tuple
    id: str = "sensor"

    def __post_init__(self):
        if self.kind not in (STATIONARY, MOBILE):
            raise ValueError(f"unknown sensor kind {self.kind!r}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @classmethod
    def stationary(cls, index: int, id: str = "sensor") -> "SensorSpec":
        return cls(STATIONARY, (index,), id=id)

    @classmethod
    def mobile(cls, path: Sequence[int], id: str = "sensor") -> "SensorSpec":
        return cls(MOBILE, tuple(path), id=id)

    def location_at(self, j: int) -> int:
        """Grid index occupied at time step j."""
        return self.indices[0] if self.kind == STATIONARY else self.indices[j]


@dataclass
class MeasurementTrajectory:
    """Sensor readings over time: rows = sensors, cols = time instants."""

    values: np.ndarray
    sensors: list
    times: TimeGrid
    noise_sigma: float = 0.0

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[0] != len(self.sensors):
            raise PathLengthMismatch(
                f"{v.shape[0]} trajectory rows for {len(self.sensors)} sensors"
            )
        if v.shape[1] != self.times.num_steps:
            raise PathLengthMismatch(
                f"{v.shape[1]} trajectory columns for {self.times.num_steps} instants"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("measurement trajectory contains non-finite entries")
        self.values = v

    @property
    def num_sensors(self) -> int:
        return len(self.sensors)


def _check_sensor(sensor: SensorSpec, num_points: int, num_steps: int) -> None:
    if any(i < 0 or i >= num_points for i in sensor.indices):
        raise IndexOutOfRange(
            f"sensor {sensor.id!r} has an index outside the {num_points}-point grid"
        )
    if sensor.kind == MOBILE and len(sensor.indices) != num_steps:
        raise PathLengthMismatch(
            f"mobile sensor {sensor.id!r} path has {len(sensor.indices)} entries "
            f"for {num_steps} time instants"
        )


def sample(snapshots: SnapshotMatrix, sensors: Sequence[SensorSpec]) -> MeasurementTrajectory:
    """Gather snapshot entries at the sensor locations, exactly."""
    nt = snapshots.times.num_steps
    rows = []
    for sensor in sensors:
        _check_sensor(sensor, snapshots.num_dof, nt)
        if sensor.kind == STATIONARY:
            rows.append(snapshots.values[sensor.indices[0], :])
        else:
            rows.append(snapshots.values[list(sensor.indices), np.arange(nt)])
    return MeasurementTrajectory(np.vstack(rows), list(sensors), snapshots.times)


def add_noise(traj: MeasurementTrajectory, sigma: float, seed) -> MeasurementTrajectory:
    """I.i.d. Gaussian perturbation; deterministic for a fixed seed."""
    if sigma < 0:
        raise ValueError("noise sigma must be non-negative")
    if sigma == 0:
        return MeasurementTrajectory(traj.values.copy(), traj.sensors, traj.times,
                                     noise_sigma=0.0)
    rng = np.random.default_rng(seed)
    noisy = traj.values + rng.normal(scale=sigma, size=traj.values.shape)
    return MeasurementTrajectory(noisy, traj.sensors, traj.times, noise_sigma=sigma)


def random_sensor_configs(grid, num_sensors: int, num_configs: int, seed) -> list:
    """num_configs lists of num_sensors stationary sensors at distinct,
    uniformly drawn grid indices; deterministic under seed."""
    if num_sensors > grid.num_points:
        raise IndexOutOfRange(
            f"cannot place {num_sensors} distinct sensors on a "
            f"{grid.num_points}-point grid"
        )
    rng = np.random.default_rng(seed)
    configs = []
    for c in range(num_configs):
        idx = rng.choice(grid.num_points, size=num_sensors, replace=False)
        configs.append([
            SensorSpec.stationary(int(i), id=f"cfg{c}_s{k}")
            for k, i in enumerate(idx)
        ])
    return configs
