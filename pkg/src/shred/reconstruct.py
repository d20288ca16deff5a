"""Exact recovery of modal coefficients from sensor time trajectories.

A measurement of u at location x_s and time t_j is a linear functional
of the unknown t = 0 coefficients:

    u(x_s, t_j) = sum_n a_n exp(lambda_n t_j) phi_n(x_s)

Collecting N such measurements gives a square system A a = b whose rows
index measurements (time-major, sensors inner) and whose columns index
modes.  Solving it determines the field for all t, past and future.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CountMismatch, IllConditioned, LayoutMismatch, SingularSystem
from .sense import MeasurementTrajectory, SensorSpec, _check_sensor
from .simulate import (
    SnapshotMatrix,
    TimeGrid,
    coupled_mode_matrices,
    coupled_propagators,
    evolve_linear,
    make_snapshots,
)
from .spectral import ModalBasis, OperatorSpec, SpatialGrid

#: Condition-number guard: beyond this the system is reported as
#: IllConditioned instead of silently solved.
CONDITION_LIMIT = 1e12


@dataclass
class TrajectorySystem:
    """The square measurement system A x = b.

    ``row_labels`` records (sensor_id, time_index, grid_index) per row so
    trajectories can be attached unambiguously.
    """

    A: np.ndarray
    row_labels: list
    b: Optional[np.ndarray] = None
    condition_estimate: float = field(init=False, default=np.nan)

    def __post_init__(self):
        # condition of the column-equilibrated matrix: the scaling is
        # undone after the solve, so this is the conditioning that the
        # factorization actually sees
        norms = np.linalg.norm(self.A, axis=0)
        scale = np.where(norms > 0, norms, 1.0)
        self.condition_estimate = float(np.linalg.cond(self.A / scale))
        self._column_scale = scale
        self._has_zero_column = bool(np.any(norms == 0))


@dataclass
class SolveDiagnostics:
    condition_estimate: float
    residual: float


def required_trajectory_length(N: int, num_sensors: int) -> int:
    """Time points needed for N modes with m sensors: ceil(N/m)."""
    if num_sensors < 1:
        raise ValueError("need at least one sensor")
    return math.ceil(N / num_sensors)


def _measurement_rows(sensors: Sequence[SensorSpec], times: TimeGrid, N: int) -> list:
    """Row layout: time-major, sensors in listed order within each time.

    When m does not divide N the surplus rows (highest sensor index at
    the last time) are dropped, keeping the system square.
    """
    m = len(sensors)
    nt = times.num_steps
    total = m * nt
    if total < N:
        raise CountMismatch(
            f"{total} scalar measurements for {N} unknown coefficients"
        )
    if total > N and nt != required_trajectory_length(N, m):
        raise CountMismatch(
            f"{total} measurements for {N} unknowns: provide "
            f"{required_trajectory_length(N, m)} time points for {m} sensors"
        )
    rows = []
    for j in range(nt):
        for s_idx, sensor in enumerate(sensors):
            rows.append((s_idx, j))
    return rows[:N]


def build_system(basis: ModalBasis, sensors: Sequence[SensorSpec],
                 times: TimeGrid) -> TrajectorySystem:
    """Assemble A with entries exp(lambda_n t_j) * phi_n(x_s).

    Mobile sensors use their path location x_{s(t_j)} per row.  Times
    enter as absolute values: the unknowns are t = 0 coefficients.
    """
    N = basis.num_modes
    for sensor in sensors:
        _check_sensor(sensor, basis.grid.num_points, times.num_steps)
    rows = _measurement_rows(sensors, times, N)

    phi = basis.eigenfunctions  # (M, N)
    lam = basis.eigenvalues
    A = np.empty((N, N), dtype=complex)
    labels = []
    for r, (s_idx, j) in enumerate(rows):
        sensor = sensors[s_idx]
        loc = sensor.location_at(j)
        t = times.instants[j]
        A[r, :] = np.exp(lam * t) * phi[loc, :]
        labels.append((sensor.id, j, loc))
    sys = TrajectorySystem(A=A, row_labels=labels)
    sys._row_index = rows  # (sensor position, time index) pairs, for attach
    return sys


def attach_measurements(sys: TrajectorySystem, traj: MeasurementTrajectory) -> TrajectorySystem:
    """Populate b from a trajectory whose rows are the system's sensors."""
    rows = getattr(sys, "_row_index", None)
    if rows is None or len(rows) != sys.A.shape[0]:
        raise LayoutMismatch("system was not built by build_system")
    max_s = max(s for s, _ in rows)
    max_j = max(j for _, j in rows)
    if traj.num_sensors <= max_s or traj.values.shape[1] <= max_j:
        raise LayoutMismatch(
            f"trajectory {traj.values.shape} does not cover the system's "
            f"{max_s + 1} sensors x {max_j + 1} time points"
        )
    b = np.array([traj.values[s, j] for s, j in rows], dtype=complex)
    sys.b = b
    return sys


def solve_coefficients(sys: TrajectorySystem):
    """Solve A a = b; returns (a, SolveDiagnostics).

    Raises IllConditioned above CONDITION_LIMIT (sensor at an
    eigenfunction node, degenerate time spacing, or colinear rows from
    repeated eigenvalues) and SingularSystem for exact rank deficiency.
    """
    if sys.b is None:
        raise LayoutMismatch("measurements have not been attached")
    if sys._has_zero_column:
        raise SingularSystem(
            "a mode is invisible to every measurement (sensor at an "
            "eigenfunction node?)"
        )
    cond = sys.condition_estimate
    if not np.isfinite(cond):
        raise SingularSystem("measurement matrix is singular")
    if cond > CONDITION_LIMIT:
        raise IllConditioned(
            f"condition estimate {cond:.3e} exceeds {CONDITION_LIMIT:.0e}; "
            "check sensor placement and time spacing"
        )
    try:
        A_eq = sys.A / sys._column_scale
        y = np.linalg.solve(A_eq, sys.b)
        # two steps of iterative refinement with extended-precision
        # residuals: recovers the digits the factorization loses on
        # gradually decaying generalized-Vandermonde columns
        A_ext = A_eq.astype(np.clongdouble)
        b_ext = sys.b.astype(np.clongdouble)
        for _ in range(2):
            r = np.asarray(b_ext - A_ext @ y.astype(np.clongdouble), dtype=complex)
            y = y + np.linalg.solve(A_eq, r)
        a = y / sys._column_scale
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    b_norm = np.linalg.norm(sys.b)
    residual = np.linalg.norm(sys.A @ a - sys.b) / (b_norm if b_norm > 0 else 1.0)
    return a, SolveDiagnostics(condition_estimate=cond, residual=float(residual))


def reconstruct_field(a: np.ndarray, basis: ModalBasis, eval_times: TimeGrid,
                      grid: SpatialGrid) -> SnapshotMatrix:
    """Full field at arbitrary instants from t = 0 coefficients.

    The theory is global in t: evaluation times may lie outside the
    measurement window.
    """
    traj = evolve_linear(a, basis, eval_times, t_ref=0.0)
    return make_snapshots(traj, basis, grid, times=eval_times)


def default_measurement_times(basis: ModalBasis, count: int,
                              t_start: float = 0.0) -> TimeGrid:
    """Uniform instants keeping the trajectory system well conditioned.

    The spacing satisfies max|Im lambda| * dt <= pi/2 (no phase
    wrapping) and the window keeps max|Re lambda| * T <= 9 so decaying
    modes remain above ~1e-4 of their initial size.
    """
    lam = basis.eigenvalues
    dt_bounds = [1.0]
    im_max = np.abs(lam.imag).max(initial=0.0)
    re_max = np.abs(lam.real).max(initial=0.0)
    if im_max > 0:
        dt_bounds.append(np.pi / (2.0 * im_max))
    if re_max > 0 and count > 1:
        dt_bounds.append(9.0 / (re_max * (count - 1)))
    dt = min(dt_bounds)
    return TimeGrid(t_start + dt * np.arange(count))


def build_coupled_system(ops: Sequence[OperatorSpec], basis: ModalBasis,
                         sensor: SensorSpec, times: TimeGrid) -> TrajectorySystem:
    """System for u-only measurements of the coupled pair (u, v).

    The stacked unknowns are [a; b], the t = 0 modal coefficients of u
    and v.  Each row uses the per-mode 2x2 propagator E(t_j):

        u(x_s, t_j) = sum_n (E11 a_n + E12 b_n) phi_n(x_s)

    Requires exactly 2N scalar measurements.
    """
    N = basis.num_modes
    _check_sensor(sensor, basis.grid.num_points, times.num_steps)
    if times.num_steps != 2 * N:
        raise CountMismatch(
            f"coupled recovery needs 2N = {2 * N} measurements, "
            f"got {times.num_steps}"
        )
    S = coupled_mode_matrices(ops, basis)
    phi = basis.eigenfunctions
    A = np.empty((2 * N, 2 * N), dtype=complex)
    labels = []
    rows = []
    for j, t in enumerate(times.instants):
        loc = sensor.location_at(j)
        E = coupled_propagators(S, t)
        A[j, :N] = E[:, 0, 0] * phi[loc, :]
        A[j, N:] = E[:, 0, 1] * phi[loc, :]
        labels.append((sensor.id, j, loc))
        rows.append((0, j))
    sys = TrajectorySystem(A=A, row_labels=labels)
    sys._row_index = rows
    return sys


def split_coupled_coefficients(x: np.ndarray):
    """Split the stacked solution of a coupled system into (a, b)."""
    N = x.size // 2
    return x[:N], x[N:]
