"""Time evolution in modal coordinates and snapshot-matrix assembly.

Linear problems use exact exponentials (no stepping error); nonlinear
Galerkin systems are integrated with fixed-step classical RK4; coupled
two-field linear systems evolve each wavenumber with a 2x2 matrix
exponential.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .errors import (
    BlowUp,
    DimensionMismatch,
    StepTooLarge,
    UnsupportedBoundaryOperator,
)
from .spectral import (
    DIRICHLET0,
    ModalBasis,
    OperatorSpec,
    SpatialGrid,
    build_basis,
    project,
    synthesize,
)

#: Any modal amplitude beyond this is treated as a blow-up.
BLOWUP_LIMIT = 1e12

#: RK4 stability heuristic: require |lambda|_max * dt below this.
RK4_STABILITY = 2.5


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample instants t_j."""

    instants: np.ndarray

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.instants, dtype=float))
        if t.size == 0:
            raise ValueError("time grid needs at least one instant")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("time instants must be strictly increasing")
        object.__setattr__(self, "instants", t)

    @classmethod
    def uniform(cls, t_start: float, t_end: float, num_steps: int) -> "TimeGrid":
        if t_end <= t_start:
            raise ValueError("t_end must exceed t_start")
        return cls(np.linspace(t_start, t_end, num_steps))

    @property
    def num_steps(self) -> int:
        return self.instants.size

    @property
    def t_start(self) -> float:
        return float(self.instants[0])

    @property
    def t_end(self) -> float:
        return float(self.instants[-1])


@dataclass
class SnapshotMatrix:
    """Full-order field samples: rows = spatial DOF, cols = time instants.

    ``param_ranges`` is filled by rom.stack_parametric to record which
    column block belongs to which parameter value.
    """

    values: np.ndarray
    grid: SpatialGrid
    times: TimeGrid
    field_name: str = "u"
    param_ranges: Optional[list] = field(default=None)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch("snapshot values must be a 2-D matrix")
        if v.shape[1] != self.times.num_steps:
            raise DimensionMismatch(
                f"{v.shape[1]} snapshot columns vs {self.times.num_steps} time instants"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("snapshot matrix contains non-finite entries")
        self.values = v

    @property
    def num_dof(self) -> int:
        return self.values.shape[0]


class GalerkinSystem:
    """Coupled modal ODEs da_n/dt = f_n(a) over a fixed basis.

    Right-hand sides preserve conjugate symmetry so real fields stay
    real; use the ``linear``/``burgers``/``custom`` constructors.
    """

    def __init__(self, basis: ModalBasis, rhs: Callable[[np.ndarray, float], np.ndarray],
                 linear_eigenvalues: Optional[np.ndarray] = None, name: str = "custom"):
        self.basis = basis
        self.rhs = rhs
        self.linear_eigenvalues = linear_eigenvalues
        self.name = name

    @classmethod
    def linear(cls, basis: ModalBasis) -> "GalerkinSystem":
        lam = basis.eigenvalues

        def rhs(a, t):
            return lam * a

        return cls(basis, rhs, linear_eigenvalues=lam, name="linear")

    @classmethod
    def burgers(cls, basis: ModalBasis, nu: float) -> "GalerkinSystem":
        """Viscous Burgers u_t = -u u_x + nu u_xx, pseudo-spectral with
        2/3-rule dealiasing, on a periodic Fourier basis."""
        if basis.grid.boundary_kind == DIRICHLET0:
            raise UnsupportedBoundaryOperator("burgers rhs requires a periodic basis")
        k = basis.wavenumbers
        lam = -nu * k**2
        phi = basis.eigenfunctions
        w = basis.grid.quadrature_weights
        # 2/3 rule relative to the grid Nyquist index M/2
        cutoff = basis.grid.num_points // 2 * 2 // 3
        dealias = (np.abs(basis.wavenumber_indices) <= cutoff).astype(float)

        def rhs(a, t):
            u = phi @ a
            ux = phi @ (1j * k * a)
            nonlinear = phi.conj().T @ (w * (u * ux))
            return lam * a - dealias * nonlinear

        return cls(basis, rhs, linear_eigenvalues=lam, name="burgers")

    @classmethod
    def custom(cls, basis: ModalBasis, rhs: Callable[[np.ndarray, float], np.ndarray]) -> "GalerkinSystem":
        return cls(basis, rhs, name="custom")


def evolve_linear(a0: np.ndarray, basis: ModalBasis, times: TimeGrid,
                  t_ref: Optional[float] = None) -> np.ndarray:
    """Closed-form trajectory a_n(t_j) = a0_n * exp(lambda_n (t_j - t_ref)).

    ``t_ref`` defaults to the first instant, so a0 is the state at the
    start of the grid; pass t_ref=0.0 to treat a0 as t = 0 coefficients.
    """
    a0 = np.asarray(a0, dtype=complex)
    if a0.shape != (basis.num_modes,):
        raise DimensionMismatch(
            f"{a0.size} coefficients for a {basis.num_modes}-mode basis"
        )
    if t_ref is None:
        t_ref = times.t_start
    dt = times.instants - t_ref
    return a0[:, None] * np.exp(np.outer(basis.eigenvalues, dt))


def evolve_galerkin(sys: GalerkinSystem, a0: np.ndarray, times: TimeGrid,
                    dt_internal: float) -> np.ndarray:
    """Fixed-step classical RK4 between the output instants.

    dt_internal must (nearly) divide every output interval; the linear
    part must satisfy |lambda|_max * dt < RK4_STABILITY.
    """
    a0 = np.asarray(a0, dtype=complex)
    if a0.shape != (sys.basis.num_modes,):
        raise DimensionMismatch(
            f"{a0.size} coefficients for a {sys.basis.num_modes}-mode basis"
        )
    if dt_internal <= 0:
        raise StepTooLarge("dt_internal must be positive")
    if sys.linear_eigenvalues is not None:
        lam_max = np.abs(sys.linear_eigenvalues).max(initial=0.0)
        if lam_max * dt_internal >= RK4_STABILITY:
            raise StepTooLarge(
                f"|lambda|_max*dt = {lam_max * dt_internal:.3g} violates the "
                f"RK4 stability heuristic (< {RK4_STABILITY})"
            )

    t_out = times.instants
    traj = np.empty((a0.size, t_out.size), dtype=complex)
    a = a0.copy()
    traj[:, 0] = a
    rhs = sys.rhs
    for j in range(1, t_out.size):
        span = t_out[j] - t_out[j - 1]
        nsub = max(1, round(span / dt_internal))
        if abs(nsub * dt_internal - span) > 1e-9 * max(1.0, abs(span)):
            raise StepTooLarge(
                f"dt_internal={dt_internal} does not divide the output "
                f"interval {span}"
            )
        h = span / nsub
        t = t_out[j - 1]
        for _ in range(nsub):
            k1 = rhs(a, t)
            k2 = rhs(a + 0.5 * h * k1, t + 0.5 * h)
            k3 = rhs(a + 0.5 * h * k2, t + 0.5 * h)
            k4 = rhs(a + h * k3, t + h)
            a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
            if np.abs(a).max() > BLOWUP_LIMIT:
                raise BlowUp(f"modal amplitude exceeded {BLOWUP_LIMIT:.0e} at t={t:.6g}")
        traj[:, j] = a
    return traj


def coupled_mode_matrices(ops: Sequence[OperatorSpec], basis: ModalBasis) -> np.ndarray:
    """Per-mode 2x2 system matrices S_n = [[s1, s2], [s3, s4]](k_n).

    ops is (op1, op2, op3, op4) for d/dt [a; b] = S [a; b]; a zero
    operator may be passed as None.
    """
    if basis.grid.boundary_kind == DIRICHLET0:
        for op in ops:
            if op is not None and not op.is_even_order:
                raise UnsupportedBoundaryOperator(
                    "dirichlet0 grids admit only even-order derivative terms"
                )
    k = basis.wavenumbers
    sig = [op.symbol(k) if op is not None else np.zeros_like(k, dtype=complex)
           for op in ops]
    S = np.empty((basis.num_modes, 2, 2), dtype=complex)
    S[:, 0, 0], S[:, 0, 1] = sig[0], sig[1]
    S[:, 1, 0], S[:, 1, 1] = sig[2], sig[3]
    return S


def coupled_propagators(S: np.ndarray, t: float) -> np.ndarray:
    """exp(S_n * t) for every mode; shape (num_modes, 2, 2)."""
    return np.stack([expm(S[n] * t) for n in range(S.shape[0])])


def evolve_coupled_linear(ops: Sequence[OperatorSpec], u0: np.ndarray, v0: np.ndarray,
                          grid: SpatialGrid, N: int, times: TimeGrid,
                          t_ref: Optional[float] = None):
    """Evolve the coupled system u_t = L1 u + L2 v, v_t = L3 u + L4 v.

    Each wavenumber evolves independently under its 2x2 matrix
    exponential.  Returns (SnapshotMatrix u, SnapshotMatrix v).
    """
    basis = canonical_basis(grid, N)
    S = coupled_mode_matrices(ops, basis)
    a0 = project(np.asarray(u0, dtype=float), basis)
    b0 = project(np.asarray(v0, dtype=float), basis)
    if t_ref is None:
        t_ref = times.t_start

    a_traj = np.empty((N, times.num_steps), dtype=complex)
    b_traj = np.empty((N, times.num_steps), dtype=complex)
    for j, t in enumerate(times.instants):
        E = coupled_propagators(S, t - t_ref)
        a_traj[:, j] = E[:, 0, 0] * a0 + E[:, 0, 1] * b0
        b_traj[:, j] = E[:, 1, 0] * a0 + E[:, 1, 1] * b0
    u_snap = make_snapshots(a_traj, basis, grid, field_name="u", times=times)
    v_snap = make_snapshots(b_traj, basis, grid, field_name="v", times=times)
    return u_snap, v_snap


def canonical_basis(grid: SpatialGrid, N: int) -> ModalBasis:
    """Basis in the fixed n = 0, +1, -1, ... order (sines for dirichlet0),
    independent of any particular operator's eigenvalue magnitudes."""
    return build_basis(grid, OperatorSpec.derivative(2), N)


def make_snapshots(coeff_traj: np.ndarray, basis: ModalBasis, grid: SpatialGrid,
                   field_name: str = "u", times: Optional[TimeGrid] = None) -> SnapshotMatrix:
    """Synthesize each trajectory column into a full-order snapshot.

    Propagates NonRealField if any column is not conjugate-symmetric.
    """
    coeff_traj = np.asarray(coeff_traj, dtype=complex)
    if coeff_traj.ndim != 2 or coeff_traj.shape[0] != basis.num_modes:
        raise DimensionMismatch(
            f"trajectory shape {coeff_traj.shape} does not match "
            f"{basis.num_modes} modes"
        )
    cols = [synthesize(coeff_traj[:, j], basis) for j in range(coeff_traj.shape[1])]
    if times is None:
        times = TimeGrid(np.arange(coeff_traj.shape[1], dtype=float))
    return SnapshotMatrix(np.column_stack(cols), grid, times, field_name=field_name)
