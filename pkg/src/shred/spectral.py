"""Modal bases of constant-coefficient 1-D differential operators.

Two basis families are supported, one per boundary kind:

* periodic on [0, L):  phi_n(x) = exp(i*k_n*x)/sqrt(L),  k_n = 2*pi*n/L,
  n = 0, +1, -1, +2, -2, ...
* homogeneous Dirichlet on (0, L):  phi_n(x) = sqrt(2/L)*sin(n*pi*x/L),
  n = 1, 2, ...  (even derivative orders only)

Eigenvalues come from the operator symbol: for L = sum_m c_m d^m/dx^m,
lambda_n = sum_m c_m (i*k_n)^m.  All modal arithmetic is complex; real
fields are enforced only at synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NonRealField,
    TooManyModes,
    UnsupportedBoundaryOperator,
)

PERIODIC = "periodic"
DIRICHLET0 = "dirichlet0"

#: Relative tolerance on the imaginary residue allowed by synthesize().
IMAG_TOL = 1e-8


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1-D grid on [0, L].

    Periodic grids store x_i = i*L/M for i = 0..M-1 (no duplicated
    endpoint); dirichlet0 grids store the interior points
    x_i = i*L/(M+1) for i = 1..M.
    """

    length: float
    num_points: int
    boundary_kind: str = PERIODIC

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"grid length must be positive, got {self.length}")
        if self.num_points < 4:
            raise ValueError(f"need at least 4 grid points, got {self.num_points}")
        if self.boundary_kind not in (PERIODIC, DIRICHLET0):
            raise ValueError(f"unknown boundary kind {self.boundary_kind!r}")

    @property
    def points(self) -> np.ndarray:
        L, M = self.length, self.num_points
        if self.boundary_kind == PERIODIC:
            return np.arange(M) * (L / M)
        return np.arange(1, M + 1) * (L / (M + 1))

    @property
    def quadrature_weights(self) -> np.ndarray:
        """Trapezoidal weights; uniform L/M for periodic grids.

        For dirichlet0 the field vanishes at both endpoints, so the
        composite trapezoid rule reduces to a uniform weight L/(M+1)
        on the interior points.
        """
        L, M = self.length, self.num_points
        h = L / M if self.boundary_kind == PERIODIC else L / (M + 1)
        return np.full(M, h)


@dataclass(frozen=True)
class OperatorSpec:
    """Constant-coefficient operator sum_m c_m d^m/dx^m, m = 0..4."""

    coefficients: tuple = ()

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) > 5:
            raise ValueError("derivative orders above 4 are not supported")
        if not any(c != 0 for c in coeffs):
            raise ValueError("operator needs at least one nonzero coefficient")

    @classmethod
    def derivative(cls, order: int, coefficient: complex = 1.0) -> "OperatorSpec":
        """Single-term operator c * d^order/dx^order."""
        coeffs = [0.0] * (order + 1)
        coeffs[order] = coefficient
        return cls(tuple(coeffs))

    @property
    def is_even_order(self) -> bool:
        return all(c == 0 for m, c in enumerate(self.coefficients) if m % 2 == 1)

    def symbol(self, k: np.ndarray) -> np.ndarray:
        """Evaluate sum_m c_m (i*k)^m at wavenumbers k."""
        ik = 1j * np.asarray(k, dtype=complex)
        out = np.zeros_like(ik)
        for m, c in enumerate(self.coefficients):
            if c != 0:
                out += c * ik**m
        return out

    @property
    def is_zero(self) -> bool:
        return all(c == 0 for c in self.coefficients)


@dataclass(frozen=True)
class ModalBasis:
    """Eigenpairs of an operator sampled on a grid.

    ``eigenfunctions`` is (num_points, num_modes) complex; column n holds
    phi_n at the grid points.  Conjugate pairing follows the fixed
    ordering n = 0, +1, -1, +2, -2, ... before the |lambda| sort, so the
    layout is reproducible across runs.
    """

    grid: SpatialGrid
    wavenumber_indices: np.ndarray
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray

    @property
    def num_modes(self) -> int:
        return len(self.eigenvalues)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Physical wavenumbers k_n matching the stored mode order."""
        n = self.wavenumber_indices
        if self.grid.boundary_kind == PERIODIC:
            return 2.0 * np.pi * n / self.grid.length
        return np.pi * n / self.grid.length


def _candidate_indices(grid: SpatialGrid, N: int) -> np.ndarray:
    if grid.boundary_kind == PERIODIC:
        # n = 0, +1, -1, +2, -2, ...
        out = [0]
        n = 1
        while len(out) < N:
            out.append(n)
            if len(out) < N:
                out.append(-n)
            n += 1
        return np.array(out)
    return np.arange(1, N + 1)


def build_basis(grid: SpatialGrid, op: OperatorSpec, N: int) -> ModalBasis:
    """Construct the leading N eigenpairs of ``op`` on ``grid``.

    Modes are ordered by |lambda| ascending, ties broken by |n| then by
    sign (+n before -n).  Raises TooManyModes if N exceeds the grid
    resolution and UnsupportedBoundaryOperator for odd-order terms on a
    dirichlet0 grid (sines are eigenfunctions of even derivatives only).
    """
    if N > grid.num_points:
        raise TooManyModes(f"requested {N} modes on a {grid.num_points}-point grid")
    if grid.boundary_kind == DIRICHLET0 and not op.is_even_order:
        raise UnsupportedBoundaryOperator(
            "dirichlet0 grids admit only even-order derivative terms"
        )

    n = _candidate_indices(grid, N)
    x = grid.points
    L = grid.length
    if grid.boundary_kind == PERIODIC:
        k = 2.0 * np.pi * n / L
        phi = np.exp(1j * np.outer(x, k)) / np.sqrt(L)
    else:
        k = np.pi * n / L
        phi = np.sqrt(2.0 / L) * np.sin(np.outer(x, k)).astype(complex)
    lam = op.symbol(k)

    order = np.lexsort((n < 0, np.abs(n), np.abs(lam)))
    return ModalBasis(
        grid=grid,
        wavenumber_indices=n[order],
        eigenvalues=lam[order],
        eigenfunctions=phi[:, order],
    )


def project(field: np.ndarray, basis: ModalBasis) -> np.ndarray:
    """Modal coefficients a_n = <field, phi_n> under the grid quadrature."""
    field = np.asarray(field)
    if field.shape != (basis.grid.num_points,):
        raise DimensionMismatch(
            f"field has shape {field.shape}, grid has {basis.grid.num_points} points"
        )
    w = basis.grid.quadrature_weights
    return basis.eigenfunctions.conj().T @ (w * field)


def synthesize(a: np.ndarray, basis: ModalBasis) -> np.ndarray:
    """Real field sum_n a_n phi_n on the grid points.

    Raises NonRealField when the imaginary residue exceeds
    IMAG_TOL * (1 + max|Re|), which signals coefficients that are not
    conjugate-symmetric.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (basis.num_modes,):
        raise DimensionMismatch(
            f"got {a.shape[0] if a.ndim == 1 else a.shape} coefficients "
            f"for a {basis.num_modes}-mode basis"
        )
    u = basis.eigenfunctions @ a
    max_imag = np.abs(u.imag).max(initial=0.0)
    max_real = np.abs(u.real).max(initial=0.0)
    if max_imag > IMAG_TOL * (1.0 + max_real):
        raise NonRealField(
            f"imaginary residue {max_imag:.3e} exceeds tolerance; "
            "coefficients are not conjugate-symmetric"
        )
    return u.real


def random_real_coefficients(basis: ModalBasis, seed, scale: float = 1.0) -> np.ndarray:
    """Random coefficients whose synthesis is real.

    Periodic bases get conjugate-symmetric draws (a_{-n} = conj(a_{+n}),
    a_0 real); dirichlet0 bases get real draws.
    """
    rng = np.random.default_rng(seed)
    a = np.zeros(basis.num_modes, dtype=complex)
    if basis.grid.boundary_kind == DIRICHLET0:
        a[:] = rng.normal(scale=scale, size=basis.num_modes)
        return a
    n = basis.wavenumber_indices
    pos = {int(m): i for i, m in enumerate(n)}
    for i, m in enumerate(n):
        m = int(m)
        if m == 0:
            a[i] = rng.normal(scale=scale)
        elif m > 0:
            j = pos.get(-m)
            if j is None:
                # an unpaired mode cannot contribute to a real field
                a[i] = 0.0
            else:
                a[i] = rng.normal(scale=scale) + 1j * rng.normal(scale=scale)
                a[j] = np.conj(a[i])
    return a
