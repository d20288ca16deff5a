"""Modal basis construction, projection, and synthesis."""

import numpy as np
import pytest

from shred.errors import (
    DimensionMismatch,
    NonRealField,
    TooManyModes,
    UnsupportedBoundaryOperator,
)
from shred.spectral import (
    ModalBasis,
    OperatorSpec,
    SpatialGrid,
    build_basis,
    project,
    random_real_coefficients,
    synthesize,
)

L = 2 * np.pi
HEAT = OperatorSpec.derivative(2)


@pytest.fixture
def grid():
    return SpatialGrid(L, 128)


def test_grid_points_and_weights_periodic(grid):
    x = grid.points
    assert x.shape == (128,)
    assert x[0] == 0.0
    # periodic grid excludes the right endpoint
    assert np.isclose(x[-1], L - L / 128)
    w = grid.quadrature_weights
    # uniform trapezoidal weights sum to the domain length
    assert np.allclose(w, L / 128)
    assert np.isclose(w.sum(), L)


def test_grid_points_dirichlet():
    # interior points only; the field vanishes at the omitted endpoints
    g = SpatialGrid(1.0, 65, boundary_kind="dirichlet0")
    x = g.points
    h = 1.0 / 66
    assert np.isclose(x[0], h) and np.isclose(x[-1], 1.0 - h)


def test_grid_rejects_bad_boundary():
    with pytest.raises(ValueError):
        SpatialGrid(L, 64, boundary_kind="neumann")


def test_operator_symbol_values():
    # symbol(k) = sum_m c_m (ik)^m
    op = OperatorSpec((0.0, 1.0, 0.05))
    k = np.array([0.0, 1.0, 2.0, -3.0])
    expected = 1j * k + 0.05 * (1j * k) ** 2
    assert np.allclose(op.symbol(k), expected)


def test_operator_derivative_ctor():
    op = OperatorSpec.derivative(2, 0.5)
    assert op.coefficients == (0.0, 0.0, 0.5)
    assert op.is_even_order


def test_heat_eigenvalues_periodic(grid):
    # index order 0, +1, -1, +2, -2, ... and lambda_n = -n^2
    basis = build_basis(grid, HEAT, 9)
    assert list(basis.wavenumber_indices) == [0, 1, -1, 2, -2, 3, -3, 4, -4]
    n = np.array(basis.wavenumber_indices)
    assert np.allclose(basis.eigenvalues, -(n.astype(float) ** 2))


def test_eigenvalue_ordering_prefers_small_magnitude(grid):
    basis = build_basis(grid, OperatorSpec((0.0, 1.0, 0.01)), 7)
    mags = np.abs(basis.eigenvalues)
    assert np.all(np.diff(np.round(mags, 12)) >= 0)


def test_dirichlet_sine_eigenvalues():
    g = SpatialGrid(1.0, 201, boundary_kind="dirichlet0")
    basis = build_basis(g, HEAT, 3)
    expected = -(np.pi * np.arange(1, 4)) ** 2
    assert np.allclose(basis.eigenvalues, expected)


def test_dirichlet_rejects_odd_order_operator():
    g = SpatialGrid(1.0, 65, boundary_kind="dirichlet0")
    with pytest.raises(UnsupportedBoundaryOperator):
        build_basis(g, OperatorSpec.derivative(1), 3)


def test_too_many_modes(grid):
    with pytest.raises(TooManyModes):
        build_basis(grid, HEAT, grid.num_points + 1)


def test_discrete_orthonormality(grid):
    basis = build_basis(grid, HEAT, 17)
    w = grid.quadrature_weights
    G = basis.eigenfunctions.conj().T @ (w[:, None] * basis.eigenfunctions)
    assert np.abs(G - np.eye(17)).max() < 1e-12


def test_dirichlet_orthonormality():
    g = SpatialGrid(3.0, 301, boundary_kind="dirichlet0")
    basis = build_basis(g, HEAT, 8)
    w = g.quadrature_weights
    G = basis.eigenfunctions.conj().T @ (w[:, None] * basis.eigenfunctions)
    assert np.abs(G - np.eye(8)).max() < 1e-12


@pytest.mark.parametrize("seed", [0, 1, 7, 42])
def test_projection_round_trip(grid, seed):
    basis = build_basis(grid, HEAT, 17)
    a = random_real_coefficients(basis, seed)
    f = synthesize(a, basis)
    a_back = project(f, basis)
    assert np.abs(a_back - a).max() < 1e-12


def test_random_coefficients_give_real_field(grid):
    basis = build_basis(grid, HEAT, 17)
    for seed in range(5):
        a = random_real_coefficients(basis, seed)
        f = synthesize(a, basis)  # raises NonRealField if imag residue
        assert np.isrealobj(f)


def test_unpaired_mode_zeroed(grid):
    # N even leaves one +n mode without its -n partner; a real field
    # cannot carry it, so the draw must zero it
    basis = build_basis(grid, HEAT, 8)
    idx = list(basis.wavenumber_indices)
    a = random_real_coefficients(basis, 3)
    unpaired = [i for i, n in enumerate(idx) if n > 0 and -n not in idx]
    assert unpaired and all(a[i] == 0 for i in unpaired)


def test_synthesize_rejects_complex_field(grid):
    basis = build_basis(grid, HEAT, 5)
    a = np.zeros(5, dtype=complex)
    a[1] = 1.0  # +1 mode alone -> genuinely complex field
    with pytest.raises(NonRealField):
        synthesize(a, basis)


def test_project_dimension_check(grid):
    basis = build_basis(grid, HEAT, 5)
    with pytest.raises(DimensionMismatch):
        project(np.zeros(64), basis)


def test_synthesize_is_linear(grid):
    basis = build_basis(grid, HEAT, 9)
    a = random_real_coefficients(basis, 0)
    assert np.allclose(synthesize(0.5 * a, basis), 0.5 * synthesize(a, basis))
