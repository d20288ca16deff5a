"""Nonlinear simulation and low-rank compression.

Burgers' equation u_t + u u_x = nu u_xx is integrated with a
pseudo-spectral Galerkin right-hand side (2/3-rule dealiasing) and
fixed-step RK4.  The snapshot matrix is then compressed with the
in-repo SVD; the energy captured by each rank is reported.
"""

import numpy as np

from shred.rom import compress, decompress, relative_error, thin_svd, truncate
from shred.simulate import (
    GalerkinSystem,
    TimeGrid,
    evolve_galerkin,
    make_snapshots,
)
from shred.spectral import (
    OperatorSpec,
    SpatialGrid,
    build_basis,
    random_real_coefficients,
)

grid = SpatialGrid(2 * np.pi, 128)
basis = build_basis(grid, OperatorSpec.derivative(2), 17)
a0 = random_real_coefficients(basis, seed=3)

system = GalerkinSystem.burgers(basis, nu=0.1)
times = TimeGrid.uniform(0.0, 2.0, 81)
trajectory = evolve_galerkin(system, a0, times, dt_internal=1e-3)
snapshots = make_snapshots(trajectory, basis, grid, times=times)

energy = (snapshots.values**2).sum(axis=0)
print(f"viscous decay: energy {energy[0]:.3f} -> {energy[-1]:.3f}")

bundle = thin_svd(snapshots)
total = (bundle.singular_values**2).sum()
for r in (2, 5, 10):
    t = truncate(bundle, r)
    captured = 1.0 - t.discarded_energy / total
    rec = decompress(compress(snapshots, t), t, grid=grid, times=times)
    print(f"rank {r:2d}: {100 * captured:7.3f}% energy, "
          f"field error {relative_error(rec, snapshots):.2e}")
