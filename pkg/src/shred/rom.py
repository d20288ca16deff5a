"""SVD compression of snapshot matrices and parametric stacking.

The SVD is computed in-repo by one-sided Jacobi rotations (desk-scale
matrices make this feasible and auditable); tests cross-check it against
an eigendecomposition of the Gram matrix.  U-column signs are fixed so
outputs are deterministic across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, GridMismatch
from .simulate import SnapshotMatrix, TimeGrid


@dataclass
class SvdBundle:
    """Truncated factorization X ~= U @ V_latent.

    U is (num_dof, r) with orthonormal columns; V_latent = diag(s) W^T =
    U^T X carries the temporal dynamics; discarded_energy is the sum of
    squared singular values dropped by truncation.
    """

    U: np.ndarray
    singular_values: np.ndarray
    V_latent: np.ndarray
    rank: int
    discarded_energy: float = 0.0

    def __post_init__(self):
        if self.U.shape[1] != self.rank or self.singular_values.size != self.rank:
            raise DimensionMismatch("bundle rank does not match its factors")
        if np.any(np.diff(self.singular_values) > 0):
            raise ValueError("singular values must be non-increasing")


def _jacobi_svd(A: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """One-sided Jacobi SVD of A (m x n, m >= n): A = U diag(s) V^T.

    Columns of the working copy are rotated pairwise until mutually
    orthogonal; accumulated rotations give V and the column norms the
    singular values.
    """
    m, n = A.shape
    B = np.array(A, dtype=float, copy=True)
    V = np.eye(n)
    scale = np.linalg.norm(B)
    if scale == 0.0:
        return np.eye(m, n), np.zeros(n), V
    dead = tol * tol * scale * scale  # columns this small are numerically zero
    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = B[:, p] @ B[:, p]
                beta = B[:, q] @ B[:, q]
                gamma = B[:, p] @ B[:, q]
                if alpha <= dead or beta <= dead:
                    continue
                # relative orthogonality keeps small-sigma columns accurate
                rel = abs(gamma) / np.sqrt(alpha * beta)
                off = max(off, rel)
                if rel <= tol:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.hypot(1.0, t)
                s = c * t
                Bp = B[:, p].copy()
                B[:, p] = c * Bp - s * B[:, q]
                B[:, q] = s * Bp + c * B[:, q]
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]
        if off <= tol:
            break
    sigma = np.linalg.norm(B, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    B = B[:, order]
    V = V[:, order]
    U = np.zeros((m, n))
    for j in range(n):
        if sigma[j] > tol * scale:
            U[:, j] = B[:, j] / sigma[j]
        else:
            sigma[j] = 0.0
    _complete_null_columns(U, sigma, tol * scale)
    return U, sigma, V


def _complete_null_columns(U: np.ndarray, sigma: np.ndarray, eps: float) -> None:
    """Fill zero-sigma columns of U with an orthonormal complement so
    U keeps orthonormal columns even for rank-deficient input."""
    dead = np.where(sigma == 0.0)[0]
    if dead.size == 0:
        return
    live = U[:, sigma > 0.0]
    k = 0
    for j in dead:
        # Gram-Schmidt a coordinate vector against everything kept so far
        while k < U.shape[0]:
            v = np.zeros(U.shape[0])
            v[k] = 1.0
            k += 1
            v -= live @ (live.T @ v)
            for jj in dead:
                if jj < j:
                    v -= U[:, jj] * (U[:, jj] @ v)
            norm = np.linalg.norm(v)
            if norm > 1e-10:
                U[:, j] = v / norm
                break


def _fix_signs(U: np.ndarray, V_rows: np.ndarray) -> None:
    """Make each U column's largest-magnitude entry positive, flipping
    the matching latent row to preserve the product."""
    for j in range(U.shape[1]):
        i = np.argmax(np.abs(U[:, j]))
        if U[i, j] < 0:
            U[:, j] = -U[:, j]
            V_rows[j, :] = -V_rows[j, :]


def thin_svd(X) -> SvdBundle:
    """Full-rank bundle (r = min dims) of a snapshot matrix or 2-d array."""
    M = X.values if isinstance(X, SnapshotMatrix) else np.asarray(X, dtype=float)
    m, n = M.shape
    if m >= n:
        U, s, W = _jacobi_svd(M)
        V_latent = s[:, None] * W.T
    else:
        # work on the transpose: X^T = P diag(s) Q^T  =>  X = Q diag(s) P^T
        P, s, Q = _jacobi_svd(M.T)
        U = Q
        V_latent = s[:, None] * P.T
    _fix_signs(U, V_latent)
    return SvdBundle(U=U, singular_values=s, V_latent=V_latent, rank=s.size)


def truncate(bundle: SvdBundle, r: int) -> SvdBundle:
    """Keep the leading r triples; records the discarded energy."""
    if r < 1 or r > bundle.rank:
        raise DimensionMismatch(f"rank {r} outside 1..{bundle.rank}")
    discarded = bundle.discarded_energy + float(
        np.sum(bundle.singular_values[r:] ** 2)
    )
    return SvdBundle(
        U=bundle.U[:, :r].copy(),
        singular_values=bundle.singular_values[:r].copy(),
        V_latent=bundle.V_latent[:r, :].copy(),
        rank=r,
        discarded_energy=discarded,
    )


def compress(X: SnapshotMatrix, bundle: SvdBundle) -> np.ndarray:
    """Latent coefficients U^T X (r x N_t)."""
    if X.values.shape[0] != bundle.U.shape[0]:
        raise DimensionMismatch(
            f"{X.values.shape[0]} DOF vs basis with {bundle.U.shape[0]} rows"
        )
    return bundle.U.T @ X.values


def decompress(V: np.ndarray, bundle: SvdBundle, grid=None, times: Optional[TimeGrid] = None,
               field_name: str = "u") -> np.ndarray:
    """Full-order reconstruction U @ V; returns a SnapshotMatrix when a
    grid and time grid are supplied, else the raw matrix."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] != bundle.rank:
        raise DimensionMismatch(f"{V.shape[0]} latent rows vs rank {bundle.rank}")
    full = bundle.U @ V
    if grid is None:
        return full
    if times is None:
        times = TimeGrid(np.arange(full.shape[1], dtype=float))
    return SnapshotMatrix(full, grid, times, field_name=field_name)


def stack_parametric(snapshots: Sequence[SnapshotMatrix]) -> SnapshotMatrix:
    """Column-wise concatenation over parameter values.

    The returned matrix records (start, stop) column ranges per input in
    ``param_ranges`` so trajectories can be unstacked.
    """
    if not snapshots:
        raise GridMismatch("nothing to stack")
    first = snapshots[0]
    for s in snapshots[1:]:
        if s.grid != first.grid:
            raise GridMismatch("all stacked snapshot matrices must share a grid")
    ranges = []
    start = 0
    for s in snapshots:
        stop = start + s.times.num_steps
        ranges.append((start, stop))
        start = stop
    values = np.hstack([s.values for s in snapshots])
    # synthetic strictly-increasing time axis for the stacked columns
    times = TimeGrid(np.arange(values.shape[1], dtype=float))
    return SnapshotMatrix(values, first.grid, times,
                          field_name=first.field_name, param_ranges=ranges)


def unstack(stacked: SnapshotMatrix) -> list:
    """Split a stacked matrix back into per-parameter column blocks."""
    if stacked.param_ranges is None:
        raise GridMismatch("matrix has no recorded parameter ranges")
    return [stacked.values[:, a:b] for a, b in stacked.param_ranges]


def relative_error(X_hat, X, norm: str = "frobenius"):
    """Relative l2 error of X_hat against X.

    ``frobenius`` returns a scalar; ``per_column_l2`` a series over time.
    Accepts SnapshotMatrix or plain arrays.
    """
    A = X_hat.values if isinstance(X_hat, SnapshotMatrix) else np.asarray(X_hat)
    B = X.values if isinstance(X, SnapshotMatrix) else np.asarray(X)
    if A.shape != B.shape:
        raise DimensionMismatch(f"shapes {A.shape} vs {B.shape}")
    if norm == "frobenius":
        denom = np.linalg.norm(B)
        return float(np.linalg.norm(A - B) / (denom if denom > 0 else 1.0))
    if norm == "per_column_l2":
        denom = np.linalg.norm(B, axis=0)
        denom = np.where(denom > 0, denom, 1.0)
        return np.linalg.norm(A - B, axis=0) / denom
    raise ValueError(f"unknown norm {norm!r}")
