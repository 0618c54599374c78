"""Lippmann-Schwinger solver for penetrable media with unit background density.

The total field solves ``u - V u = u^i`` with

    (V u)(x) = -omega^2 int Gamma(x, y) n(y) u(y) dy,

discretized by the midpoint rule on a voxel grid. The self voxel splits off
the static kernel, whose cube integral is known in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import kernels
from .errors import SolverError
from .geometry import ContrastGrid
from .material import ElasticMaterial
from .quadrature import cube_inverse_distance

DEFAULT_MAX_VOXELS = 20**3
KRYLOV_THRESHOLD = 12**3
_ROW_CHUNK = 256


@dataclass(frozen=True)
class VolumeOperator:
    """Dense matrix of ``V`` on the grid (``3V x 3V``), grouped by voxel."""

    material: ElasticMaterial
    grid: ContrastGrid
    matrix: np.ndarray

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]


def self_voxel_block(mat: ElasticMaterial, h: float) -> np.ndarray:
    """``int_cell Gamma(x_c, y) dy`` for a cube of edge ``h`` centred at ``x_c``."""
    a, b = kernels.static_coefficients(mat)
    # the cube integral of rhat rhat^T / r is a third of that of 1/r by symmetry
    static = h**2 * cube_inverse_distance() * (a + b / 3.0) * np.eye(3)
    return static + h**3 * kernels.self_limit(mat)


def assemble_volume_operator(
    mat: ElasticMaterial, grid: ContrastGrid, *, max_voxels: int = DEFAULT_MAX_VOXELS
) -> VolumeOperator:
    """Midpoint discretization of ``V`` with the singular self-cell rule."""
    if not mat.omega > 0:
        raise ValueError("volume operator requires omega > 0")
    V = grid.n_voxels
    if V == 0:
        raise ValueError("empty voxel grid")
    if V > max_voxels:
        raise SolverError(f"{V} voxels exceed the budget of {max_voxels}")
    # local coordinates make the matrix independent of where the grid is placed
    x, n, h = grid.local_centers, grid.values, grid.h
    w2 = mat.omega**2
    blocks = np.zeros((V, V, 3, 3), dtype=complex)
    for start in range(0, V, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, V)
        y = np.broadcast_to(x, (stop - start, V, 3)).copy()
        idx = np.arange(start, stop)
        y[idx - start, idx] += 1.0  # dummy source for the self voxel, replaced below
        G = kernels.fundamental_solution(mat, x[start:stop, None, :], y)
        blocks[start:stop] = -w2 * h**3 * n[None, :, None, None] * G
    diag = np.arange(V)
    blocks[diag, diag] = -w2 * n[:, None, None] * self_voxel_block(mat, h)
    matrix = blocks.transpose(0, 2, 1, 3).reshape(3 * V, 3 * V)
    return VolumeOperator(mat, grid, matrix)


@dataclass(frozen=True)
class TotalFieldSolution:
    values: np.ndarray  # (V, 3) complex total field at voxel centres
    incident: np.ndarray
    residual: float


def _incident_values(incident, points):
    if callable(incident):
        return np.asarray(incident(points), dtype=complex)
    values = np.asarray(incident, dtype=complex)
    if values.shape != points.shape:
        raise ValueError(f"incident samples have shape {values.shape}, expected {points.shape}")
    return values


def solve_total_field(
    op: VolumeOperator, incident, *, method: str = "auto", tol: float = 1e-10, restart: int = 60
) -> TotalFieldSolution:
    """Solve ``(I - V) u = u^i``.

    ``method`` is ``"direct"`` (LU), ``"gmres"`` (restarted Krylov) or
    ``"auto"``, which picks GMRES above ``KRYLOV_THRESHOLD`` voxels.
    """
    ui = _incident_values(incident, op.grid.centers)
    rhs = ui.ravel()
    norm = np.linalg.norm(rhs)
    if norm == 0 or not np.any(op.grid.values):
        return TotalFieldSolution(ui.copy(), ui, 0.0)
    A = np.eye(op.n_unknowns) - op.matrix
    if method == "auto":
        method = "gmres" if op.grid.n_voxels > KRYLOV_THRESHOLD else "direct"
    if method == "direct":
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
        pivots = np.abs(np.diag(lu))
        if pivots.min() < 1e-13 * pivots.max():
            raise SolverError("volume operator is numerically singular")
        u = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    elif method == "gmres":
        u, info = scipy.sparse.linalg.gmres(
            A, rhs, rtol=min(tol, 1e-12), atol=0.0, restart=restart, maxiter=2000
        )
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
    else:
        raise ValueError(f"unknown method {method!r}")
    residual = np.linalg.norm(A @ u - rhs) / norm
    if residual > tol:
        raise SolverError(f"total-field residual {residual:.2e} above tolerance {tol:.0e}")
    return TotalFieldSolution(u.reshape(-1, 3), ui, float(residual))


def apply_volume_operator(op: VolumeOperator, field) -> np.ndarray:
    """``V u`` at the voxel centres for samples ``field`` of shape ``(V, 3)``."""
    return (op.matrix @ np.asarray(field, dtype=complex).ravel()).reshape(-1, 3)


def scattered_field_medium(op: VolumeOperator, sol: TotalFieldSolution, receivers) -> np.ndarray:
    """Midpoint evaluation of ``-omega^2 int Gamma(x, y) n(y) u(y) dy`` at ``receivers``."""
    x = np.atleast_2d(np.asarray(receivers, dtype=float))
    grid, mat = op.grid, op.material
    supp = grid.support
    y = grid.centers[supp]
    if len(y) == 0:
        return np.zeros((len(x), 3), dtype=complex)
    cheb = np.abs(x[:, None, :] - y[None]).max(axis=2)
    if np.any(cheb < 0.5 * grid.h * (1 + 1e-12)):
        raise ValueError("receiver inside a support voxel")
    src = (grid.values[supp, None] * sol.values[supp]) * (-(mat.omega**2) * grid.h**3)
    out = np.empty((len(x), 3), dtype=complex)
    for start in range(0, len(x), _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, len(x))
        G = kernels.fundamental_solution(mat, x[start:stop, None, :], y[None])
        out[start:stop] = np.einsum("rvij,vj->ri", G, src)
    return out


def far_field_medium(op: VolumeOperator, sol: TotalFieldSolution, directions):
    """Shear and pressure far-field patterns ``(F_s, F_p)`` of the scattered field."""
    X = np.atleast_2d(np.asarray(directions, dtype=float))
    grid, mat = op.grid, op.material
    src = -(mat.omega**2) * grid.h**3 * grid.values[:, None] * sol.values
    phase = X @ grid.centers.T
    Ts = np.exp(-1j * mat.k_s * phase) @ src
    Tp = np.exp(-1j * mat.k_p * phase) @ src
    Fs = (Ts - np.einsum("ni,ni->n", X, Ts)[:, None] * X) / (4.0 * math.pi * mat.mu)
    Fp = np.einsum("ni,ni->n", X, Tp)[:, None] * X / (4.0 * math.pi * (mat.lam + 2.0 * mat.mu))
    return Fs, Fp
