"""Boundary integral solver for rigid obstacles.

The scattered field is sought as the combined potential

    u^s(x) = 2 int Pi(x, y) phi(y) ds(y) + 2i int Gamma(x, y) phi(y) ds(y)

whose exterior trace gives ``(I + K + iS) phi = -u^i`` on the surface.
Piecewise-constant densities are collocated at panel centroids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels
from .errors import SolverError
from .geometry import SurfaceMesh
from .material import ElasticMaterial
from .quadrature import adaptive_triangle_rule_batch, fan_split, polar_radial_moments, split4, triangle_rule

DEFAULT_MAX_UNKNOWNS = 3 * 20**3
_ROW_CHUNK = 32
# keeps near/far classification stable under translation for pairs exactly at the threshold
_NEAR_SLACK = 1e-9


def _gamma(mat, x, y):
    if mat.omega == 0:
        return kernels.static_fundamental_solution(mat, np.asarray(x) - np.asarray(y)).astype(complex)
    return kernels.fundamental_solution(mat, x, y)


def _pi(mat, x, y, nu):
    if mat.omega == 0:
        return kernels.static_traction_kernel(mat, x, y, nu).astype(complex)
    return kernels.traction_kernel(mat, x, y, nu)


def _combined(mat, x, y, nu, coupling):
    return 2.0 * (_pi(mat, x, y, nu) + coupling * _gamma(mat, x, y))


def _check_budget(n_unknowns: int, max_unknowns: int) -> None:
    if n_unknowns > max_unknowns:
        raise SolverError(f"{n_unknowns} unknowns exceed the budget of {max_unknowns}")


@dataclass(frozen=True)
class BoundaryOperator:
    """Collocation matrix of ``I + K + coupling * S`` with its LU factors."""

    material: ElasticMaterial
    mesh: SurfaceMesh
    matrix: np.ndarray
    coupling: complex
    near_factor: float
    lu: tuple

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]


def _self_blocks(mat, mesh, coupling):
    """Diagonal blocks: static single layer in polar form plus smooth remainders."""
    P = mesh.n_panels
    a, b = kernels.static_coefficients(mat)
    corners, c, nu = mesh.local_corners, mesh.local_centroids, mesh.normals
    static_S = np.empty((P, 3, 3))
    for i in range(P):
        m0, M2 = polar_radial_moments(corners[i], c[i])
        static_S[i] = a * m0 * np.eye(3) + b * M2
    fans = np.stack([split4(fan_split(corners[i], c[i])).reshape(-1, 3, 3) for i in range(P)])
    nodes, w = triangle_rule(fans)
    nodes, w = nodes.reshape(P, -1, 3), w.reshape(P, -1)
    x = c[:, None, :]
    G = _gamma(mat, x, nodes) - kernels.static_fundamental_solution(mat, x - nodes)
    # the static traction kernel vanishes for coplanar points on a flat panel
    Pk = _pi(mat, x, nodes, nu[:, None, :])
    S = static_S + np.einsum("pq,pqij->pij", w, G)
    K = np.einsum("pq,pqij->pij", w, Pk)
    return 2.0 * (K + coupling * S)


def _near_sum(mat, corners, targets, normals, coupling, densities=None):
    """Refined panel integrals of the combined kernel for many target/panel pairs."""
    nodes, w, owner = adaptive_triangle_rule_batch(corners, targets)
    out = np.zeros((len(corners), 3, 3), dtype=complex) if densities is None else np.zeros(
        (len(corners), 3), dtype=complex
    )
    for start in range(0, len(nodes), 20000):
        sl = slice(start, start + 20000)
        o = owner[sl]
        ker = _combined(mat, targets[o], nodes[sl], normals[o], coupling) * w[sl, None, None]
        if densities is None:
            np.add.at(out, o, ker)
        else:
            np.add.at(out, o, np.einsum("qij,qj->qi", ker, densities[o]))
    return out


def assemble_boundary_operator(
    mat: ElasticMaterial,
    mesh: SurfaceMesh,
    *,
    coupling: complex = 1j,
    near_factor: float = 2.0,
    max_unknowns: int = DEFAULT_MAX_UNKNOWNS,
) -> BoundaryOperator:
    """Assemble and factor the boundary operator for ``mesh``.

    Far panel pairs use the centroid rule (the 7-point rule once ``k_s`` times
    the panel diameter exceeds one), pairs closer than ``near_factor``
    panel diameters use adaptively refined 7-point rules, and self panels
    subtract the static kernel, whose integral is done in polar coordinates.
    """
    P = mesh.n_panels
    _check_budget(3 * P, max_unknowns)
    # local coordinates make the matrix independent of where the mesh is placed
    c, nu, area, diam = mesh.local_centroids, mesh.normals, mesh.areas, mesh.diameters
    blocks = np.zeros((P, P, 3, 3), dtype=complex)
    # one node per panel is enough while the kernel varies slowly over a panel
    oscillatory = mat.k_s * diam.max() > 1.0
    if oscillatory:
        qnodes, qw = triangle_rule(mesh.local_corners)
    else:
        qnodes, qw = c[:, None, :], area[:, None]
    nq = qnodes.shape[1]
    for start in range(0, P, _ROW_CHUNK):
        stop = min(start + _ROW_CHUNK, P)
        x = c[start:stop, None, None, :]
        y = np.broadcast_to(qnodes, (stop - start, P, nq, 3)).copy()
        idx = np.arange(start, stop)
        y[idx - start, idx] = c[idx, None, :] + 1.0  # dummy sources for self pairs, replaced below
        blk = _combined(mat, x, y, nu[None, :, None, :], coupling)
        blocks[start:stop] = np.einsum("pq,rpqij->rpij", qw, blk)

    dist = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=2)
    near = dist < near_factor * np.maximum(diam[:, None], diam[None, :]) * (1.0 - _NEAR_SLACK)
    np.fill_diagonal(near, False)
    ii, jj = np.nonzero(near)
    if len(ii):
        blocks[ii, jj] = _near_sum(mat, mesh.local_corners[jj], c[ii], nu[jj], coupling)
    diag = np.arange(P)
    blocks[diag, diag] = _self_blocks(mat, mesh, coupling)

    matrix = blocks.transpose(0, 2, 1, 3).reshape(3 * P, 3 * P)
    matrix += np.eye(3 * P)
    lu = scipy.linalg.lu_factor(matrix, check_finite=False)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() < 1e-13 * pivots.max():
        raise SolverError("boundary operator is numerically singular")
    return BoundaryOperator(mat, mesh, matrix, coupling, near_factor, lu)


@dataclass(frozen=True)
class SurfaceDensity:
    values: np.ndarray  # (P, 3) complex
    residual: float


def _incident_trace(incident, points):
    if callable(incident):
        return np.asarray(incident(points), dtype=complex)
    values = np.asarray(incident, dtype=complex)
    if values.shape != points.shape:
        raise ValueError(f"incident trace has shape {values.shape}, expected {points.shape}")
    return values


def solve_density(op: BoundaryOperator, incident, *, tol: float = 1e-10) -> SurfaceDensity:
    """Solve ``(I + K + iS) phi = -u^i`` with ``u^i`` sampled at the centroids.

    ``incident`` is either a callable mapping points ``(N, 3)`` to values
    ``(N, 3)`` or the sampled trace itself.
    """
    rhs = -_incident_trace(incident, op.mesh.centroids).ravel()
    norm = np.linalg.norm(rhs)
    if norm == 0:
        return SurfaceDensity(np.zeros((op.mesh.n_panels, 3), dtype=complex), 0.0)
    phi = scipy.linalg.lu_solve(op.lu, rhs, check_finite=False)
    residual = np.linalg.norm(op.matrix @ phi - rhs) / norm
    if residual > tol:
        raise SolverError(f"density residual {residual:.2e} above tolerance {tol:.0e}")
    return SurfaceDensity(phi.reshape(-1, 3), float(residual))


def _panel_nodes(mesh: SurfaceMesh):
    return triangle_rule(mesh.local_corners)


def winding_number(mesh: SurfaceMesh, points) -> np.ndarray:
    """Solid angle of the surface seen from each point over ``4 pi`` (1 inside, 0 outside)."""
    pts = np.asarray(points, dtype=float)
    v = mesh.local_corners[None] - (pts - mesh.origin)[:, None, None, :]
    a, b, cc = v[:, :, 0], v[:, :, 1], v[:, :, 2]
    la, lb, lc = (np.linalg.norm(t, axis=-1) for t in (a, b, cc))
    num = np.einsum("...i,...i->...", a, np.cross(b, cc))
    den = (
        la * lb * lc
        + np.einsum("...i,...i->...", a, b) * lc
        + np.einsum("...i,...i->...", b, cc) * la
        + np.einsum("...i,...i->...", cc, a) * lb
    )
    return (2.0 * np.arctan2(num, den)).sum(axis=1) / (4.0 * np.pi)


def scattered_field_rigid(op: BoundaryOperator, density: SurfaceDensity, receivers, *, min_gap: float = 1e-3):
    """Evaluate the combined potential at exterior ``receivers``.

    Panels closer than ``near_factor`` diameters to a receiver are refined
    adaptively so that points a fraction of a panel away stay accurate.
    Receivers inside the obstacle or within ``min_gap`` times the mean
    panel diameter of its surface are rejected.
    """
    mesh, mat = op.mesh, op.material
    x_global = np.atleast_2d(np.asarray(receivers, dtype=float))
    x = x_global - mesh.origin
    nodes, w = _panel_nodes(mesh)
    gap = np.linalg.norm(x[:, None, None, :] - nodes[None], axis=-1).min(axis=(1, 2))
    if np.any(gap < min_gap * mesh.diameters.mean()) or np.any(winding_number(mesh, x_global) > 0.5):
        raise ValueError("receiver inside the obstacle or on its surface")
    phi = density.values
    out = np.zeros((len(x), 3), dtype=complex)
    c, diam, nu = mesh.local_centroids, mesh.diameters, mesh.normals
    near = np.linalg.norm(x[:, None, :] - c[None], axis=2) < op.near_factor * diam[None] * (1.0 - _NEAR_SLACK)
    for k, xk in enumerate(x):
        far = ~near[k]
        ker = _combined(mat, xk, nodes[far], nu[far][:, None, :], op.coupling)
        out[k] = np.einsum("pq,pqij,pj->i", w[far], ker, phi[far])
    kk, jj = np.nonzero(near)
    if len(kk):
        contrib = _near_sum(mat, mesh.local_corners[jj], x[kk], nu[jj], op.coupling, densities=phi[jj])
        np.add.at(out, kk, contrib)
    return out


def far_field_rigid(op: BoundaryOperator, density: SurfaceDensity, directions):
    """Shear and pressure far-field patterns ``(F_s, F_p)`` at unit ``directions``.

    ``u^s(r xhat) ~ e^{i k_s r}/r F_s(xhat) + e^{i k_p r}/r F_p(xhat)``; the
    shear part is tangential and the pressure part radial by construction.
    """
    mat, mesh = op.material, op.mesh
    if mat.omega == 0:
        raise ValueError("far field requires omega > 0")
    X = np.atleast_2d(np.asarray(directions, dtype=float))
    nodes, w = _panel_nodes(mesh)
    # the far-field phase depends on absolute position
    Q = nodes.reshape(-1, 3) + mesh.origin
    W = w.ravel()
    nq = nodes.shape[1]
    N = np.repeat(mesh.normals, nq, axis=0)
    Phi = np.repeat(density.values, nq, axis=0)
    ks, kp, mu, lam, al, be = mat.k_s, mat.k_p, mat.mu, mat.lam, mat.alpha, mat.beta
    phase = X @ Q.T
    Es = W * np.exp(-1j * ks * phase)
    Ep = W * np.exp(-1j * kp * phase)
    xnu = X @ N.T
    xphi = X @ Phi.T
    nuphi = np.einsum("qi,qi->q", N, Phi)

    T1 = Es @ Phi
    T2 = (Es * xnu) @ Phi
    T3 = (Es * xphi) @ N
    vec = 1j * T1 - 1j * ks * (mu * T2 + al * T3)
    vec -= np.einsum("ni,ni->n", X, vec)[:, None] * X
    Fs = 2.0 / (4.0 * np.pi * mu) * vec

    s1 = np.einsum("nq,nq->n", Ep, xphi)
    s2 = np.einsum("nq,nq->n", Ep, xnu * xphi)
    s3 = Ep @ nuphi
    scal = 1j * s1 - 1j * kp * ((mu + al) * s2 + be * s3)
    Fp = (2.0 / (4.0 * np.pi * (lam + 2.0 * mu)) * scal)[:, None] * X
    return Fs, Fp
