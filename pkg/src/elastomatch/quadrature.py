"""Quadrature rules for flat triangles and cubes, including weakly singular cases."""

from __future__ import annotations

import math

import numpy as np

# Degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1).
_A1, _B1, _W1 = 0.059715871789770, 0.470142064105115, 0.132394152788506
_A2, _B2, _W2 = 0.797426985353087, 0.101286507323456, 0.125939180544827
TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _B1, _B1],
        [_B1, _A1, _B1],
        [_B1, _B1, _A1],
        [_A2, _B2, _B2],
        [_B2, _A2, _B2],
        [_B2, _B2, _A2],
    ]
)
TRI7_WEIGHTS = np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2])


def triangle_rule(corners: np.ndarray, bary=TRI7_BARY, weights=TRI7_WEIGHTS):
    """Nodes and weights of a barycentric rule mapped onto triangles.

    ``corners`` has shape ``(..., 3, 3)``; returns nodes ``(..., q, 3)`` and
    weights ``(..., q)`` scaled by the triangle areas.
    """
    corners = np.asarray(corners, dtype=float)
    nodes = np.einsum("qa,...ai->...qi", bary, corners)
    cross = np.cross(corners[..., 1, :] - corners[..., 0, :], corners[..., 2, :] - corners[..., 0, :])
    area = 0.5 * np.linalg.norm(cross, axis=-1)
    return nodes, area[..., None] * weights


def split4(corners: np.ndarray) -> np.ndarray:
    """Midpoint subdivision of triangles ``(..., 3, 3)`` into ``(..., 4, 3, 3)``."""
    a, b, c = corners[..., 0, :], corners[..., 1, :], corners[..., 2, :]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    return np.stack(
        [
            np.stack([a, ab, ca], axis=-2),
            np.stack([ab, b, bc], axis=-2),
            np.stack([ca, bc, c], axis=-2),
            np.stack([ab, bc, ca], axis=-2),
        ],
        axis=-3,
    )


def fan_split(corners: np.ndarray, apex: np.ndarray) -> np.ndarray:
    """Three triangles joining ``apex`` to each edge of ``corners``."""
    a, b, c = corners
    return np.stack([[apex, a, b], [apex, b, c], [apex, c, a]])


def adaptive_triangle_rule(corners: np.ndarray, target: np.ndarray, ratio: float = 1.0, max_level: int = 6):
    """Subdivide until each piece is at most ``ratio`` times its distance to ``target``.

    Returns flattened nodes ``(q, 3)`` and weights ``(q,)`` of the 7-point
    rule on the resulting pieces. ``target`` must not lie on the triangle.
    """
    nodes, w, _ = adaptive_triangle_rule_batch(
        np.asarray(corners, dtype=float)[None], np.asarray(target, dtype=float)[None], ratio, max_level
    )
    return nodes, w


def adaptive_triangle_rule_batch(corners, targets, ratio: float = 1.0, max_level: int = 6):
    """Batched :func:`adaptive_triangle_rule` for triangle/target pairs.

    ``corners`` is ``(M, 3, 3)`` and ``targets`` ``(M, 3)``. Returns nodes
    ``(q, 3)``, weights ``(q,)`` and the pair index owning each node.
    """
    pending = np.asarray(corners, dtype=float)
    targets = np.asarray(targets, dtype=float)
    owner = np.arange(len(pending))
    done, done_owner = [], []
    for level in range(max_level + 1):
        cent = pending.mean(axis=1)
        edges = pending - np.roll(pending, 1, axis=1)
        diam = np.linalg.norm(edges, axis=2).max(axis=1)
        dist = np.linalg.norm(cent - targets[owner], axis=1)
        # slack keeps the decision stable for pieces exactly at the threshold
        fine = (diam <= ratio * dist * (1.0 + 1e-9)) | (level == max_level)
        done.append(pending[fine])
        done_owner.append(owner[fine])
        if fine.all():
            break
        pending = split4(pending[~fine]).reshape(-1, 3, 3)
        owner = np.repeat(owner[~fine], 4)
    pieces = np.concatenate(done)
    piece_owner = np.concatenate(done_owner)
    nodes, w = triangle_rule(pieces)
    q = nodes.shape[1]
    return nodes.reshape(-1, 3), w.ravel(), np.repeat(piece_owner, q)


def polar_radial_moments(corners: np.ndarray, x: np.ndarray, n_gauss: int = 24):
    """Moments of ``1/r`` over a flat triangle for an in-plane point ``x``.

    Returns ``(m0, M2)`` with ``m0 = int 1/|y-x| dA`` and
    ``M2 = int (y-x)(y-x)^T / |y-x|^3 dA``, computed in polar coordinates
    centred at ``x`` where the radial integral is exact. ``x`` must lie inside
    the triangle or on its boundary away from corners.
    """
    corners = np.asarray(corners, dtype=float)
    x = np.asarray(x, dtype=float)
    t, w = np.polynomial.legendre.leggauss(n_gauss)
    m0 = 0.0
    M2 = np.zeros((3, 3))
    for i in range(3):
        p1, p2 = corners[i], corners[(i + 1) % 3]
        d1, d2 = p1 - x, p2 - x
        edge = p2 - p1
        # foot of the perpendicular from x onto the edge line
        s = -np.dot(d1, edge) / np.dot(edge, edge)
        foot = d1 + s * edge
        h = np.linalg.norm(foot)
        if h < 1e-14 * np.linalg.norm(edge):
            continue  # x on this edge: zero angular extent
        f = foot / h
        g = edge / np.linalg.norm(edge)
        # direction e(phi) = cos(phi) f + sin(phi) g, distance to edge h / cos(phi)
        phi1 = math.atan2(np.dot(d1, g), np.dot(d1, f))
        phi2 = math.atan2(np.dot(d2, g), np.dot(d2, f))
        half = 0.5 * (phi2 - phi1)
        phi = 0.5 * (phi1 + phi2) + half * t
        R = h / np.cos(phi)
        e = np.cos(phi)[:, None] * f + np.sin(phi)[:, None] * g
        wt = half * w * R
        m0 += wt.sum()
        M2 += np.einsum("q,qi,qj->ij", wt, e, e)
    return abs(m0), M2 if m0 >= 0 else -M2


def square_inverse_distance(a: float, c: float) -> float:
    """``int_{[-a,a]^2} (u^2 + v^2 + c^2)^{-1/2} du dv`` in closed form (``c > 0``)."""

    def G(u, v):
        rho = math.sqrt(u * u + v * v + c * c)
        return u * math.log(v + rho) + v * math.log(u + rho) - c * math.atan(u * v / (c * rho))

    return G(a, a) - G(-a, a) - G(a, -a) + G(-a, -a)


def cube_inverse_distance() -> float:
    """``int_{[-1/2,1/2]^3} 1/|x| dx`` via six pyramids over the faces."""
    return 6.0 * 0.25 * square_inverse_distance(0.5, 0.5)
