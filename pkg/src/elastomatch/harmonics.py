"""Degree-one vector spherical harmonics and a product quadrature on the sphere."""

from __future__ import annotations

import math

import numpy as np

_C0 = math.sqrt(3.0 / (4.0 * math.pi))
_C1 = math.sqrt(3.0 / (8.0 * math.pi))


def _ambient_gradient(m: int) -> np.ndarray:
    # Y_1^m restricted from a linear function a . x on the unit sphere
    # (complex, orthonormal, Condon-Shortley phase).
    if m == 0:
        return np.array([0.0, 0.0, _C0], dtype=complex)
    if m == 1:
        return -_C1 * np.array([1.0, 1j, 0.0])
    if m == -1:
        return _C1 * np.array([1.0, -1j, 0.0])
    raise ValueError(f"order m must be -1, 0 or 1, got {m}")


def scalar_harmonic(m: int, xhat) -> np.ndarray:
    """``Y_1^m(xhat)``."""
    return np.asarray(xhat, dtype=float) @ _ambient_gradient(m)


def vector_spherical_harmonics(m: int, xhat):
    """Return ``(U_1^m, V_1^m)`` at unit vectors ``xhat`` of shape ``(..., 3)``.

    ``U = Grad Y / 2`` and ``V = xhat x Grad Y / 2`` with ``Grad`` the surface
    gradient; both are tangential.
    """
    xhat = np.asarray(xhat, dtype=float)
    norms = np.linalg.norm(xhat, axis=-1)
    if not np.allclose(norms, 1.0, atol=1e-12):
        raise ValueError("directions must be unit vectors")
    a = _ambient_gradient(m)
    radial = xhat @ a
    grad = a - radial[..., None] * xhat
    U = 0.5 * grad
    V = 0.5 * np.cross(xhat, grad)
    return U, V


def sphere_quadrature(n_theta: int, n_phi: int | None = None):
    """Gauss-Legendre in ``cos(theta)`` times the trapezoid rule in ``phi``.

    Returns ``(directions, weights)``; weights sum to ``4 pi``. Exact for
    spherical polynomials of degree ``< min(2 n_theta, n_phi)``.
    """
    n_phi = 2 * n_theta if n_phi is None else n_phi
    t, wt = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(t, phi, indexing="ij")
    s = np.sqrt(1.0 - T**2)
    dirs = np.stack([s * np.cos(P), s * np.sin(P), T], axis=-1).reshape(-1, 3)
    weights = np.outer(wt, np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
    return dirs, weights
