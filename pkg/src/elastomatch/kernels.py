"""Analytic kernels of time-harmonic isotropic elasticity (unit density).

Every matrix kernel here is written in the radial form

    Gamma(x, y) = A(r) I + B(r) rhat rhat^T,    r = |x - y|,  rhat = (x - y) / r,

so that first derivatives, tractions and the static limit are closed-form.
The differences ``e^{i k_s r} - e^{i k_p r}`` divided by ``omega**2`` lose
all precision for small ``k r``; the helpers ``_q1``/``_q2``/``_q3`` switch
to their power series there.

All functions broadcast over leading axes: points have shape ``(..., 3)`` and
matrices come back as ``(..., 3, 3)``.
"""

from __future__ import annotations

import math

import numpy as np

from .material import ElasticMaterial, Polarization

FOUR_PI = 4.0 * math.pi
_SERIES_SWITCH = 1.0
_SERIES_TERMS = 32


def _series_coefficients(poly) -> np.ndarray:
    coeffs = np.zeros(_SERIES_TERMS)
    for m in range(2, _SERIES_TERMS):
        coeffs[m] = poly(m) / math.factorial(m)
    return coeffs


# q_j(a) = Q_j(a) - Q_j(0) with
#   Q1 = e^{ia} (ia - 1)
#   Q2 = e^{ia} (3 - 3 ia + (ia)^2)
#   Q3 = e^{ia} (-9 + 9 ia - 4 (ia)^2 + (ia)^3)
# and the power series coefficient of (ia)^m given by the lambdas below.
_C1 = _series_coefficients(lambda m: (m - 1))
_C2 = _series_coefficients(lambda m: (m - 1) * (m - 3))
_C3 = _series_coefficients(lambda m: (m - 1) * (m - 3) ** 2)


def _horner(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


def _q(a: np.ndarray, which: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    ia = 1j * a
    small = np.abs(a) < _SERIES_SWITCH
    with np.errstate(all="ignore"):
        e = np.exp(ia)
        if which == 1:
            direct = e * (ia - 1.0) + 1.0
            coeffs = _C1
        elif which == 2:
            direct = e * (3.0 - 3.0 * ia + ia**2) - 3.0
            coeffs = _C2
        else:
            direct = e * (-9.0 + 9.0 * ia - 4.0 * ia**2 + ia**3) + 9.0
            coeffs = _C3
    if not np.any(small):
        return direct
    series = _horner(coeffs, ia)
    return np.where(small, series, direct)


def _split(diff: np.ndarray, *, allow_zero: bool = False):
    diff = np.asarray(diff, dtype=float)
    r = np.linalg.norm(diff, axis=-1)
    if not allow_zero and np.any(r == 0.0):
        raise ValueError("kernel evaluated at its singular point x == y")
    with np.errstate(invalid="ignore", divide="ignore"):
        rhat = diff / r[..., None]
    return r, rhat


def _require_dynamic(mat: ElasticMaterial) -> None:
    if not mat.omega > 0:
        raise ValueError("dynamic kernel requires omega > 0; use the static kernel")


def radial_coefficients(mat: ElasticMaterial, r: np.ndarray):
    """Return ``(A, B)`` with ``Gamma = A I + B rhat rhat^T``."""
    _require_dynamic(mat)
    ks, kp, w2 = mat.k_s, mat.k_p, mat.omega**2
    r = np.asarray(r, dtype=float)
    A = np.exp(1j * ks * r) / (FOUR_PI * mat.mu * r) + (_q(ks * r, 1) - _q(kp * r, 1)) / (
        FOUR_PI * w2 * r**3
    )
    B = (_q(ks * r, 2) - _q(kp * r, 2)) / (FOUR_PI * w2 * r**3)
    return A, B


def radial_derivatives(mat: ElasticMaterial, r: np.ndarray):
    """Return ``(dA/dr, dB/dr)``."""
    _require_dynamic(mat)
    ks, kp, w2 = mat.k_s, mat.k_p, mat.omega**2
    r = np.asarray(r, dtype=float)
    dphi = np.exp(1j * ks * r) * (1j * ks * r - 1.0) / (FOUR_PI * r**2)
    dA = dphi / mat.mu + (_q(ks * r, 2) - _q(kp * r, 2)) / (FOUR_PI * w2 * r**4)
    dB = (_q(ks * r, 3) - _q(kp * r, 3)) / (FOUR_PI * w2 * r**4)
    return dA, dB


def static_coefficients(mat: ElasticMaterial) -> tuple[float, float]:
    """Constants ``(a, b)`` with ``Gamma0 = (a I + b rhat rhat^T) / r``."""
    lam, mu = mat.lam, mat.mu
    denom = 8.0 * math.pi * mu * (lam + 2.0 * mu)
    return (lam + 3.0 * mu) / denom, (lam + mu) / denom


def _assemble(A, B, rhat):
    eye = np.eye(3)
    return A[..., None, None] * eye + B[..., None, None] * rhat[..., :, None] * rhat[..., None, :]


def fundamental_solution(mat: ElasticMaterial, x, y) -> np.ndarray:
    """Kupradze matrix ``Gamma(x, y)`` of the Navier equation.

    Symmetric in its matrix indices and in the exchange ``x <-> y``.
    """
    r, rhat = _split(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    A, B = radial_coefficients(mat, r)
    return _assemble(A, B, rhat)


def helmholtz_hessian(k: float, diff) -> np.ndarray:
    """Hessian of ``e^{ik r} / (4 pi r)`` with respect to ``x``."""
    r, rhat = _split(diff)
    phi = np.exp(1j * k * r) / (FOUR_PI * r)
    d1 = phi * (1j * k - 1.0 / r)
    d2 = phi * ((1j * k - 1.0 / r) ** 2 + 1.0 / r**2)
    return _assemble(d1 / r, d2 - d1 / r, rhat)


def fundamental_solution_curl_form(mat: ElasticMaterial, x, y) -> np.ndarray:
    """Same kernel built as ``(curl curl Phi_s - grad div Phi_p) / omega**2``.

    Independent route (no series, no radial split of the difference) used to
    cross-check :func:`fundamental_solution` at moderate ``k r``.
    """
    _require_dynamic(mat)
    diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r, _ = _split(diff)
    ks, kp, w2 = mat.k_s, mat.k_p, mat.omega**2
    phi_s = np.exp(1j * ks * r) / (FOUR_PI * r)
    # curl curl (phi I) = grad grad phi - lap(phi) I  and  lap(phi) = -k^2 phi
    curlcurl = helmholtz_hessian(ks, diff) + (ks**2 * phi_s)[..., None, None] * np.eye(3)
    graddiv = helmholtz_hessian(kp, diff)
    return (curlcurl - graddiv) / w2


def static_fundamental_solution(mat: ElasticMaterial, x) -> np.ndarray:
    """Kelvin matrix ``Gamma0(x)`` (``omega = 0``), real valued."""
    r, rhat = _split(np.asarray(x, dtype=float))
    a, b = static_coefficients(mat)
    return _assemble(a / r, b / r, rhat).real


def fundamental_solution_gradient(mat: ElasticMaterial, x, y) -> np.ndarray:
    """``G[..., j, k, m] = d Gamma_jk / d x_m`` (derivative in the first argument)."""
    r, rhat = _split(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    A, B = radial_coefficients(mat, r)
    dA, dB = radial_derivatives(mat, r)
    return _gradient_from_radial(B, dA, dB, r, rhat)


def _gradient_from_radial(B, dA, dB, r, rhat):
    eye = np.eye(3)
    rj = rhat[..., :, None, None]
    rk = rhat[..., None, :, None]
    rm = rhat[..., None, None, :]
    Bor = (B / r)[..., None, None, None]
    return (
        dA[..., None, None, None] * rm * eye[:, :, None]
        + dB[..., None, None, None] * rm * rj * rk
        + Bor * (eye[:, None, :] * rk + eye[None, :, :] * rj - 2.0 * rm * rj * rk)
    )


def traction(mat: ElasticMaterial, grad_u, normal) -> np.ndarray:
    """Pseudo-stress traction of a field from its gradient.

    ``grad_u[..., j, m] = d u_j / d x_m``. Returns
    ``(alpha + mu) (nu . grad) u + beta nu div u + alpha nu x curl u``.
    """
    grad_u = np.asarray(grad_u)
    nu = np.asarray(normal, dtype=float)
    dnu = np.einsum("...jm,...m->...j", grad_u, nu)
    div = np.einsum("...jj->...", grad_u)
    curl = np.stack(
        [
            grad_u[..., 2, 1] - grad_u[..., 1, 2],
            grad_u[..., 0, 2] - grad_u[..., 2, 0],
            grad_u[..., 1, 0] - grad_u[..., 0, 1],
        ],
        axis=-1,
    )
    nu_b = np.broadcast_to(nu, curl.shape)
    return (
        (mat.alpha + mat.mu) * dnu
        + mat.beta * nu * div[..., None]
        + mat.alpha * np.cross(nu_b, curl)
    )


def traction_kernel(mat: ElasticMaterial, x, y, nu_y) -> np.ndarray:
    """Double-layer kernel ``Pi(x, y)`` with ``Pi^T P = P_y(Gamma(x, y) P)``.

    With the pseudo-stress constants the ``1/r**2`` part is proportional to
    ``rhat . nu_y`` and therefore vanishes for coplanar points on a flat panel.
    """
    r, rhat = _split(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    A, B = radial_coefficients(mat, r)
    dA, dB = radial_derivatives(mat, r)
    return _pi_from_radial(mat, B, dA, dB, r, rhat, np.asarray(nu_y, dtype=float))


def _pi_from_radial(mat, B, dA, dB, r, rhat, nu):
    mu, al, be = mat.mu, mat.alpha, mat.beta
    Bor = B / r
    c1 = mu * dA + al * Bor
    c2 = (mu + al) * (dB - 2.0 * Bor)
    c3 = (mu + al) * Bor + be * (dA + dB + 2.0 * Bor)
    c4 = mu * Bor + al * dA
    nu = np.broadcast_to(nu, rhat.shape)
    rn = np.einsum("...i,...i->...", rhat, nu)
    eye = np.eye(3)
    rr = rhat[..., :, None] * rhat[..., None, :]
    return -(
        (c1 * rn)[..., None, None] * eye
        + (c2 * rn)[..., None, None] * rr
        + c3[..., None, None] * rhat[..., :, None] * nu[..., None, :]
        + c4[..., None, None] * nu[..., :, None] * rhat[..., None, :]
    )


def static_traction_kernel(mat: ElasticMaterial, x, y, nu_y) -> np.ndarray:
    """Static counterpart ``Pi0(x, y)``; real valued."""
    r, rhat = _split(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
    a, b = static_coefficients(mat)
    mu, al = mat.mu, mat.alpha
    nu = np.broadcast_to(np.asarray(nu_y, dtype=float), rhat.shape)
    rn = np.einsum("...i,...i->...", rhat, nu) / r**2
    rr = rhat[..., :, None] * rhat[..., None, :]
    return rn[..., None, None] * ((mu * a - al * b) * np.eye(3) + 3.0 * b * (mu + al) * rr)


def self_limit(mat: ElasticMaterial) -> np.ndarray:
    """``lim_{r -> 0} (Gamma - Gamma0)``, a multiple of the identity."""
    val = 1j / (12.0 * math.pi) * (2.0 * mat.k_s / mat.mu + mat.k_p / (mat.lam + 2.0 * mat.mu))
    return val * np.eye(3)


def plane_wave(mat: ElasticMaterial, pol: Polarization, x):
    """Pressure and shear plane waves ``(u_p, u_s)`` at points ``x``.

    ``omega == 0`` returns the static limits ``(d.p) d / (lam + 2 mu)`` and
    ``(d x p) x d / mu``.
    """
    x = np.asarray(x, dtype=float)
    d, p = pol.d, pol.p
    phase = x @ d
    amp_p = (d @ p) * d / (mat.lam + 2.0 * mat.mu)
    amp_s = np.cross(np.cross(d, p), d) / mat.mu
    up = np.exp(1j * mat.k_p * phase)[..., None] * amp_p
    us = np.exp(1j * mat.k_s * phase)[..., None] * amp_s
    return up, us


def point_source(mat: ElasticMaterial, p, x, y) -> np.ndarray:
    """Field ``Gamma(x, y) p`` of a point force ``p`` at ``y``."""
    return np.einsum("...jk,k->...j", fundamental_solution(mat, x, y), np.asarray(p, dtype=float))


def point_source_plane_wave_split(mat: ElasticMaterial, p, x, z):
    """Two-plane-wave approximation of ``Gamma(x + z, 0) p`` for large ``|z|``.

    Returns ``(e^{i k_p |z|} u_p(x) + e^{i k_s |z|} u_s(x)) / (4 pi |z|)``
    with direction ``zhat``.
    """
    z = np.asarray(z, dtype=float)
    R = np.linalg.norm(z)
    pol = Polarization(p=np.asarray(p, dtype=float), d=z / R)
    up, us = plane_wave(mat, pol, x)
    return (np.exp(1j * mat.k_p * R) * up + np.exp(1j * mat.k_s * R) * us) / (FOUR_PI * R)


def far_field_kernel(mat: ElasticMaterial, xhat, y):
    """Leading ``1/|x|`` coefficients of ``Gamma(x, y)`` as ``x -> infinity``.

    Returns ``(shear, pressure)`` such that
    ``Gamma(x, y) ~ e^{i k_s |x|}/|x| shear + e^{i k_p |x|}/|x| pressure``.
    """
    xhat = np.asarray(xhat, dtype=float)
    y = np.asarray(y, dtype=float)
    proj = xhat[..., :, None] * xhat[..., None, :]
    ph = np.einsum("...i,...i->...", xhat, y)
    shear = (np.exp(-1j * mat.k_s * ph) / (FOUR_PI * mat.mu))[..., None, None] * (np.eye(3) - proj)
    pres = (np.exp(-1j * mat.k_p * ph) / (FOUR_PI * (mat.lam + 2.0 * mat.mu)))[..., None, None] * proj
    return shear, pres
