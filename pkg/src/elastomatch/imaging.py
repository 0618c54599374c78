"""Localization and shape-matching indicators and the two-stage driver.

Stage one scans candidate locations ``z~`` with an indicator built from
low-frequency data. Stage two compares regular-frequency data with
dictionary test fields assembled at the located point. All indicators are
normalized inner products, so they ignore the unknown source amplitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import dictionary as dic
from .errors import LocalizationError
from .geometry import SamplingGrid
from .harmonics import vector_spherical_harmonics
from .material import ElasticMaterial

LOCATION_INDICATORS = ("ip", "ip-phaseless", "is")
SHAPE_INDICATORS = ("jp", "js")
FLAT_THRESHOLD = 1e-6
_CHUNK = 2048


@dataclass(frozen=True)
class Measurement:
    """Complex 3-vector samples with quadrature weights.

    ``layout`` is ``"near"`` for receiver positions on the measurement
    surface and ``"far"`` for unit directions of a far-field pattern.
    """

    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    omega: float
    layout: str = "near"
    noise_level: float = 0.0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        v = np.atleast_2d(np.asarray(self.values, dtype=complex))
        if pts.shape != v.shape or pts.shape[1:] != (3,) or len(w) != len(pts):
            raise ValueError("points, weights and values must describe the same samples")
        if not np.all(np.isfinite(v)):
            raise ValueError("measurement contains non-finite samples")
        if self.layout not in ("near", "far"):
            raise ValueError(f"unknown layout {self.layout!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "values", v)

    def scaled(self, factor: complex) -> "Measurement":
        return replace(self, values=self.values * factor)


@dataclass(frozen=True)
class IndicatorMap:
    """Indicator values over candidate points (stage one) or shape ids (stage two)."""

    keys: np.ndarray
    values: np.ndarray

    @property
    def argmax(self) -> int:
        # np.argmax returns the first maximum, i.e. the lowest key in list order
        return int(np.argmax(self.values))

    @property
    def best_key(self):
        return self.keys[self.argmax]

    @property
    def max_value(self) -> float:
        return float(self.values[self.argmax])


# ---------------------------------------------------------------- helpers


def receiver_directions(points):
    """``x/|x|`` per receiver and a mask that is False for receivers at the origin."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    r = np.linalg.norm(points, axis=1)
    valid = r > 0
    xhat = np.zeros_like(points)
    xhat[valid] = points[valid] / r[valid, None]
    return xhat, valid


def project_radial(measured: Measurement) -> Measurement:
    """Replace each sample ``v`` by ``(xhat . v) xhat`` with ``xhat = x/|x|``."""
    xhat, valid = receiver_directions(measured.points)
    if not valid.all():
        raise ValueError("a receiver at the origin has no radial direction")
    return replace(measured, values=_radial(measured.values, xhat))


def _radial(values, xhat):
    return np.einsum("ni,ni->n", xhat, values)[:, None] * xhat


def _tangential(values, xhat):
    return values - _radial(values, xhat)


def _wnorm(w, v) -> float:
    return float(np.sqrt(np.sum(w * np.sum(np.abs(v) ** 2, axis=-1))))


def _near_parts(measured: Measurement):
    if measured.layout != "near":
        raise ValueError("indicator needs receiver samples on the measurement surface")
    xhat, valid = receiver_directions(measured.points)
    # receivers without a radial direction carry no projected data
    return measured.points[valid], measured.weights[valid], measured.values[valid], xhat[valid]


def _chunks(zt):
    zt = np.atleast_2d(np.asarray(zt, dtype=float))
    for start in range(0, len(zt), _CHUNK):
        yield zt[start : start + _CHUNK]


# -------------------------------------------------------------- stage one


def indicator_ip(measured: Measurement, zt, mat: ElasticMaterial, *, phaseless: bool = False) -> np.ndarray:
    """Radial-projection indicator with a pressure-phase test function.

    The test function at candidate ``z~`` is
    ``e^{i k_s |z~|}/(4 pi |z~|) * e^{i k_p |x - z~|}/|x - z~| * xhat``.
    With ``phaseless=True`` the numerator pairs pointwise moduli.
    Values lie in ``[0, 1]``.
    """
    x, w, v, xhat = _near_parts(measured)
    proj = np.einsum("ni,ni->n", xhat, v)  # xhat . u, since P u = (xhat . u) xhat
    norm_u = math.sqrt(float(np.sum(w * np.abs(proj) ** 2)))
    if norm_u == 0:
        raise ValueError("measured radial projection vanishes")
    out = []
    for z in _chunks(zt):
        rz = np.linalg.norm(z, axis=1)
        r = np.linalg.norm(x[None] - z[:, None], axis=2)
        amp = 1.0 / (4.0 * math.pi * rz[:, None] * r)
        norm_t = np.sqrt(np.sum(w * amp**2, axis=1))
        if phaseless:
            num = np.sum(w * np.abs(proj) * amp, axis=1)
        else:
            # the e^{i k_s |z~|} factor has unit modulus and drops out of |.|
            test = amp * np.exp(1j * mat.k_p * r)
            num = np.abs(np.sum(w * proj * np.conj(test), axis=1))
        out.append(num / (norm_u * norm_t))
    return np.concatenate(out)


def _harmonic_basis(directions) -> np.ndarray:
    basis = []
    for m in (-1, 0, 1):
        basis.extend(vector_spherical_harmonics(m, directions))
    return np.asarray(basis)  # (6, n, 3)


def indicator_is(measured: Measurement, zt, mat: ElasticMaterial) -> np.ndarray:
    """Shear far-field indicator against degree-one vector harmonics.

    For each candidate the tangential far field is paired with
    ``e^{-i k_s xhat . z~} U_1^m`` and ``e^{-i k_s xhat . z~} V_1^m``. The root
    sum of squares of the six pairings is divided by the far-field norm. The
    common ``1/(4 pi |z~|)`` factor of numerator and denominator cancels.
    """
    if measured.layout != "far":
        raise ValueError("indicator_is needs far-field samples")
    xhat, w = measured.points, measured.weights
    F = _tangential(measured.values, xhat)
    norm = _wnorm(w, F)
    if norm == 0:
        raise ValueError("measured shear far field vanishes")
    # project once onto the harmonics; only the translation phase depends on z~
    coeff = np.einsum("hni,ni,n->hn", np.conj(_harmonic_basis(xhat)), F, w)
    out = []
    for z in _chunks(zt):
        phase = np.exp(1j * mat.k_s * (z @ xhat.T))  # conj of e^{-i k_s xhat . z~}
        ip = coeff @ phase.T  # (6, G)
        out.append(np.sqrt(np.sum(np.abs(ip) ** 2, axis=0)) / norm)
    return np.concatenate(out)


def evaluate_location_indicator(measured: Measurement, zt, mat: ElasticMaterial, which: str) -> np.ndarray:
    if which == "ip":
        return indicator_ip(measured, zt, mat)
    if which == "ip-phaseless":
        return indicator_ip(measured, zt, mat, phaseless=True)
    if which == "is":
        return indicator_is(measured, zt, mat)
    raise ValueError(f"unknown location indicator {which!r}; expected one of {LOCATION_INDICATORS}")


@dataclass(frozen=True)
class LocationResult:
    z: np.ndarray
    value: float
    coarse: IndicatorMap
    fine: IndicatorMap


def locate(
    measured: Measurement, grid: SamplingGrid, mat: ElasticMaterial, which: str = "is", *, refine_factor: int = 5
) -> LocationResult:
    """Coarse sweep over ``grid`` followed by one refinement around its peak.

    Ties go to the lexicographically lowest point. Raises
    :class:`LocalizationError` when the coarse map is flat.
    """
    pts = grid.points
    coarse = IndicatorMap(pts, evaluate_location_indicator(measured, pts, mat, which))
    if coarse.max_value - float(np.median(coarse.values)) < FLAT_THRESHOLD:
        raise LocalizationError("indicator is flat over the sampling grid")
    fine_grid = grid.refined(coarse.best_key, refine_factor)
    fpts = fine_grid.points
    fine = IndicatorMap(fpts, evaluate_location_indicator(measured, fpts, mat, which))
    return LocationResult(np.array(fine.best_key), fine.max_value, coarse, fine)


# -------------------------------------------------------------- stage two


def _normalized_pair(a, b, w) -> float:
    na, nb = _wnorm(w, a), _wnorm(w, b)
    if nb == 0:
        raise ValueError("test field vanishes on the measurement surface")
    if na == 0:
        raise ValueError("measured projection vanishes")
    ip = np.sum(w[:, None] * a * np.conj(b))
    return float(abs(ip) / (na * nb))


def indicator_jp(measured: Measurement, entry: dic.DictionaryEntry, z_ring) -> float:
    """Radial projections of the data and of the pressure-phase test field."""
    x, w, v, xhat = _near_parts(measured)
    test = dic.test_field_sp(entry, z_ring, x)
    return _normalized_pair(_radial(v, xhat), _radial(test, xhat), w)


def indicator_js(measured: Measurement, entry: dic.DictionaryEntry, z_ring) -> float:
    """Tangential projections of the data and of the shear-phase test field."""
    x, w, v, xhat = _near_parts(measured)
    test = dic.test_field_ss(entry, z_ring, x)
    return _normalized_pair(_tangential(v, xhat), _tangential(test, xhat), w)


@dataclass(frozen=True)
class IdentificationResult:
    shape_id: int
    shape_ids: tuple[int, ...]
    raw: np.ndarray
    normalized: np.ndarray
    ties: tuple[int, ...]


def identify(measured: Measurement, entries, z_ring, which: str = "js") -> IdentificationResult:
    """Evaluate the shape indicator for every entry and pick the row maximum.

    Values are divided by the row maximum. Exact ties go to the lowest
    shape id and are listed in ``ties``.
    """
    if which not in SHAPE_INDICATORS:
        raise ValueError(f"unknown shape indicator {which!r}; expected one of {SHAPE_INDICATORS}")
    entries = sorted(entries, key=lambda e: e.shape_id)
    if not entries:
        raise ValueError("no dictionary entries to compare against")
    ids = [e.shape_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("more than one entry per shape id")
    fn = indicator_jp if which == "jp" else indicator_js
    raw = np.array([fn(measured, e, z_ring) for e in entries])
    top = raw.max()
    normalized = raw / top
    tied = tuple(i for i, v in zip(ids, raw) if v == top)
    return IdentificationResult(min(tied), tuple(ids), raw, normalized, tied if len(tied) > 1 else ())


# ---------------------------------------------------------- noise regime


def add_noise(measured: Measurement, level: float, rng: np.random.Generator) -> Measurement:
    """Add complex Gaussian noise with weighted norm ``level`` times that of the data."""
    if level < 0:
        raise ValueError("noise level must be non-negative")
    if level == 0:
        return replace(measured, noise_level=0.0)
    shape = measured.values.shape
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    target = level * _wnorm(measured.weights, measured.values)
    noise *= target / _wnorm(measured.weights, noise)
    return replace(measured, values=measured.values + noise, noise_level=float(level))


def select_indicators(noise_level: float, lam: float, *, threshold: float = 0.1) -> tuple[str, str]:
    """Radial indicators when ``noise_level * lam <= threshold``, shear ones otherwise.

    Radial data carry the ``O(1/lam)`` pressure response, which is only
    usable when the noise sits well below that level.
    """
    if noise_level * lam <= threshold:
        return "ip", "jp"
    return "is", "js"
