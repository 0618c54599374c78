"""Isotropic elastic material parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def lame_from_engineering(E: float, nu: float) -> tuple[float, float]:
    """Convert Young's modulus and Poisson ratio to Lamé coefficients.

    Parameters
    ----------
    E : float
        Young's modulus, must be positive.
    nu : float
        Poisson ratio in the open interval (-1, 0.5).

    Returns
    -------
    (lam, mu) : tuple of float
    """
    if not E > 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    if not -1.0 < nu < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 0.5), got {nu}")
    lam = nu * E / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    return lam, mu


def engineering_from_lame(lam: float, mu: float) -> tuple[float, float]:
    """Inverse of :func:`lame_from_engineering`."""
    E = mu * (3.0 * lam + 2.0 * mu) / (lam + mu)
    nu = lam / (2.0 * (lam + mu))
    return E, nu


@dataclass(frozen=True)
class ElasticMaterial:
    """Homogeneous background with unit density.

    ``omega == 0`` denotes the static limit; wavenumbers are then zero.
    """

    omega: float
    lam: float
    mu: float
    rho: float = 1.0

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if not self.mu > 0:
            raise ValueError("shear modulus must be positive")
        if not self.lam + 2.0 * self.mu > 0:
            raise ValueError("lambda + 2 mu must be positive")
        if self.rho != 1.0:
            raise ValueError("only unit background density is supported")

    @classmethod
    def from_engineering(cls, omega: float, E: float, nu: float) -> "ElasticMaterial":
        lam, mu = lame_from_engineering(E, nu)
        return cls(omega=omega, lam=lam, mu=mu)

    def with_omega(self, omega: float) -> "ElasticMaterial":
        return ElasticMaterial(omega=omega, lam=self.lam, mu=self.mu)

    def with_lam(self, lam: float) -> "ElasticMaterial":
        return ElasticMaterial(omega=self.omega, lam=lam, mu=self.mu)

    @property
    def k_s(self) -> float:
        return self.omega / math.sqrt(self.mu)

    @property
    def k_p(self) -> float:
        return self.omega / math.sqrt(self.lam + 2.0 * self.mu)

    @property
    def alpha(self) -> float:
        lam, mu = self.lam, self.mu
        return mu * (lam + mu) / (lam + 3.0 * mu)

    @property
    def beta(self) -> float:
        lam, mu = self.lam, self.mu
        return (lam + mu) * (lam + 2.0 * mu) / (lam + 3.0 * mu)

    def as_dict(self) -> dict:
        return {"omega": self.omega, "lam": self.lam, "mu": self.mu}


@dataclass(frozen=True)
class Polarization:
    """Incident polarization ``p`` and unit propagation direction ``d``."""

    p: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float).reshape(3)
        d = np.asarray(self.d, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("polarization must be finite")
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "d", d)
