"""Experiment configuration: a single JSON document with strict keys."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError
from .forward import KINDS, Discretization
from .imaging import LOCATION_INDICATORS
from .material import ElasticMaterial, lame_from_engineering

INDICATOR_MODES = LOCATION_INDICATORS + ("auto",)


@dataclass(frozen=True)
class MaterialConfig:
    """Either ``(E, nu)`` or ``(lam, mu)``; the other pair is left ``None``."""

    E: float | None = 3.0
    nu: float | None = 0.475
    lam: float | None = None
    mu: float | None = None

    def lame(self) -> tuple[float, float]:
        if self.lam is not None or self.mu is not None:
            if self.lam is None or self.mu is None or self.E is not None or self.nu is not None:
                raise ConfigError("give either E and nu or lam and mu")
            return float(self.lam), float(self.mu)
        if self.E is None or self.nu is None:
            raise ConfigError("give either E and nu or lam and mu")
        try:
            return lame_from_engineering(self.E, self.nu)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class GridConfig:
    """Measurement surface, far-field sphere and sampling-grid resolution."""

    surface_points: int = 11
    sphere_points: int = 16
    search_center: tuple[float, float, float] = (40.37, 0.21, -0.13)
    spacing: float = 0.25
    half_width: int = 10
    refine_factor: int = 5


@dataclass(frozen=True)
class DictionaryConfig:
    cap_half_angle_deg: float = 2.0
    cap_spacing_deg: float = 0.25
    direction_tolerance_deg: float = 0.5


@dataclass(frozen=True)
class MediumConfig:
    inside_value: float = -4.0


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "rigid"
    true_shape: int = 1
    z0: tuple[float, float, float] = (40.0, 0.0, 0.0)
    material: MaterialConfig = field(default_factory=MaterialConfig)
    omega1: float = 1.0
    omega2: float = 20.0
    polarization: tuple[float, float, float] = (0.0, 0.70710678118654752, 0.70710678118654752)
    noise: float = 0.0
    grids: GridConfig = field(default_factory=GridConfig)
    panel_budget: int = 300
    voxel_budget: int = 512
    max_unknowns: int = 3 * 20**3
    medium: MediumConfig = field(default_factory=MediumConfig)
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    rng_seed: int = 0
    indicator: str = "auto"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 < self.omega1 < self.omega2:
            raise ConfigError("need 0 < omega1 < omega2")
        if self.noise < 0:
            raise ConfigError("noise level must be non-negative")
        if self.indicator not in INDICATOR_MODES:
            raise ConfigError(f"indicator must be one of {INDICATOR_MODES}")
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must be an unsigned 64-bit integer")
        if np.linalg.norm(self.polarization) == 0:
            raise ConfigError("polarization must be nonzero")
        if min(self.panel_budget, self.voxel_budget) < 1 or self.panel_budget < 24:
            raise ConfigError("panel budget must be at least 24 and voxel budget positive")
        # dense 3N x 3N complex matrices: 16 bytes per entry
        if 3 * max(self.panel_budget, self.voxel_budget) > self.max_unknowns:
            raise ConfigError("budgets exceed the unknown limit")
        if self.grids.surface_points < 2 or self.grids.sphere_points < 2:
            raise ConfigError("surface and sphere resolutions must be at least 2")
        if self.grids.spacing <= 0 or self.grids.half_width < 0 or self.grids.refine_factor < 1:
            raise ConfigError("invalid sampling grid")
        self.material.lame()

    # ---- derived objects

    def material_at(self, omega: float) -> ElasticMaterial:
        lam, mu = self.material.lame()
        return ElasticMaterial(omega=omega, lam=lam, mu=mu)

    def discretization(self) -> Discretization:
        return Discretization(self.panel_budget, self.voxel_budget, self.medium.inside_value)

    def unit_polarization(self) -> np.ndarray:
        p = np.asarray(self.polarization, dtype=float)
        return p / np.linalg.norm(p)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        try:
            return replace(self, **kw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


_NESTED = {"material": MaterialConfig, "grids": GridConfig, "dictionary": DictionaryConfig, "medium": MediumConfig}
_VECTORS = {"z0", "polarization", "search_center"}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown config keys at {path or 'top level'}: {', '.join(unknown)}")
    kw = {}
    for key, value in data.items():
        if key in _NESTED and cls is ExperimentConfig:
            kw[key] = _build(_NESTED[key], value, key)
        elif key in _VECTORS:
            if not (isinstance(value, list) and len(value) == 3):
                raise ConfigError(f"{key} must be a list of three numbers")
            kw[key] = tuple(float(v) for v in value)
        else:
            kw[key] = value
    if cls is MaterialConfig and ("lam" in data or "mu" in data):
        # an explicit Lame pair replaces the engineering defaults
        kw.setdefault("E", None)
        kw.setdefault("nu", None)
    try:
        return cls(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
