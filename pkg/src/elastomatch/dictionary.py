"""Precomputed shear-incidence far fields of the reference shapes.

Each entry stores the shear far field of one reference shape, excited by a
shear plane wave alone, on a small cap of directions around the
backscattering direction ``-d``. Candidate locations far from the
receivers only query directions inside that cap. Test fields for shape
matching are assembled from an entry on demand.

On disk a store is a directory holding ``manifest.json`` and one binary
file per entry. Each binary file holds little-endian complex64 triples,
row-major over directions.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, CoverageError
from .forward import Discretization, ForwardModel, check_kind, discretize
from .geometry import ReferenceShape
from .material import ElasticMaterial, Polarization

STORE_FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"


# ------------------------------------------------------------ direction cap


@dataclass(frozen=True)
class DirectionCap:
    """Gnomonic grid of unit vectors around ``axis``.

    Direction ``(i, j)`` is the normalization of ``axis + t_i e1 + t_j e2``
    with ``t = tan(theta)`` sampled at equal angular steps ``spacing_deg``
    out to ``half_angle_deg`` along both tangent axes.
    """

    axis: tuple[float, float, float]
    half_angle_deg: float = 2.0
    spacing_deg: float = 0.25

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError("cap axis must be a unit vector")
        if not 0 < self.spacing_deg <= 2.0:
            raise ValueError("cap spacing must lie in (0, 2] degrees")
        if not 0 < self.half_angle_deg < 45.0:
            raise ValueError("cap half angle must lie in (0, 45) degrees")

    @property
    def n_side(self) -> int:
        return 2 * int(math.ceil(self.half_angle_deg / self.spacing_deg - 1e-9)) + 1

    def _angles(self) -> np.ndarray:
        half = (self.n_side - 1) // 2
        return np.radians(self.spacing_deg) * np.arange(-half, half + 1)

    def frame(self) -> np.ndarray:
        """Rows ``(axis, e1, e2)`` of a right-handed orthonormal frame."""
        a = np.asarray(self.axis, dtype=float)
        # the seed axis least aligned with a keeps the frame well conditioned
        seed = np.eye(3)[int(np.argmin(np.abs(a)))]
        e1 = np.cross(a, seed)
        e1 /= np.linalg.norm(e1)
        return np.stack([a, e1, np.cross(a, e1)])

    def directions(self) -> np.ndarray:
        """``(n_side**2, 3)`` unit vectors, row-major over ``(i, j)``."""
        a, e1, e2 = self.frame()
        t = np.tan(self._angles())
        T1, T2 = np.meshgrid(t, t, indexing="ij")
        v = a + T1[..., None] * e1 + T2[..., None] * e2
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return v.reshape(-1, 3)

    def locate(self, xhat) -> tuple[np.ndarray, np.ndarray]:
        """Fractional grid indices of query directions.

        Raises :class:`CoverageError` for directions outside the cap.
        """
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        a, e1, e2 = self.frame()
        c = xhat @ a
        if np.any(c <= 0):
            raise CoverageError("query direction points away from the cap")
        th1 = np.arctan((xhat @ e1) / c)
        th2 = np.arctan((xhat @ e2) / c)
        step = math.radians(self.spacing_deg)
        half = (self.n_side - 1) // 2
        f1, f2 = th1 / step + half, th2 / step + half
        tol = 1e-9
        if np.any((f1 < -tol) | (f1 > self.n_side - 1 + tol) | (f2 < -tol) | (f2 > self.n_side - 1 + tol)):
            raise CoverageError("query direction falls outside the stored cap")
        return np.clip(f1, 0, self.n_side - 1), np.clip(f2, 0, self.n_side - 1)

    def interpolate(self, values: np.ndarray, xhat) -> np.ndarray:
        """Bilinear blend of ``values`` (``(n_side**2, 3)``) at ``xhat``."""
        f1, f2 = self.locate(xhat)
        n = self.n_side
        grid = np.asarray(values).reshape(n, n, -1)
        i0 = np.minimum(np.floor(f1).astype(int), n - 2)
        j0 = np.minimum(np.floor(f2).astype(int), n - 2)
        s, t = (f1 - i0)[:, None], (f2 - j0)[:, None]
        return (
            (1 - s) * (1 - t) * grid[i0, j0]
            + s * (1 - t) * grid[i0 + 1, j0]
            + (1 - s) * t * grid[i0, j0 + 1]
            + s * t * grid[i0 + 1, j0 + 1]
        )

    def as_dict(self) -> dict:
        return {"axis": list(self.axis), "half_angle_deg": self.half_angle_deg, "spacing_deg": self.spacing_deg}


# ------------------------------------------------------------------ entries


def _unit(v) -> tuple[float, float, float]:
    v = np.asarray(v, dtype=float).reshape(3)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector")
    return tuple(float(c) for c in v / n)


@dataclass(frozen=True)
class DictionaryEntry:
    """Stored shear far field of one shape for one incidence ``(d, p)``."""

    shape_id: int
    kind: str
    material: ElasticMaterial
    d: tuple[float, float, float]
    p: tuple[float, float, float]
    cap: DirectionCap
    far_field: np.ndarray = field(repr=False)  # (n_dir, 3) complex64

    def key(self) -> tuple:
        return (self.shape_id, self.kind, self.d, self.p)

    def far_field_at(self, xhat) -> np.ndarray:
        return self.cap.interpolate(self.far_field.astype(complex), xhat)


def build_entry(
    shape: ReferenceShape,
    kind: str,
    mat: ElasticMaterial,
    d,
    p,
    *,
    disc: Discretization | None = None,
    half_angle_deg: float = 2.0,
    spacing_deg: float = 0.25,
) -> DictionaryEntry:
    """Solve for a shear plane wave alone and sample its shear far field.

    The cap is centred on the backscattering direction ``-d``.
    """
    check_kind(kind)
    disc = Discretization() if disc is None else disc
    d = _unit(d)
    p = tuple(float(c) for c in np.asarray(p, dtype=float).reshape(3))
    pol = Polarization(p=np.asarray(p), d=np.asarray(d))
    cap = DirectionCap(tuple(-c for c in d), half_angle_deg, spacing_deg)
    model = ForwardModel.build(kind, mat, discretize(shape, kind, disc), disc)
    solution = model.solve(lambda x: kernels.plane_wave(mat, pol, x)[1])
    fs, _ = model.far_field(solution, cap.directions())
    return DictionaryEntry(shape.id, kind, mat, d, p, cap, fs.astype(np.complex64))


def _spherical_factor(k: float, r) -> np.ndarray:
    return np.exp(1j * k * r) / r


def _test_field(entry: DictionaryEntry, z_ring, x, k_second: float) -> np.ndarray:
    z_ring = np.asarray(z_ring, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    diff = x - z_ring
    r = np.linalg.norm(diff, axis=1)
    if np.any(r == 0):
        raise ValueError("receiver coincides with the candidate location")
    rz = np.linalg.norm(z_ring)
    mat = entry.material
    pre = np.exp(1j * mat.k_s * rz) / (4.0 * math.pi * rz)
    far = entry.far_field_at(diff / r[:, None])
    return pre * _spherical_factor(k_second, r)[:, None] * far


def test_field_sp(entry: DictionaryEntry, z_ring, x) -> np.ndarray:
    """Stored far field carried from ``z_ring`` to ``x`` with a pressure phase.

    ``e^{i k_s |z|} / (4 pi |z|) * e^{i k_p |x - z|} / |x - z| * F((x - z)/|x - z|)``
    """
    return _test_field(entry, z_ring, x, entry.material.k_p)


def test_field_ss(entry: DictionaryEntry, z_ring, x) -> np.ndarray:
    """As :func:`test_field_sp` with the shear wavenumber in both phases."""
    return _test_field(entry, z_ring, x, entry.material.k_s)


# keep pytest from collecting these when imported by name into a test module
test_field_sp.__test__ = False
test_field_ss.__test__ = False


# -------------------------------------------------------------------- store


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of ``config``."""
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def solver_config(kind: str, mat: ElasticMaterial, disc: Discretization, half_angle_deg: float, spacing_deg: float) -> dict:
    """Everything that determines entry contents apart from shape and incidence."""
    return {
        "version": STORE_FORMAT_VERSION,
        "kind": check_kind(kind),
        "material": mat.as_dict(),
        "discretization": disc.as_dict(),
        "cap": {"half_angle_deg": half_angle_deg, "spacing_deg": spacing_deg},
    }


def _entry_filename(entry: DictionaryEntry, index: int) -> str:
    return f"{entry.kind}_shape{entry.shape_id}_{index:04d}.bin"


@dataclass
class DictionaryStore:
    """Entries built under one solver configuration, for one scatterer kind."""

    config: dict
    entries: list[DictionaryEntry] = field(default_factory=list)

    @property
    def kind(self) -> str:
        return self.config["kind"]

    @property
    def hash(self) -> str:
        return config_hash(self.config)

    @property
    def material(self) -> ElasticMaterial:
        m = self.config["material"]
        return ElasticMaterial(omega=m["omega"], lam=m["lam"], mu=m["mu"])

    def shape_ids(self) -> list[int]:
        return sorted({e.shape_id for e in self.entries})

    def add(self, entry: DictionaryEntry, entry_config: dict) -> None:
        if config_hash(entry_config) != self.hash:
            raise ConfigError("entry was built under a different solver configuration")
        if any(e.key() == entry.key() for e in self.entries):
            raise ValueError(f"duplicate dictionary entry {entry.key()}")
        self.entries.append(entry)

    def find(self, shape_id: int, d, p, *, tolerance_deg: float = 0.5) -> DictionaryEntry:
        """Entry of ``shape_id`` with polarization ``p`` and direction nearest ``d``.

        Raises :class:`CoverageError` if no stored direction lies within
        ``tolerance_deg`` of ``d``.
        """
        d = np.asarray(_unit(d))
        p = np.asarray(p, dtype=float)
        best, best_angle = None, math.inf
        for e in self.entries:
            if e.shape_id != shape_id or not np.allclose(e.p, p, atol=1e-12):
                continue
            angle = math.degrees(math.acos(min(1.0, float(np.dot(e.d, d)))))
            if angle < best_angle:
                best, best_angle = e, angle
        if best is None or best_angle > tolerance_deg:
            raise CoverageError(f"no entry for shape {shape_id} within {tolerance_deg} deg of d={d.tolist()}")
        return best

    # ---- persistence

    def manifest(self) -> dict:
        rows = []
        for i, e in enumerate(self.entries):
            rows.append(
                {
                    "shape_id": e.shape_id,
                    "kind": e.kind,
                    "d": list(e.d),
                    "p": list(e.p),
                    "cap": e.cap.as_dict(),
                    "n_directions": int(e.far_field.shape[0]),
                    "file": _entry_filename(e, i),
                }
            )
        return {
            "version": STORE_FORMAT_VERSION,
            "config_hash": self.hash,
            "config": self.config,
            "shape_ids": self.shape_ids(),
            "entries": rows,
        }

    def save(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        manifest = self.manifest()
        for e, row in zip(self.entries, manifest["entries"]):
            data = np.ascontiguousarray(e.far_field, dtype="<c8")
            with open(os.path.join(directory, row["file"]), "wb") as fh:
                fh.write(data.tobytes())
        with open(os.path.join(directory, MANIFEST_NAME), "w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "DictionaryStore":
        with open(os.path.join(directory, MANIFEST_NAME), encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("version") != STORE_FORMAT_VERSION:
            raise ConfigError(f"unsupported store version {manifest.get('version')!r}")
        store = cls(manifest["config"])
        if store.hash != manifest["config_hash"]:
            raise ConfigError("store manifest hash does not match its configuration")
        mat = store.material
        for row in manifest["entries"]:
            if row["kind"] != store.kind:
                raise ConfigError("entry kind differs from the store kind")
            c = row["cap"]
            cap = DirectionCap(tuple(c["axis"]), c["half_angle_deg"], c["spacing_deg"])
            raw = np.fromfile(os.path.join(directory, row["file"]), dtype="<c8")
            if raw.size != 3 * row["n_directions"]:
                raise ConfigError(f"entry file {row['file']} has the wrong size")
            far = raw.reshape(-1, 3).astype(np.complex64)
            entry = DictionaryEntry(row["shape_id"], row["kind"], mat, tuple(row["d"]), tuple(row["p"]), cap, far)
            store.entries.append(entry)
        return store

    @staticmethod
    def exists(directory) -> bool:
        return os.path.isfile(os.path.join(directory, MANIFEST_NAME))

    @staticmethod
    def stored_hash(directory) -> str | None:
        try:
            with open(os.path.join(directory, MANIFEST_NAME), encoding="utf-8") as fh:
                return json.load(fh).get("config_hash")
        except (OSError, ValueError):
            return None
