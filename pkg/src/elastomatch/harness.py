"""Synthetic experiments: data generation, the two stages and table reproduction."""

from __future__ import annotations

import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import dictionary as dic
from . import kernels
from .config import ExperimentConfig
from .errors import CoverageError
from .forward import ForwardModel, discretize
from .geometry import MeasurementSurface, SamplingGrid, build_dictionary_shapes, translate_shape
from .harmonics import sphere_quadrature
from .imaging import (
    IdentificationResult,
    LocationResult,
    Measurement,
    add_noise,
    identify,
    locate,
    select_indicators,
)

MEASUREMENT_FORMAT_VERSION = 1
FREQUENCY_TAGS = ("omega1", "omega2")

LOCATION_TOLERANCE_CLEAN = 0.15
LOCATION_TOLERANCE_NOISY = 0.5
IDENTIFICATION_MARGIN = 0.005
REPRODUCE_NOISE = 0.05


def log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------- measurements


@dataclass(frozen=True)
class MeasurementSet:
    """Data for one frequency: receiver samples and, at ``omega1``, a shear far field."""

    tag: str
    near: Measurement
    far: Measurement | None = None


def _seed_for(cfg: ExperimentConfig, shape_id: int, tag: str, part: str) -> np.random.Generator:
    # independent, reproducible streams per shape, frequency and data part
    return np.random.default_rng([cfg.rng_seed, shape_id, FREQUENCY_TAGS.index(tag), part == "far"])


def _physics_key(cfg: ExperimentConfig) -> str:
    d = cfg.to_dict()
    for k in ("noise", "rng_seed", "indicator", "true_shape", "dictionary"):
        d.pop(k)
    return json.dumps(d, sort_keys=True)


_CLEAN_CACHE: dict = {}


def clean_measurements(cfg: ExperimentConfig, shape_id: int, tag: str) -> MeasurementSet:
    """Noise-free data of shape ``shape_id`` placed at ``z0`` under a point source at the origin."""
    key = (_physics_key(cfg), shape_id, tag)
    if key in _CLEAN_CACHE:
        return _CLEAN_CACHE[key]
    omega = cfg.omega1 if tag == "omega1" else cfg.omega2
    mat = cfg.material_at(omega)
    shape = {s.id: s for s in build_dictionary_shapes()}[shape_id]
    scatterer = translate_shape(shape, cfg.z0)
    model = ForwardModel.build(cfg.kind, mat, discretize(scatterer, cfg.kind, cfg.discretization()), cfg.discretization())
    p = cfg.unit_polarization()
    solution = model.solve(lambda x: kernels.point_source(mat, p, x, np.zeros(3)))
    surf = MeasurementSurface.unit_square(cfg.grids.surface_points)
    near = Measurement(surf.points, surf.weights, model.near_field(solution, surf.points), omega, "near")
    far = None
    if tag == "omega1":
        dirs, w = sphere_quadrature(cfg.grids.sphere_points)
        fs, _ = model.far_field(solution, dirs)
        far = Measurement(dirs, w, fs, omega, "far")
    result = MeasurementSet(tag, near, far)
    _CLEAN_CACHE[key] = result
    return result


def simulate(cfg: ExperimentConfig, tag: str, shape_id: int | None = None) -> MeasurementSet:
    """Forward data at frequency ``tag`` with the configured noise."""
    if tag not in FREQUENCY_TAGS:
        raise ValueError(f"frequency tag must be one of {FREQUENCY_TAGS}")
    sid = cfg.true_shape if shape_id is None else shape_id
    clean = clean_measurements(cfg, sid, tag)
    near = add_noise(clean.near, cfg.noise, _seed_for(cfg, sid, tag, "near"))
    far = None if clean.far is None else add_noise(clean.far, cfg.noise, _seed_for(cfg, sid, tag, "far"))
    return MeasurementSet(tag, near, far)


def _measurement_doc(m: Measurement) -> dict:
    return {
        "layout": m.layout,
        "omega": m.omega,
        "noise_level": m.noise_level,
        "points": m.points.tolist(),
        "weights": m.weights.tolist(),
        "values_re": m.values.real.tolist(),
        "values_im": m.values.imag.tolist(),
    }


def _measurement_from_doc(doc: dict) -> Measurement:
    values = np.asarray(doc["values_re"]) + 1j * np.asarray(doc["values_im"])
    return Measurement(doc["points"], doc["weights"], values, doc["omega"], doc["layout"], doc["noise_level"])


def measurement_to_json(ms: MeasurementSet, provenance: dict) -> str:
    doc = {
        "version": MEASUREMENT_FORMAT_VERSION,
        "tag": ms.tag,
        "provenance": provenance,
        "near": _measurement_doc(ms.near),
        "far": None if ms.far is None else _measurement_doc(ms.far),
    }
    return json.dumps(doc, sort_keys=True)


def measurement_from_json(text: str) -> MeasurementSet:
    doc = json.loads(text)
    if doc.get("version") != MEASUREMENT_FORMAT_VERSION:
        raise ValueError(f"unsupported measurement version {doc.get('version')!r}")
    far = None if doc["far"] is None else _measurement_from_doc(doc["far"])
    return MeasurementSet(doc["tag"], _measurement_from_doc(doc["near"]), far)


# ------------------------------------------------------------ dictionary


def store_config(cfg: ExperimentConfig) -> dict:
    return dic.solver_config(
        cfg.kind,
        cfg.material_at(cfg.omega2),
        cfg.discretization(),
        cfg.dictionary.cap_half_angle_deg,
        cfg.dictionary.cap_spacing_deg,
    )


def store_directory(root, kind: str) -> str:
    # rigid and medium entries never share a directory
    return os.path.join(root, "dictionary", kind)


def open_store(cfg: ExperimentConfig, root) -> dic.DictionaryStore:
    """Existing store under ``root`` when its hash matches, else an empty one."""
    path = store_directory(root, cfg.kind)
    sc = store_config(cfg)
    if dic.DictionaryStore.exists(path) and dic.DictionaryStore.stored_hash(path) == dic.config_hash(sc):
        return dic.DictionaryStore.load(path)
    return dic.DictionaryStore(sc)


def ensure_entries(cfg: ExperimentConfig, store: dic.DictionaryStore, d, root=None) -> tuple[list, int]:
    """Entries for every shape near incidence ``d``, building the missing ones.

    Returns the entries ordered by shape id and the number built. The store
    is saved under ``root`` when anything was added.
    """
    p = cfg.unit_polarization()
    mat = cfg.material_at(cfg.omega2)
    entries, built = [], 0
    for shape in build_dictionary_shapes():
        try:
            entry = store.find(shape.id, d, p, tolerance_deg=cfg.dictionary.direction_tolerance_deg)
        except CoverageError:
            t0 = time.perf_counter()
            entry = dic.build_entry(
                shape,
                cfg.kind,
                mat,
                d,
                p,
                disc=cfg.discretization(),
                half_angle_deg=cfg.dictionary.cap_half_angle_deg,
                spacing_deg=cfg.dictionary.cap_spacing_deg,
            )
            store.add(entry, store_config(cfg))
            built += 1
            log(f"dictionary {cfg.kind} shape {shape.id}: built in {time.perf_counter() - t0:.2f} s")
        entries.append(entry)
    if built and root is not None:
        store.save(store_directory(root, cfg.kind))
    return entries, built


def nominal_direction(cfg: ExperimentConfig) -> np.ndarray:
    z = np.asarray(cfg.z0, dtype=float)
    return z / np.linalg.norm(z)


# ---------------------------------------------------------------- stages


def sampling_grid(cfg: ExperimentConfig) -> SamplingGrid:
    return SamplingGrid(tuple(cfg.grids.search_center), cfg.grids.spacing, cfg.grids.half_width)


def location_indicator(cfg: ExperimentConfig) -> str:
    if cfg.indicator != "auto":
        return cfg.indicator
    return select_indicators(cfg.noise, cfg.material_at(cfg.omega1).lam)[0]


def shape_indicator(cfg: ExperimentConfig) -> str:
    """``jp`` pairs with the radial location indicators and ``js`` with ``is``."""
    return "js" if location_indicator(cfg) == "is" else "jp"


def run_locate(cfg: ExperimentConfig, ms: MeasurementSet, which: str | None = None) -> LocationResult:
    which = location_indicator(cfg) if which is None else which
    data = ms.far if which == "is" else ms.near
    if data is None:
        raise ValueError("far-field data are required for the shear location indicator")
    return locate(data, sampling_grid(cfg), cfg.material_at(data.omega), which, refine_factor=cfg.grids.refine_factor)


def run_identify(cfg: ExperimentConfig, ms: MeasurementSet, entries, z_ring, which: str | None = None) -> IdentificationResult:
    which = shape_indicator(cfg) if which is None else which
    return identify(ms.near, entries, z_ring, which)


# ---------------------------------------------------------- result tables


@dataclass
class ResultTable:
    title: str
    columns: list[str]
    rows: list[list]
    provenance: dict = field(default_factory=dict)
    checks: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "title": self.title,
            "columns": self.columns,
            "rows": self.rows,
            "checks": self.checks,
            "passed": self.passed,
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def provenance(cfg: ExperimentConfig, store: dic.DictionaryStore | None = None) -> dict:
    out = {"version": __version__, "config_hash": dic.config_hash(cfg.to_dict())}
    if store is not None:
        out["dictionary_hash"] = store.hash
    return out


def matrix_margin(M: np.ndarray) -> tuple[bool, float]:
    """Whether each row peaks on the diagonal, and the smallest ``1 - second/first``."""
    N = M / M.max(axis=1, keepdims=True)
    diagonal = bool(np.all(np.argmax(M, axis=1) == np.arange(len(M))))
    margin = min(1.0 - float(np.sort(row)[-2]) for row in N)
    return diagonal, margin


# ------------------------------------------------------------ reproduction


@dataclass(frozen=True)
class TableSpec:
    kind: str
    stage: str  # "locate" or "identify"
    noisy: bool
    indicators: tuple[str, ...]
    gate: str  # indicator whose result decides pass/fail


TABLES = {
    "T1": TableSpec("rigid", "locate", False, ("ip", "is"), "is"),
    "T2": TableSpec("rigid", "identify", False, ("jp", "js"), "js"),
    "T3": TableSpec("rigid", "identify", True, ("js",), "js"),
    "T4": TableSpec("rigid", "locate", True, ("is",), "is"),
    "T5": TableSpec("medium", "locate", False, ("is",), "is"),
    "T6": TableSpec("medium", "identify", False, ("js",), "js"),
    "T7": TableSpec("medium", "locate", True, ("is",), "is"),
    "T8": TableSpec("medium", "identify", True, ("js",), "js"),
}


def table_config(table: str, cfg: ExperimentConfig) -> ExperimentConfig:
    spec = TABLES[table]
    return cfg.with_overrides(kind=spec.kind, noise=REPRODUCE_NOISE if spec.noisy else 0.0)


def reproduce_location(table: str, cfg: ExperimentConfig) -> ResultTable:
    spec = TABLES[table]
    cfg = table_config(table, cfg)
    z0 = np.asarray(cfg.z0)
    tol = LOCATION_TOLERANCE_NOISY if spec.noisy else LOCATION_TOLERANCE_CLEAN
    columns = ["shape"]
    for ind in spec.indicators:
        columns += [f"{ind}_x", f"{ind}_y", f"{ind}_z", f"{ind}_error"]
    rows, errors = [], {ind: [] for ind in spec.indicators}
    for shape in build_dictionary_shapes():
        t0 = time.perf_counter()
        ms = simulate(cfg, "omega1", shape.id)
        row = [shape.id]
        for ind in spec.indicators:
            res = run_locate(cfg, ms, ind)
            err = float(np.linalg.norm(res.z - z0))
            errors[ind].append(err)
            row += [float(v) for v in res.z] + [err]
        rows.append(row)
        log(f"{table} shape {shape.id}: {time.perf_counter() - t0:.2f} s")
    worst = max(errors[spec.gate])
    checks = [
        {
            "name": f"max location error using {spec.gate} <= {tol}",
            "value": worst,
            "passed": bool(worst <= tol),
        }
    ]
    title = f"{table}: location test, {spec.kind}, noise {cfg.noise:g}"
    return ResultTable(title, columns, rows, provenance(cfg), checks)


def reproduce_identification(table: str, cfg: ExperimentConfig, root=None) -> ResultTable:
    spec = TABLES[table]
    cfg = table_config(table, cfg)
    store = open_store(cfg, root) if root is not None else dic.DictionaryStore(store_config(cfg))
    shapes = build_dictionary_shapes()
    ids = [s.id for s in shapes]
    matrices = {ind: np.zeros((len(ids), len(ids))) for ind in spec.indicators}
    located = []
    for i, shape in enumerate(shapes):
        t0 = time.perf_counter()
        loc = run_locate(cfg, simulate(cfg, "omega1", shape.id), "is")
        z_ring = loc.z
        located.append([float(v) for v in z_ring])
        entries, _ = ensure_entries(cfg, store, z_ring / np.linalg.norm(z_ring), root)
        ms = simulate(cfg, "omega2", shape.id)
        for ind in spec.indicators:
            matrices[ind][i] = run_identify(cfg, ms, entries, z_ring, ind).raw
        log(f"{table} shape {shape.id}: {time.perf_counter() - t0:.2f} s")
    columns = ["indicator", "true_shape", "located_x", "located_y", "located_z"] + [f"D{j}" for j in ids]
    rows, checks = [], []
    for ind in spec.indicators:
        M = matrices[ind]
        N = M / M.max(axis=1, keepdims=True)
        for i, sid in enumerate(ids):
            rows.append([ind, sid] + located[i] + [float(v) for v in N[i]])
        diagonal, margin = matrix_margin(M)
        if ind == spec.gate:
            checks.append({"name": f"{ind} rows peak on the diagonal", "value": diagonal, "passed": diagonal})
            checks.append(
                {
                    "name": f"{ind} normalized margin >= {IDENTIFICATION_MARGIN}",
                    "value": margin,
                    "passed": bool(diagonal and margin >= IDENTIFICATION_MARGIN),
                }
            )
    title = f"{table}: shape determination, {spec.kind}, noise {cfg.noise:g}"
    return ResultTable(title, columns, rows, provenance(cfg, store), checks)


def reproduce(table: str, cfg: ExperimentConfig, root=None) -> ResultTable:
    if table not in TABLES:
        raise ValueError(f"table must be one of {sorted(TABLES)}")
    if TABLES[table].stage == "locate":
        return reproduce_location(table, cfg)
    return reproduce_identification(table, cfg, root)


def write_table(table: ResultTable, directory, stem: str) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for ext, text in (("csv", table.to_csv()), ("json", table.to_json())):
        path = os.path.join(directory, f"{stem}.{ext}")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    return paths


def summary_line(table_id: str, table: ResultTable) -> str:
    parts = [f"{c['name']}: {_fmt_check(c['value'])}" for c in table.checks]
    return f"{table_id} {'PASS' if table.passed else 'FAIL'} ({'; '.join(parts)})"


def _fmt_check(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def indicator_map_csv(points: np.ndarray, values: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z_x", "z_y", "z_z", "value"])
    for p, v in zip(points, values):
        w.writerow([repr(float(p[0])), repr(float(p[1])), repr(float(p[2])), repr(float(v))])
    return buf.getvalue()

