"""Cube-union reference shapes, boundary meshes, voxel grids and sampling sets."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

SHAPE_FORMAT_VERSION = 1

# Lattice offsets of the unit cubes forming each dictionary shape.
DEFAULT_CUBES: dict[int, list[tuple[int, int, int]]] = {
    1: [(0, 0, 0)],
    2: [(0, 0, 0), (0, 1, 0)],
    3: [(0, 0, 0), (0, 1, 0), (0, 2, 0)],
    4: [(0, 0, 0), (1, 0, 0), (0, 1, 0)],
    5: [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0)],
    6: [(0, 0, 0), (0, 1, 0), (0, 2, 0), (1, 1, 0)],
}


@dataclass(frozen=True)
class ReferenceShape:
    """Union of closed unit lattice cubes, centred and scaled.

    A physical point is ``scale * (lattice_point - centroid) + offset``
    where ``centroid`` is the lattice volume centroid.
    """

    id: int
    cubes: tuple[tuple[int, int, int], ...]
    scale: float
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.cubes) == 0:
            raise ValueError("a shape needs at least one cube")
        if len(set(self.cubes)) != len(self.cubes):
            raise ValueError("duplicate cubes")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def centroid(self) -> np.ndarray:
        return np.mean(np.asarray(self.cubes, dtype=float), axis=0) + 0.5

    @property
    def edge(self) -> float:
        return self.scale

    @property
    def volume(self) -> float:
        return len(self.cubes) * self.scale**3

    def to_physical(self, lattice_pts) -> np.ndarray:
        lattice_pts = np.asarray(lattice_pts, dtype=float)
        return self.scale * (lattice_pts - self.centroid) + np.asarray(self.offset)

    def corner_points(self) -> np.ndarray:
        corners = np.array(list(product((0, 1), repeat=3)), dtype=float)
        pts = (np.asarray(self.cubes, dtype=float)[:, None, :] + corners).reshape(-1, 3)
        return self.to_physical(pts)

    def radius(self) -> float:
        """``max |x - offset|`` over the shape."""
        return float(np.max(np.linalg.norm(self.corner_points() - np.asarray(self.offset), axis=1)))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lat = (pts - np.asarray(self.offset)) / self.scale + self.centroid
        cells = np.floor(lat).astype(int)
        cube_set = set(self.cubes)
        inside_lattice = np.array([tuple(c) in cube_set for c in cells.reshape(-1, 3)])
        # closed cubes: points exactly on a face count as inside of either neighbour
        return inside_lattice.reshape(pts.shape[:-1]) | _on_boundary(lat, cube_set)

    def is_connected(self) -> bool:
        cubes = set(self.cubes)
        start = next(iter(cubes))
        seen, stack = {start}, [start]
        while stack:
            c = stack.pop()
            for axis, sign in product(range(3), (-1, 1)):
                n = list(c)
                n[axis] += sign
                n = tuple(n)
                if n in cubes and n not in seen:
                    seen.add(n)
                    stack.append(n)
        return len(seen) == len(cubes)


def _on_boundary(lat: np.ndarray, cube_set) -> np.ndarray:
    flat = lat.reshape(-1, 3)
    out = np.zeros(len(flat), dtype=bool)
    for i, p in enumerate(flat):
        near = np.isclose(p, np.round(p), atol=1e-12)
        if not near.any():
            continue
        options = [
            (int(round(v)) - 1, int(round(v))) if nr else (math.floor(v),)
            for v, nr in zip(p, near)
        ]
        out[i] = any(c in cube_set for c in product(*options))
    return out.reshape(lat.shape[:-1])


def normalized_shape(shape_id: int, cubes, target_radius: float = 1.0) -> ReferenceShape:
    """Centre ``cubes`` on their centroid and scale so that ``max |x| = target_radius``."""
    cubes = tuple(tuple(int(v) for v in c) for c in cubes)
    unit = ReferenceShape(id=shape_id, cubes=cubes, scale=1.0)
    return ReferenceShape(id=shape_id, cubes=cubes, scale=target_radius / unit.radius())


def build_dictionary_shapes(cubes_by_id=None) -> list[ReferenceShape]:
    """The six reference shapes, ordered by id."""
    table = DEFAULT_CUBES if cubes_by_id is None else cubes_by_id
    return [normalized_shape(i, table[i]) for i in sorted(table)]


def translate_shape(shape: ReferenceShape, z) -> ReferenceShape:
    z = np.asarray(z, dtype=float)
    new = tuple(float(v) for v in np.asarray(shape.offset) + z)
    return ReferenceShape(id=shape.id, cubes=shape.cubes, scale=shape.scale, offset=new)


def shapes_to_json(shapes) -> str:
    doc = {
        "version": SHAPE_FORMAT_VERSION,
        "shapes": [
            {"id": s.id, "cubes": [list(c) for c in s.cubes], "scale": s.scale}
            for s in sorted(shapes, key=lambda s: s.id)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def shapes_from_json(text: str) -> list[ReferenceShape]:
    doc = json.loads(text)
    if doc.get("version") != SHAPE_FORMAT_VERSION:
        raise ValueError(f"unsupported shape document version {doc.get('version')!r}")
    shapes = [
        ReferenceShape(id=int(s["id"]), cubes=tuple(tuple(c) for c in s["cubes"]), scale=float(s["scale"]))
        for s in doc["shapes"]
    ]
    return sorted(shapes, key=lambda s: s.id)


# ---------------------------------------------------------------- meshes


@dataclass(frozen=True)
class SurfaceMesh:
    """Flat triangles; ``vertices[triangles]`` gives the corners of each panel.

    ``vertices`` are stored relative to ``origin`` so that translated copies
    share bit-identical local geometry; the unprefixed properties are in
    global coordinates.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    local_centroids: np.ndarray = field(init=False)
    normals: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)
    diameters: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        v = self.vertices[self.triangles]
        cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        twice_area = np.linalg.norm(cross, axis=1)
        if np.any(twice_area <= 0):
            raise ValueError("degenerate panel")
        object.__setattr__(self, "local_centroids", v.mean(axis=1))
        object.__setattr__(self, "normals", cross / twice_area[:, None])
        object.__setattr__(self, "areas", 0.5 * twice_area)
        edges = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]], axis=1)
        object.__setattr__(self, "diameters", np.linalg.norm(edges, axis=2).max(axis=1))

    @property
    def n_panels(self) -> int:
        return len(self.triangles)

    @property
    def local_corners(self) -> np.ndarray:
        return self.vertices[self.triangles]

    @property
    def corners(self) -> np.ndarray:
        return self.local_corners + self.origin

    @property
    def centroids(self) -> np.ndarray:
        return self.local_centroids + self.origin

    @property
    def global_vertices(self) -> np.ndarray:
        return self.vertices + self.origin

    def total_area(self) -> float:
        return float(self.areas.sum())

    def signed_volume(self) -> float:
        v = self.local_corners
        return float(np.einsum("ij,ij->i", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    def is_watertight(self) -> bool:
        edges = np.concatenate(
            [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
        )
        directed = {tuple(e) for e in edges}
        if len(directed) != len(edges):
            return False
        # every directed edge must be matched by its reverse exactly once
        return all((b, a) in directed for a, b in directed)

    def translated(self, z) -> "SurfaceMesh":
        return SurfaceMesh(self.vertices, self.triangles, self.origin + np.asarray(z, dtype=float))


def _boundary_faces(cubes):
    """Unit faces not shared by two cubes, as ``(cube, axis, side)``."""
    cube_set = set(cubes)
    faces = []
    for c in sorted(cube_set):
        for axis, side in product(range(3), (0, 1)):
            n = list(c)
            n[axis] += 1 if side else -1
            if tuple(n) not in cube_set:
                faces.append((c, axis, side))
    return faces


def panels_per_face(subdivisions: int) -> int:
    return 4 * subdivisions**2


def mesh_shape(shape: ReferenceShape, target_panel_count: int) -> SurfaceMesh:
    """Watertight triangulation with at most ``target_panel_count`` panels.

    Each exposed unit face is split into ``n x n`` squares and each square
    into four triangles around its centre; the finest ``n`` within budget is
    used.
    """
    n_faces = len(_boundary_faces(shape.cubes))
    if target_panel_count < max(24, n_faces * panels_per_face(1)):
        raise ValueError(
            f"panel budget {target_panel_count} below the minimum "
            f"{max(24, n_faces * panels_per_face(1))} for shape {shape.id}"
        )
    n = max(1, int(math.isqrt(target_panel_count // (4 * n_faces))))
    return mesh_shape_subdivided(shape, n)


def mesh_shape_subdivided(shape: ReferenceShape, subdivisions: int) -> SurfaceMesh:
    """Mesh with ``subdivisions`` squares per unit-face edge."""
    n = int(subdivisions)
    if n < 1:
        raise ValueError("subdivisions must be >= 1")
    index: dict[tuple, int] = {}
    verts: list[tuple] = []

    def vid(key):
        # keys are exact lattice coordinates scaled by 2n, so shared vertices coincide
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    tris = []
    two_n = 2 * n
    for c, axis, side in _boundary_faces(shape.cubes):
        u_ax, v_ax = [a for a in range(3) if a != axis]
        base = [two_n * ci for ci in c]
        base[axis] += two_n * side
        for i, j in product(range(n), range(n)):
            def pt(du, dv):
                p = list(base)
                p[u_ax] += du
                p[v_ax] += dv
                return vid(tuple(p))

            a = pt(2 * i, 2 * j)
            b = pt(2 * i + 2, 2 * j)
            cc = pt(2 * i + 2, 2 * j + 2)
            d = pt(2 * i, 2 * j + 2)
            m = pt(2 * i + 1, 2 * j + 1)
            quad = [(a, b), (b, cc), (cc, d), (d, a)]
            # (u, v, axis) right-handed means counter-clockwise quad faces +axis
            right_handed = (v_ax - u_ax) % 3 == 1
            outward_ccw = (side == 1) == right_handed
            for p0, p1 in quad:
                tris.append((p0, p1, m) if outward_ccw else (p1, p0, m))
    lattice = np.asarray(verts, dtype=float) / two_n
    local = shape.scale * (lattice - shape.centroid)
    return SurfaceMesh(local, np.asarray(tris, dtype=np.int64), np.asarray(shape.offset, dtype=float))


# ---------------------------------------------------------------- voxels


@dataclass(frozen=True)
class ContrastGrid:
    """Voxel centres with edge ``h`` and contrast values ``n`` (zero outside).

    Centres are stored relative to ``origin`` as for :class:`SurfaceMesh`.
    """

    local_centers: np.ndarray
    h: float
    values: np.ndarray
    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))

    @property
    def centers(self) -> np.ndarray:
        return self.local_centers + self.origin

    @property
    def n_voxels(self) -> int:
        return len(self.local_centers)

    @property
    def support(self) -> np.ndarray:
        return self.values != 0

    def translated(self, z) -> "ContrastGrid":
        return ContrastGrid(self.local_centers, self.h, self.values, self.origin + np.asarray(z, dtype=float))

    def scaled_values(self, factor: float) -> "ContrastGrid":
        return ContrastGrid(self.local_centers, self.h, self.values * factor, self.origin)


def voxelize_shape(shape: ReferenceShape, h: float, contrast_value: float) -> ContrastGrid:
    """Voxel grid of spacing ``h`` filling the shape; ``h`` must divide the cube edge."""
    per_edge = shape.edge / h
    k = int(round(per_edge))
    if k < 1 or abs(per_edge - k) > 1e-9 * max(1.0, per_edge):
        raise ValueError(f"voxel size {h} does not divide the cube edge {shape.edge}")
    return voxelize_subdivided(shape, k, contrast_value)


def voxelize_subdivided(shape: ReferenceShape, per_edge: int, contrast_value: float) -> ContrastGrid:
    k = int(per_edge)
    local = (np.array(list(product(range(k), repeat=3)), dtype=float) + 0.5) / k
    lattice = (np.asarray(shape.cubes, dtype=float)[:, None, :] + local).reshape(-1, 3)
    order = np.lexsort(lattice.T[::-1])
    local = shape.scale * (lattice[order] - shape.centroid)
    values = np.full(len(local), float(contrast_value))
    return ContrastGrid(local, shape.edge / k, values, np.asarray(shape.offset, dtype=float))


# ------------------------------------------------------- measurement surface


@dataclass(frozen=True)
class MeasurementSurface:
    """Receivers on a square in the plane ``x1 = 0`` centred at the origin."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def unit_square(cls, n: int = 11, side: float = 1.0) -> "MeasurementSurface":
        if n < 2:
            raise ValueError("need at least 2 receivers per side")
        t = np.linspace(-side / 2, side / 2, n)
        w1 = np.full(n, side / (n - 1))
        w1[[0, -1]] *= 0.5
        T2, T3 = np.meshgrid(t, t, indexing="ij")
        pts = np.stack([np.zeros_like(T2), T2, T3], axis=-1).reshape(-1, 3)
        return cls(points=pts, weights=np.outer(w1, w1).ravel())

    @property
    def n_points(self) -> int:
        return len(self.points)

    def viewing_directions(self, center=(0.0, 0.0, 0.0)) -> np.ndarray:
        """Unit vectors ``(x - center) / |x - center|`` for every receiver."""
        diff = self.points - np.asarray(center, dtype=float)
        r = np.linalg.norm(diff, axis=1)
        if np.any(r == 0):
            raise ValueError("a receiver coincides with the projection centre")
        return diff / r[:, None]


@dataclass(frozen=True)
class SamplingGrid:
    """Regular lattice of candidate points ``center + spacing * (i, j, k)``."""

    center: tuple[float, float, float]
    spacing: float
    half_width: int

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.half_width < 0:
            raise ValueError("half_width must be non-negative")

    @property
    def points(self) -> np.ndarray:
        idx = np.arange(-self.half_width, self.half_width + 1)
        I, J, K = np.meshgrid(idx, idx, idx, indexing="ij")
        offs = np.stack([I, J, K], axis=-1).reshape(-1, 3) * self.spacing
        return np.asarray(self.center) + offs

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        w = self.spacing * self.half_width
        return c - w, c + w

    def refined(self, center, factor: int = 5) -> "SamplingGrid":
        """Finer grid of spacing ``spacing / factor`` covering one coarse cell around ``center``."""
        return SamplingGrid(tuple(float(v) for v in center), self.spacing / factor, factor)
