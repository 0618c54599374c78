"""Uniform front end over the rigid and medium forward solvers."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import medium, rigid
from .geometry import ReferenceShape, mesh_shape, voxelize_subdivided
from .material import ElasticMaterial

KINDS = ("rigid", "medium")


@dataclass(frozen=True)
class Discretization:
    """Per-shape resolution budgets and the medium contrast value."""

    panel_budget: int = 300
    voxel_budget: int = 512
    inside_value: float = -4.0
    coupling: complex = 1j

    def voxels_per_edge(self, n_cubes: int) -> int:
        """Largest subdivision with ``n_cubes * n**3`` within the voxel budget."""
        n = 1
        while n_cubes * (n + 1) ** 3 <= self.voxel_budget:
            n += 1
        return n

    def as_dict(self) -> dict:
        d = asdict(self)
        d["coupling"] = [self.coupling.real, self.coupling.imag]
        return d


def check_kind(kind: str) -> str:
    if kind not in KINDS:
        raise ValueError(f"unknown scatterer kind {kind!r}; expected one of {KINDS}")
    return kind


def discretize(shape: ReferenceShape, kind: str, disc: Discretization):
    """Surface mesh (rigid) or contrast grid (medium) of ``shape`` at its offset."""
    if check_kind(kind) == "rigid":
        return mesh_shape(shape, disc.panel_budget)
    return voxelize_subdivided(shape, disc.voxels_per_edge(len(shape.cubes)), disc.inside_value)


@dataclass(frozen=True)
class ForwardModel:
    """An assembled operator together with the solver that uses it."""

    kind: str
    operator: object

    @classmethod
    def build(cls, kind: str, mat: ElasticMaterial, geometry, disc: Discretization | None = None):
        disc = Discretization() if disc is None else disc
        if check_kind(kind) == "rigid":
            return cls(kind, rigid.assemble_boundary_operator(mat, geometry, coupling=disc.coupling))
        return cls(kind, medium.assemble_volume_operator(mat, geometry))

    @property
    def material(self) -> ElasticMaterial:
        return self.operator.material

    def solve(self, incident):
        if self.kind == "rigid":
            return rigid.solve_density(self.operator, incident)
        return medium.solve_total_field(self.operator, incident)

    def near_field(self, solution, receivers) -> np.ndarray:
        if self.kind == "rigid":
            return rigid.scattered_field_rigid(self.operator, solution, receivers)
        return medium.scattered_field_medium(self.operator, solution, receivers)

    def far_field(self, solution, directions):
        """``(F_s, F_p)`` at unit ``directions``."""
        if self.kind == "rigid":
            return rigid.far_field_rigid(self.operator, solution, directions)
        return medium.far_field_medium(self.operator, solution, directions)
