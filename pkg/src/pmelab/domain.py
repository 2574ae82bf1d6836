"""
Space-time lattices: 1D meshes, time grids, cylinders, finite unions of
cylinders on a shared ambient lattice, and parabolic boundaries.

Lattice nodes are addressed as ``(i, k)`` with ``i`` the space index and
``k`` the time index. Arrays over a lattice have shape
``(n_steps + 1, n_cells + 1)``: one row per time level.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

__all__ = [
    "Cylinder",
    "CylinderUnion",
    "IndexBox",
    "ParabolicBoundarySet",
    "SpatialMesh",
    "TimeGrid",
    "build_cylinder",
    "parabolic_boundary",
    "union_parabolic_boundary",
]


@dataclass(frozen=True)
class SpatialMesh:
    """Uniform mesh of ``[a_left, b_right]`` with ``n_cells`` cells."""

    a_left: float
    b_right: float
    n_cells: int

    def __post_init__(self):
        if not self.a_left < self.b_right:
            raise ValueError(f"empty interval: a_left={self.a_left} >= b_right={self.b_right}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def h(self) -> float:
        return (self.b_right - self.a_left) / self.n_cells

    @property
    def length(self) -> float:
        return self.b_right - self.a_left

    @property
    def nodes(self) -> np.ndarray:
        x = self.a_left + self.h * np.arange(self.n_cells + 1)
        x[-1] = self.b_right
        return x


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time levels ``t_start = t_0 < ... < t_{n_steps} = t_end``."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError(f"empty time interval: t_start={self.t_start} >= t_end={self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be an integer >= 1, got {self.n_steps}")

    @property
    def tau(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def levels(self) -> np.ndarray:
        t = self.t_start + self.tau * np.arange(self.n_steps + 1)
        t[-1] = self.t_end
        return t


@dataclass(frozen=True)
class IndexBox:
    """Inclusive node-index ranges ``[i0, i1] x [k0, k1]`` of a sub-cylinder."""

    i0: int
    i1: int
    k0: int
    k1: int

    def __post_init__(self):
        if not (0 <= self.i0 and self.i1 - self.i0 >= 2):
            raise ValueError(f"sub-cylinder needs at least 2 cells in space: {self}")
        if not (0 <= self.k0 < self.k1):
            raise ValueError(f"sub-cylinder needs at least 1 time step: {self}")

    @property
    def space(self) -> slice:
        return slice(self.i0, self.i1 + 1)

    @property
    def time(self) -> slice:
        return slice(self.k0, self.k1 + 1)

    def closure_mask(self, shape) -> np.ndarray:
        mask = np.zeros(shape, dtype=bool)
        mask[self.time, self.space] = True
        return mask

    def solve_mask(self, shape) -> np.ndarray:
        """Nodes off the parabolic boundary: spatially interior, after the first level."""
        mask = np.zeros(shape, dtype=bool)
        mask[self.k0 + 1 : self.k1 + 1, self.i0 + 1 : self.i1] = True
        return mask


@dataclass(frozen=True)
class Cylinder:
    mesh: SpatialMesh
    times: TimeGrid

    @property
    def shape(self) -> tuple[int, int]:
        return (self.times.n_steps + 1, self.mesh.n_cells + 1)

    @property
    def h(self) -> float:
        return self.mesh.h

    @property
    def tau(self) -> float:
        return self.times.tau

    @property
    def x(self) -> np.ndarray:
        return self.mesh.nodes

    @property
    def t(self) -> np.ndarray:
        return self.times.levels

    @property
    def volume(self) -> float:
        return self.mesh.length * self.times.duration

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, T)`` arrays of lattice shape."""
        return np.meshgrid(self.x, self.t)

    def box(self) -> IndexBox:
        return IndexBox(0, self.mesh.n_cells, 0, self.times.n_steps)

    def sub(self, box: IndexBox) -> "Cylinder":
        """The sub-cylinder spanned by ``box`` on this lattice."""
        if box.i1 > self.mesh.n_cells or box.k1 > self.times.n_steps:
            raise ValueError(f"{box} exceeds lattice of shape {self.shape}")
        x, t = self.x, self.t
        return Cylinder(
            SpatialMesh(float(x[box.i0]), float(x[box.i1]), box.i1 - box.i0),
            TimeGrid(float(t[box.k0]), float(t[box.k1]), box.k1 - box.k0),
        )

    def locate(self, other: "Cylinder", rtol: float = 1e-9) -> IndexBox:
        """Index box of ``other`` inside this lattice; rejects resampling."""
        h, tau = self.h, self.tau
        fi0 = (other.mesh.a_left - self.mesh.a_left) / h
        fi1 = (other.mesh.b_right - self.mesh.a_left) / h
        fk0 = (other.times.t_start - self.times.t_start) / tau
        fk1 = (other.times.t_end - self.times.t_start) / tau
        idx = [int(round(v)) for v in (fi0, fi1, fk0, fk1)]
        if any(abs(v - r) > rtol * max(1.0, abs(v)) for v, r in zip((fi0, fi1, fk0, fk1), idx)):
            raise ValueError("member cylinder is not aligned with the ambient lattice")
        box = IndexBox(*idx)
        if box.i1 - box.i0 != other.mesh.n_cells or box.k1 - box.k0 != other.times.n_steps:
            raise ValueError("member cylinder resamples the ambient lattice")
        if box.i1 > self.mesh.n_cells or box.k1 > self.times.n_steps:
            raise ValueError("member cylinder extends past the ambient lattice")
        return box


def build_cylinder(a: float, b: float, t1: float, t2: float, n_cells: int, n_steps: int) -> Cylinder:
    """Uniform cylinder ``[a, b] x [t1, t2]`` with ``n_cells`` cells and ``n_steps`` steps."""
    return Cylinder(SpatialMesh(a, b, n_cells), TimeGrid(t1, t2, n_steps))


@dataclass(frozen=True)
class ParabolicBoundarySet:
    initial_nodes: frozenset
    lateral_nodes: frozenset

    @property
    def nodes(self) -> frozenset:
        return self.initial_nodes | self.lateral_nodes

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node) -> bool:
        return tuple(node) in self.initial_nodes or tuple(node) in self.lateral_nodes

    def mask(self, shape) -> np.ndarray:
        out = np.zeros(shape, dtype=bool)
        for i, k in self.nodes:
            out[k, i] = True
        return out


def _box_boundary(box: IndexBox) -> ParabolicBoundarySet:
    initial = frozenset((i, box.k0) for i in range(box.i0, box.i1 + 1))
    lateral = frozenset(
        (i, k) for k in range(box.k0 + 1, box.k1 + 1) for i in (box.i0, box.i1)
    )
    return ParabolicBoundarySet(initial, lateral)


def parabolic_boundary(c: Cylinder) -> ParabolicBoundarySet:
    """Initial slice plus lateral columns; the final slice interior is excluded."""
    return _box_boundary(c.box())


@dataclass(frozen=True, eq=False)
class CylinderUnion:
    """Finite union of sub-cylinders of one ambient lattice.

    Members are index boxes; duplicates are allowed. The union must be
    connected: its non-boundary nodes form one 4-neighbour component.
    """

    ambient: Cylinder
    boxes: tuple

    def __post_init__(self):
        boxes = tuple(self.boxes)
        if not boxes:
            raise ValueError("a cylinder union needs at least one member")
        n_steps, n_cells = self.ambient.times.n_steps, self.ambient.mesh.n_cells
        for b in boxes:
            if not isinstance(b, IndexBox):
                raise TypeError(f"members must be IndexBox, got {type(b).__name__}")
            if b.i1 > n_cells or b.k1 > n_steps:
                raise ValueError(f"member {b} extends past the ambient lattice")
        object.__setattr__(self, "boxes", boxes)
        _, count = ndimage.label(self.solve_mask)
        if count != 1:
            raise ValueError(f"cylinder union is disconnected ({count} interior components)")

    @classmethod
    def from_cylinders(cls, ambient: Cylinder, members: Iterable[Cylinder]) -> "CylinderUnion":
        return cls(ambient, tuple(ambient.locate(c) for c in members))

    @property
    def shape(self) -> tuple[int, int]:
        return self.ambient.shape

    @property
    def members(self) -> tuple[Cylinder, ...]:
        return tuple(self.ambient.sub(b) for b in self.boxes)

    @cached_property
    def closure_mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        for b in self.boxes:
            out |= b.closure_mask(self.shape)
        return out

    @cached_property
    def solve_mask(self) -> np.ndarray:
        """Nodes where the scheme is imposed: off the parabolic boundary of some member."""
        out = np.zeros(self.shape, dtype=bool)
        for b in self.boxes:
            out |= b.solve_mask(self.shape)
        return out

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        return self.closure_mask & ~self.solve_mask

    @cached_property
    def open_interior_mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        for b in self.boxes:
            out[b.k0 + 1 : b.k1, b.i0 + 1 : b.i1] = True
        return out

    def classify_nodes(self) -> np.ndarray:
        """Per node: 0 outside, 1 boundary, 2 interior, 3 final-slice interior."""
        out = np.zeros(self.shape, dtype=np.int8)
        out[self.boundary_mask] = 1
        out[self.solve_mask & self.open_interior_mask] = 2
        out[self.solve_mask & ~self.open_interior_mask] = 3
        return out


def union_parabolic_boundary(k: CylinderUnion) -> ParabolicBoundarySet:
    """Parabolic boundary of a union.

    A node is on it iff it lies on some member's parabolic boundary and is
    not an interior or final-slice node of any member.
    """
    initial, lateral = set(), set()
    solve = k.solve_mask
    for b in k.boxes:
        pb = _box_boundary(b)
        initial.update(n for n in pb.initial_nodes if not solve[n[1], n[0]])
        lateral.update(n for n in pb.lateral_nodes if not solve[n[1], n[0]])
    # a node can be initial for one member and lateral for another
    lateral -= initial
    return ParabolicBoundarySet(frozenset(initial), frozenset(lateral))


def runs(mask_row: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs ``[start, stop)`` of True entries in a 1D boolean array."""
    padded = np.concatenate([[False], mask_row, [False]])
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def as_union(domain: "Cylinder | CylinderUnion") -> CylinderUnion:
    if isinstance(domain, CylinderUnion):
        return domain
    return CylinderUnion(domain, (domain.box(),))


def boxes_from_fractions(c: Cylinder, spans: Sequence[tuple[float, float, float, float]]) -> tuple:
    """Index boxes from fractional ``(x0, x1, t0, t1)`` spans of ``c``."""
    n, k = c.mesh.n_cells, c.times.n_steps
    return tuple(
        IndexBox(int(round(x0 * n)), int(round(x1 * n)), int(round(t0 * k)), int(round(t1 * k)))
        for x0, x1, t0, t1 in spans
    )
