"""Tabulated functions on a cylinder or cylinder-union lattice."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .domain import Cylinder, CylinderUnion, IndexBox, SpatialMesh, TimeGrid

__all__ = ["GridFunction"]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values of ``u`` on every node of ``domain``.

    ``values`` has the ambient lattice shape ``(n_levels, n_nodes)``. For a
    union, nodes outside the union hold NaN and are ignored.
    """

    domain: Cylinder | CylinderUnion
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.cylinder.shape:
            raise ValueError(f"values have shape {values.shape}, lattice is {self.cylinder.shape}")
        values[~self.mask] = np.nan
        if not np.all(np.isfinite(values[self.mask])):
            raise ValueError("grid function values must be finite on the lattice")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, domain, f: Callable) -> "GridFunction":
        """Tabulate ``f(x, t)`` (vectorized) on the lattice."""
        cyl = domain.ambient if isinstance(domain, CylinderUnion) else domain
        X, T = cyl.meshgrid()
        vals = np.broadcast_to(np.asarray(f(X, T), dtype=float), X.shape)
        if isinstance(domain, CylinderUnion):
            vals = np.where(domain.closure_mask, vals, np.nan)
        return cls(domain, vals)

    @property
    def cylinder(self) -> Cylinder:
        return self.domain.ambient if isinstance(self.domain, CylinderUnion) else self.domain

    @property
    def mask(self) -> np.ndarray:
        if isinstance(self.domain, CylinderUnion):
            return self.domain.closure_mask
        return np.ones(self.domain.shape, dtype=bool)

    def restrict(self, box: IndexBox) -> "GridFunction":
        return GridFunction(self.cylinder.sub(box), self.values[box.time, box.space])

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.domain, values)

    def sup(self) -> float:
        return float(np.max(self.values[self.mask]))

    def inf(self) -> float:
        return float(np.min(self.values[self.mask]))

    def same_lattice(self, other: "GridFunction") -> bool:
        return self.cylinder == other.cylinder and np.array_equal(self.mask, other.mask)

    # -- serialization -----------------------------------------------------

    def to_csv(self, path=None) -> str:
        """CSV with header ``x,t,u``, rows ordered by time level then space.

        Floats use ``repr`` so the file round-trips exactly.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "t", "u"])
        x, t = self.cylinder.x, self.cylinder.t
        for k in range(t.size):
            for i in range(x.size):
                if self.mask[k, i]:
                    writer.writerow([repr(float(x[i])), repr(float(t[k])), repr(float(self.values[k, i]))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, cylinder: Cylinder | None = None) -> "GridFunction":
        """Read a full-cylinder CSV written by :meth:`to_csv`."""
        if isinstance(source, str) and source.startswith("x,t,u"):
            text = source
        else:
            text = Path(source).read_text()
        rows = list(csv.DictReader(io.StringIO(text)))
        xs = sorted({float(r["x"]) for r in rows})
        ts = sorted({float(r["t"]) for r in rows})
        if cylinder is None:
            cylinder = Cylinder(SpatialMesh(xs[0], xs[-1], len(xs) - 1), TimeGrid(ts[0], ts[-1], len(ts) - 1))
        if len(rows) != cylinder.shape[0] * cylinder.shape[1]:
            raise ValueError("CSV does not cover the full cylinder lattice")
        vals = np.array([float(r["u"]) for r in rows]).reshape(cylinder.shape)
        return cls(cylinder, vals)

    def save(self, path) -> None:
        """Compact binary dump (``.npz``) including the lattice geometry."""
        c = self.cylinder
        geom = np.array([c.mesh.a_left, c.mesh.b_right, c.mesh.n_cells, c.times.t_start, c.times.t_end, c.times.n_steps])
        boxes = (
            np.array([[b.i0, b.i1, b.k0, b.k1] for b in self.domain.boxes], dtype=np.int64)
            if isinstance(self.domain, CylinderUnion)
            else np.zeros((0, 4), dtype=np.int64)
        )
        with open(path, "wb") as fh:
            np.savez(fh, geometry=geom, boxes=boxes, values=self.values)

    @classmethod
    def load(cls, path) -> "GridFunction":
        with np.load(path) as data:
            a, b, n, t1, t2, k = data["geometry"]
            cyl = Cylinder(SpatialMesh(float(a), float(b), int(n)), TimeGrid(float(t1), float(t2), int(k)))
            boxes = tuple(IndexBox(*map(int, row)) for row in data["boxes"])
            domain = CylinderUnion(cyl, boxes) if boxes else cyl
            return cls(domain, data["values"])
