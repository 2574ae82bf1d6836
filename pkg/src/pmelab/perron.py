"""
Boundary-perturbation experiments: the Oleinik gap under an additive lift
of the data, monotone ladders of lower/upper solutions converging to the
solution, and continuity of the solution at parabolic-boundary nodes.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import Cylinder, parabolic_boundary
from .gridfunction import GridFunction
from .solver import BoundaryData, SolverConfig, oleinik_gap, solve_bvp

__all__ = [
    "PerturbationLadder",
    "boundary_attainment",
    "gap_bound",
    "perron_ladder",
    "perturbation_gap",
    "sample_boundary_nodes",
]


def gap_bound(eps: float, volume: float, M: float, m: float) -> float:
    """``eps |Omega_T| ((M + 1) + (M + 1)^m)``."""
    return eps * volume * ((M + 1.0) + (M + 1.0) ** m)


def perturbation_gap(u: GridFunction, u_eps: GridFunction, eps: float, M: float, m: float) -> tuple[float, float]:
    """Measured Oleinik gap of the lifted solution and its a-priori bound.

    The caller compares ``lhs <= rhs + slack``.
    """
    if not u.same_lattice(u_eps):
        raise ValueError("perturbation_gap needs both solutions on the same lattice")
    lhs = oleinik_gap(u_eps, u, m)
    return lhs, gap_bound(eps, u.cylinder.volume, M, m)


@dataclass
class PerturbationLadder:
    """Lower/upper solutions for a decreasing sequence of lifts."""

    eps: list
    lower: list
    upper: list
    direct: GridFunction
    sandwich_violation: list = field(default_factory=list)

    @property
    def gaps(self) -> list[float]:
        return [float(np.max(v.values - u.values)) for u, v in zip(self.lower, self.upper)]

    def monotone_violation(self) -> float:
        """Largest breach of ``u_j`` nondecreasing and ``v_j`` nonincreasing in ``j``."""
        worst = 0.0
        for a, b in zip(self.lower, self.lower[1:]):
            worst = max(worst, float(np.max(a.values - b.values)))
        for a, b in zip(self.upper, self.upper[1:]):
            worst = max(worst, float(np.max(b.values - a.values)))
        return worst

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "eps", "sup_gap", "sandwich_violation"])
        for j, (e, g, s) in enumerate(zip(self.eps, self.gaps, self.sandwich_violation), start=1):
            writer.writerow([j, repr(float(e)), repr(g), repr(s)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def perron_ladder(c: Cylinder, bd: BoundaryData, eps_sequence: Sequence[float], cfg: SolverConfig) -> PerturbationLadder:
    """Solve with data ``max(phi - eps_j, 0)`` and ``max(phi - eps_j, 0) + eps_j``.

    ``eps_sequence`` must be strictly decreasing and non-negative.
    """
    eps = [float(e) for e in eps_sequence]
    if not eps or any(e < 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_sequence must be non-empty, non-negative and strictly decreasing")
    direct, _ = solve_bvp(c, bd, cfg)
    lower, upper, sandwich = [], [], []
    for e in eps:
        lo_data = bd.shifted(-e, floor=0.0)
        u_j, _ = solve_bvp(c, lo_data, cfg)
        v_j, _ = solve_bvp(c, lo_data.shifted(e), cfg)
        lower.append(u_j)
        upper.append(v_j)
        sandwich.append(
            float(max(np.max(u_j.values - direct.values), np.max(direct.values - v_j.values)))
        )
    return PerturbationLadder(eps, lower, upper, direct, sandwich)


def sample_boundary_nodes(c: Cylinder, count: int = 10) -> list[tuple[int, int]]:
    """``count`` parabolic-boundary nodes spread evenly along the boundary path.

    The path runs up the left column, along the initial slice, and up the
    right column; the two bottom corners are skipped.
    """
    n, k = c.mesh.n_cells, c.times.n_steps
    path = [(0, kk) for kk in range(k, 0, -1)] + [(i, 0) for i in range(1, n)] + [(n, kk) for kk in range(1, k + 1)]
    idx = np.linspace(0, len(path) - 1, count + 2)[1:-1]
    return [path[int(round(j))] for j in idx]


def boundary_attainment(u: GridFunction, bd: BoundaryData, xi: tuple[int, int], radius: float) -> float:
    """``sup |u(z) - phi(xi)|`` over lattice nodes within space-time distance ``radius`` of ``xi``."""
    c = u.cylinder
    if not radius > 0:
        raise ValueError("radius must be positive")
    if tuple(xi) not in parabolic_boundary(c):
        raise ValueError(f"{xi} is not a parabolic-boundary node")
    i, k = xi
    target = bd.lattice_values()[k, i]
    X, T = c.meshgrid()
    near = (X - c.x[i]) ** 2 + (T - c.t[k]) ** 2 <= radius**2 * (1 + 1e-12)
    if not np.any(near):
        raise ValueError("empty neighbourhood")
    return float(np.max(np.abs(u.values[near] - target)))
