"""
Schwarz alternating method on a finite union of cylinders.

Starting from a discrete subsolution that matches the boundary data, each
sweep re-solves the PME on every member in index order, using the current
iterate's trace on the member's parabolic boundary as Dirichlet data, and
writes the member solution back. Iterates increase monotonically to the
solution on the union.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import CylinderUnion
from .gridfunction import GridFunction
from .solver import BoundaryData, SolverConfig, SolverDivergence, solve_bvp

__all__ = [
    "SchwarzError",
    "SchwarzResult",
    "SchwarzState",
    "initial_subsolution",
    "schwarz_solve",
    "schwarz_sweep",
    "union_boundary_values",
]


class SchwarzError(RuntimeError):
    pass


def union_boundary_values(k: CylinderUnion, f) -> np.ndarray:
    """Sample ``u = f(x, t)`` on the parabolic boundary of ``k`` (NaN elsewhere)."""
    X, T = k.ambient.meshgrid()
    vals = np.broadcast_to(np.asarray(f(X, T), dtype=float), X.shape)
    return np.where(k.boundary_mask, vals, np.nan)


def initial_subsolution(k: CylinderUnion, boundary_values: np.ndarray) -> GridFunction:
    """Discrete subsolution equal to the data on the parabolic boundary.

    Off the boundary, the value at time level ``t`` is the minimum of the
    boundary data over all boundary nodes at levels ``<= t``. This is
    nonincreasing in time and lies below every neighbour, so the scheme
    residual is ``<= 0`` at every solve node.
    """
    bvals = np.asarray(boundary_values, dtype=float)
    bmask = k.boundary_mask
    if bvals.shape != k.shape or not np.all(np.isfinite(bvals[bmask])):
        raise ValueError("boundary values must be finite on the union's parabolic boundary")
    level_min = np.where(bmask, bvals, np.inf).min(axis=1)
    envelope = np.minimum.accumulate(level_min)
    v = np.full(k.shape, np.nan)
    v[k.solve_mask] = np.broadcast_to(envelope[:, None], k.shape)[k.solve_mask]
    v[bmask] = bvals[bmask]
    return GridFunction(k, v)


@dataclass
class SchwarzState:
    union: CylinderUnion
    values: np.ndarray
    sweep: int = 0
    member: int = 0
    history: list = field(default_factory=list)

    @property
    def iterate(self) -> GridFunction:
        return GridFunction(self.union, self.values)


def _member_solve(state: SchwarzState, idx: int, cfg: SolverConfig) -> np.ndarray:
    box = state.union.boxes[idx]
    cyl = state.union.ambient.sub(box)
    block = state.values[box.time, box.space]
    bd = BoundaryData.from_u(block[0], block[:, 0], block[:, -1], cfg.m, compatibility_tol=np.inf)
    try:
        sol, _ = solve_bvp(cyl, bd, cfg)
    except SolverDivergence as exc:
        raise SchwarzError(f"member {idx} solve failed in sweep {state.sweep + 1}: {exc}") from exc
    return sol.values


def schwarz_sweep(state: SchwarzState, cfg: SolverConfig, monotone_tol: float | None = None) -> SchwarzState:
    """One full sweep over the members; returns a new state.

    Raises :class:`SchwarzError` if any node decreases by more than
    ``monotone_tol`` (default ``10 * newton_tol``).
    """
    if monotone_tol is None:
        monotone_tol = 10.0 * cfg.newton_tol
    old = state.values.copy()
    new = replace(state, values=state.values.copy(), history=list(state.history))
    violations = 0
    for idx, box in enumerate(state.union.boxes):
        new.member = idx
        sol = _member_solve(new, idx, cfg)
        target = new.values[box.k0 + 1 : box.k1 + 1, box.i0 + 1 : box.i1]
        fresh = sol[1:, 1:-1]
        violations += int(np.count_nonzero(fresh < target - monotone_tol))
        target[...] = fresh
    mask = state.union.closure_mask
    change = float(np.max(np.abs(new.values[mask] - old[mask])))
    new.sweep = state.sweep + 1
    new.history.append(
        {
            "sweep": new.sweep,
            "sup_change": change,
            "min": float(np.min(new.values[mask])),
            "max": float(np.max(new.values[mask])),
            "monotonicity_violations": violations,
        }
    )
    if violations:
        raise SchwarzError(f"iterate decreased at {violations} nodes in sweep {new.sweep}")
    return new


@dataclass
class SchwarzResult:
    solution: GridFunction
    history: list
    converged: bool

    def to_json(self, path=None) -> str:
        text = json.dumps({"converged": self.converged, "history": self.history}, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def schwarz_solve(
    k: CylinderUnion,
    boundary_values: np.ndarray,
    cfg: SolverConfig,
    sweep_tol: float = 1e-6,
    max_sweeps: int = 200,
    start: GridFunction | None = None,
) -> SchwarzResult:
    """Iterate sweeps until the sup-norm change of a sweep drops below ``sweep_tol``."""
    v0 = initial_subsolution(k, boundary_values) if start is None else start
    state = SchwarzState(k, np.array(v0.values))
    while state.sweep < max_sweeps:
        state = schwarz_sweep(state, cfg)
        if state.history[-1]["sup_change"] < sweep_tol:
            return SchwarzResult(state.iterate, state.history, True)
    return SchwarzResult(state.iterate, state.history, False)
