"""
Implicit, mass-conservative finite-difference solver for the Dirichlet
problem of the porous medium equation on a 1D cylinder.

Each time level solves, at interior nodes,

    u^{k+1}_i - u^k_i - (tau/h^2) (phi(u_{i+1}) - 2 phi(u_i) + phi(u_{i-1}))^{k+1} = 0

by damped Newton (tridiagonal Jacobian), with a projected nonlinear
Gauss-Seidel fallback. Residuals are reported on this ``u`` scale.
Lateral data ``g`` is given on the ``u^m`` scale and imposed as
``u = phi^{-1}(g)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .domain import Cylinder, CylinderUnion, as_union, runs
from .gridfunction import GridFunction
from .nonlinearity import RegularizedPhi, check_exponent, phi, phi_inverse, phi_reg

__all__ = [
    "BoundaryData",
    "SolveReport",
    "SolverConfig",
    "SolverDivergence",
    "mass",
    "oleinik_gap",
    "scheme_residual",
    "solve_bvp",
    "solve_obstacle",
    "solve_signed",
    "solve_union",
]

log = logging.getLogger(__name__)


class SolverDivergence(RuntimeError):
    """Raised when a time level fails to converge; carries the last iterate."""

    def __init__(self, message, solution=None, report=None):
        super().__init__(message)
        self.solution = solution
        self.report = report


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters
    ----------
    m : float
        PME exponent.
    n_reg : int
        Regularization index; 0 uses the exact nonlinearity.
    newton_tol : float
        Sup-norm tolerance on the level residual (``u`` scale).
    max_newton : int
        Newton iterations per level before the Gauss-Seidel fallback.
    damping : float
        Initial Newton step length in ``(0, 1]``.
    c_lin : float, optional
        Core slope of the regularization.
    fallback_sweeps : int
        Sweep cap of the fallback.
    """

    m: float = 2.0
    n_reg: int = 0
    newton_tol: float = 1e-10
    max_newton: int = 50
    damping: float = 1.0
    c_lin: float | None = None
    fallback_sweeps: int = 200_000
    scheme: str = "implicit-euler"

    def __post_init__(self):
        check_exponent(self.m)
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if int(self.max_newton) != self.max_newton or self.max_newton < 1:
            raise ValueError("max_newton must be a positive integer")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if int(self.n_reg) != self.n_reg or self.n_reg < 0:
            raise ValueError("n_reg must be a non-negative integer")
        if self.scheme != "implicit-euler":
            raise ValueError(f"unsupported scheme {self.scheme!r}")

    def regularization(self) -> RegularizedPhi | None:
        return RegularizedPhi(self.m, self.n_reg, self.c_lin) if self.n_reg else None

    def phi(self, s):
        r = self.regularization()
        return phi(s, self.m) if r is None else phi_reg(s, r)

    def kernel_args(self):
        r = self.regularization()
        if r is None:
            return self.m, 0, 1.0, np.zeros(6), np.zeros(5)
        return r.kernel_args()


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Initial values ``u0`` and lateral data ``g`` (``u^m`` scale).

    ``g_left``/``g_right`` hold one value per time level of the cylinder.
    The composite boundary function must be continuous at the two bottom
    corners up to ``compatibility_tol``.
    """

    u0: np.ndarray
    g_left: np.ndarray
    g_right: np.ndarray
    m: float = 2.0
    compatibility_tol: float = 1e-8

    def __post_init__(self):
        for name in ("u0", "g_left", "g_right"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 1D array")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.g_left.shape != self.g_right.shape:
            raise ValueError("g_left and g_right must have one value per time level")
        if self.u0.size < 3 or self.g_left.size < 2:
            raise ValueError("boundary data too short for a lattice")
        check_exponent(self.m)
        for side, u0c, gc in (("left", self.u0[0], self.g_left[0]), ("right", self.u0[-1], self.g_right[0])):
            gap = abs(float(phi_inverse(gc, self.m)) - u0c)
            if gap > self.compatibility_tol:
                raise ValueError(f"incompatible data at the {side} corner: |g^(1/m) - u0| = {gap:.3e}")

    @classmethod
    def from_u(cls, u0, left, right, m: float, compatibility_tol: float = 1e-8) -> "BoundaryData":
        """Build from lateral data given on the ``u`` scale."""
        return cls(u0, phi(left, m), phi(right, m), m, compatibility_tol)

    @classmethod
    def from_function(cls, c: Cylinder, f, m: float, compatibility_tol: float = 1e-8) -> "BoundaryData":
        """Sample ``u = f(x, t)`` on the parabolic boundary of ``c``."""
        x, t = c.x, c.t
        u0 = np.broadcast_to(np.asarray(f(x, np.full_like(x, t[0])), dtype=float), x.shape)
        left = np.broadcast_to(np.asarray(f(np.full_like(t, x[0]), t), dtype=float), t.shape)
        right = np.broadcast_to(np.asarray(f(np.full_like(t, x[-1]), t), dtype=float), t.shape)
        return cls.from_u(u0, left, right, m, compatibility_tol)

    @classmethod
    def from_trace(cls, u: GridFunction, m: float, compatibility_tol: float = 1e-8) -> "BoundaryData":
        v = u.values
        return cls.from_u(v[0], v[:, 0], v[:, -1], m, compatibility_tol)

    @property
    def left_u(self) -> np.ndarray:
        return phi_inverse(self.g_left, self.m)

    @property
    def right_u(self) -> np.ndarray:
        return phi_inverse(self.g_right, self.m)

    def lattice_values(self) -> np.ndarray:
        """Boundary values on a lattice-shaped array; NaN off the boundary."""
        out = np.full((self.g_left.size, self.u0.size), np.nan)
        out[1:, 0] = self.left_u[1:]
        out[1:, -1] = self.right_u[1:]
        out[0] = self.u0
        return out

    def shifted(self, eps: float, floor: float | None = None) -> "BoundaryData":
        """Data lifted by ``eps`` on the ``u`` scale (optionally clamped below)."""

        def lift(v):
            v = v + eps
            return v if floor is None else np.maximum(v, floor)

        return BoundaryData.from_u(lift(self.u0), lift(self.left_u), lift(self.right_u), self.m, self.compatibility_tol)

    def sup(self) -> float:
        return float(max(self.u0.max(), self.left_u.max(), self.right_u.max()))

    def inf(self) -> float:
        return float(min(self.u0.min(), self.left_u.min(), self.right_u.min()))

    def check_lattice(self, c: Cylinder) -> None:
        n_levels, n_nodes = c.shape
        if self.u0.size != n_nodes or self.g_left.size != n_levels:
            raise ValueError(
                f"boundary data sized for {(self.g_left.size, self.u0.size)}, cylinder lattice is {c.shape}"
            )


@dataclass
class SolveReport:
    newton_iterations: list = field(default_factory=list)
    max_residual: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    fallback_levels: list = field(default_factory=list)
    converged: bool = True

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _march(c: Cylinder, bd: BoundaryData, cfg: SolverConfig, psi, lo: float, hi: float):
    bd.check_lattice(c)
    if bd.m != cfg.m:
        raise ValueError(f"boundary data built for m={bd.m}, solver configured for m={cfg.m}")
    n_levels, n_nodes = c.shape
    lam = c.tau / c.h**2
    m, n_reg, cl, coef, dcoef = cfg.kernel_args()
    u = np.empty(c.shape)
    u[0] = bd.u0
    left, right = bd.left_u, bd.right_u
    w = _trapezoid_weights(n_nodes, c.h)
    report = SolveReport(mass=[float(w @ u[0])])
    no_obstacle = np.full(n_nodes, -np.inf)
    for k in range(1, n_levels):
        level_psi = no_obstacle if psi is None else psi[k]
        level_hi = hi if psi is None else max(hi, float(np.max(level_psi[1:-1], initial=hi)))
        unew, iters, err, status = _kernels.solve_level(
            u[k - 1], left[k], right[k], level_psi, lam, m, n_reg, cl, coef, dcoef,
            lo, level_hi, cfg.newton_tol, cfg.max_newton, cfg.damping, cfg.fallback_sweeps,
        )
        u[k] = unew
        report.newton_iterations.append(int(iters))
        report.max_residual.append(float(err))
        report.mass.append(float(w @ unew))
        if status == _kernels.CONVERGED_FALLBACK:
            report.fallback_levels.append(k)
        elif status == _kernels.FAILED:
            report.converged = False
            u[k + 1 :] = unew
            raise SolverDivergence(
                f"level {k} did not converge (residual {err:.3e} > {cfg.newton_tol:.1e})",
                solution=GridFunction(c, u),
                report=report,
            )
    return GridFunction(c, u), report


def solve_bvp(c: Cylinder, bd: BoundaryData, cfg: SolverConfig) -> tuple[GridFunction, SolveReport]:
    """Solve the nonnegative Dirichlet problem on ``c``.

    Returns the lattice solution (initial level included) and a report.
    Raises :class:`SolverDivergence` if a level fails to converge.
    """
    if bd.inf() < 0:
        raise ValueError("solve_bvp needs non-negative data; use solve_signed for signed data")
    return _march(c, bd, cfg, None, 0.0, bd.sup())


def solve_signed(c: Cylinder, bd: BoundaryData, cfg: SolverConfig) -> tuple[GridFunction, SolveReport]:
    """Solve ``u_t = (phi_n(u))_xx`` with signed data; ``cfg.n_reg >= 1`` is required."""
    if cfg.n_reg < 1:
        raise ValueError("signed solves need a regularization index n_reg >= 1")
    return _march(c, bd, cfg, None, bd.inf(), bd.sup())


def solve_obstacle(c: Cylinder, psi, bd: BoundaryData, cfg: SolverConfig, tol: float = 1e-12):
    """Obstacle problem: per level ``min(w - psi, scheme residual) = 0``.

    ``psi`` is a :class:`GridFunction` or a lattice-shaped array (``-inf``
    allowed). Boundary data must dominate ``psi`` on the parabolic boundary.
    """
    psi_vals = psi.values if isinstance(psi, GridFunction) else np.asarray(psi, dtype=float)
    if psi_vals.shape != c.shape:
        raise ValueError(f"obstacle has shape {psi_vals.shape}, lattice is {c.shape}")
    bvals = bd.lattice_values()
    on_bd = np.isfinite(bvals)
    if np.any(bvals[on_bd] < psi_vals[on_bd] - tol):
        raise ValueError("infeasible obstacle: boundary data below psi on the parabolic boundary")
    if bd.inf() < 0:
        raise ValueError("solve_obstacle needs non-negative data")
    return _march(c, bd, cfg, psi_vals, 0.0, bd.sup())


def scheme_residual(u: GridFunction, cfg: SolverConfig) -> np.ndarray:
    """Level residual ``u^{k+1} - u^k - lam D2 phi(u^{k+1})`` at solve nodes.

    Lattice-shaped; NaN where the scheme is not imposed (parabolic boundary
    and outside a union).
    """
    c = u.cylinder
    v = u.values
    p = cfg.phi(v)
    lam = c.tau / c.h**2
    out = np.full(c.shape, np.nan)
    res = v[1:, 1:-1] - v[:-1, 1:-1] - lam * (p[1:, 2:] - 2.0 * p[1:, 1:-1] + p[1:, :-2])
    out[1:, 1:-1] = res
    solve = as_union(u.domain).solve_mask
    out[~solve] = np.nan
    return out


def solve_union(k: CylinderUnion, boundary_values: np.ndarray, cfg: SolverConfig, signed: bool = False) -> GridFunction:
    """Direct level-by-level solve on a cylinder union.

    Each time level is split into maximal runs of solve nodes; every run is
    closed by boundary nodes whose values come from ``boundary_values``
    (lattice-shaped, ``u`` scale). This is the slab-wise induction over the
    time-ordered member endpoints.
    """
    bvals = np.asarray(boundary_values, dtype=float)
    bmask = k.boundary_mask
    if bvals.shape != k.shape or not np.all(np.isfinite(bvals[bmask])):
        raise ValueError("boundary values must be finite on the union's parabolic boundary")
    if not signed and np.any(bvals[bmask] < 0):
        raise ValueError("non-negative union solve received negative boundary data")
    if signed and cfg.n_reg < 1:
        raise ValueError("signed solves need n_reg >= 1")
    lo = float(bvals[bmask].min()) if signed else 0.0
    hi = float(bvals[bmask].max())
    u = np.where(k.closure_mask, np.nan, np.nan)
    u[bmask] = bvals[bmask]
    lam = k.ambient.tau / k.ambient.h**2
    m, n_reg, cl, coef, dcoef = cfg.kernel_args()
    solve = k.solve_mask
    for lev in range(k.shape[0]):
        for start, stop in runs(solve[lev]):
            i0, i1 = start - 1, stop  # closing boundary nodes
            uo = u[lev - 1, i0 : i1 + 1].copy()
            uo[0] = uo[-1] = 0.0  # unused by the kernel
            psi = np.full(uo.size, -np.inf)
            unew, _, err, status = _kernels.solve_level(
                uo, u[lev, i0], u[lev, i1], psi, lam, m, n_reg, cl, coef, dcoef,
                lo, hi, cfg.newton_tol, cfg.max_newton, cfg.damping, cfg.fallback_sweeps,
            )
            if status == _kernels.FAILED:
                raise SolverDivergence(f"union level {lev} run {start}:{stop} did not converge ({err:.3e})")
            u[lev, start:stop] = unew[1:-1]
    return GridFunction(k, u)


def mass(u: GridFunction, level: int) -> float:
    """Trapezoidal integral of ``u(., t_level)`` over the mesh."""
    c = u.cylinder
    if not -c.shape[0] <= level < c.shape[0]:
        raise IndexError(f"time level {level} out of range")
    return float(_trapezoid_weights(c.shape[1], c.h) @ u.values[level])


def spacetime_trapezoid(c: Cylinder, f: np.ndarray) -> float:
    wt = _trapezoid_weights(c.shape[0], c.tau)
    wx = _trapezoid_weights(c.shape[1], c.h)
    return float(wt @ f @ wx)


def oleinik_gap(u: GridFunction, v: GridFunction, m: float) -> float:
    """Space-time trapezoid of ``(u - v)(u^m - v^m)``; never negative."""
    if not u.same_lattice(v) or not isinstance(u.domain, Cylinder):
        raise ValueError("oleinik_gap needs two grid functions on the same cylinder lattice")
    a, b = u.values, v.values
    return spacetime_trapezoid(u.cylinder, (a - b) * (phi(a, m) - phi(b, m)))
