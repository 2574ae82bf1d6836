"""
Numerical classifiers for supersolutions of the PME on a lattice.

Three notions are tested against a deterministic family of compactly
supported bumps ``b(x) c(t)``, each a quartic power of a parabola:

* weak: ``int -u phi_t + D(u^m) phi_x >= 0``  (one discrete derivative of u)
* very weak: ``int -u phi_t - u^m phi_xx >= 0``  (no derivative of u)
* m-superporous: PME solutions on subcylinders that lie below ``u`` on the
  parabolic boundary lie below ``u`` inside.

Quadrature is the lattice trapezoid rule; test-function derivatives are
analytic. Scan minima are reported normalized by ``int phi``, i.e. as the
mean defect ``u_t - (u^m)_xx`` seen by the bump.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .domain import Cylinder, IndexBox
from .gridfunction import GridFunction
from .nonlinearity import phi
from .solver import BoundaryData, SolverConfig, solve_bvp

__all__ = [
    "BUMP_MASS",
    "ClassificationReport",
    "TestFunction",
    "caccioppoli_check",
    "classify",
    "default_family",
    "default_samples",
    "default_tolerance",
    "residual_scan",
    "superporous_check",
    "very_weak_residual",
    "weak_residual",
]

# int_{-1}^{1} (1 - q^2)^4 dq
BUMP_MASS = 256.0 / 315.0


def _bump(s, center, radius):
    q = (np.asarray(s, dtype=float) - center) / radius
    inside = np.abs(q) < 1.0
    w = np.where(inside, 1.0 - q**2, 0.0)
    val = w**4
    d1 = np.where(inside, -8.0 * q * w**3 / radius, 0.0)
    d2 = np.where(inside, -8.0 * w**2 * (1.0 - 7.0 * q**2) / radius**2, 0.0)
    return val, d1, d2


@dataclass(frozen=True)
class TestFunction:
    """Separable bump ``amplitude * b(x) c(t)`` centred at ``(x0, t0)``."""

    x0: float
    t0: float
    rx: float
    rt: float
    amplitude: float = 1.0

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if not (self.rx > 0 and self.rt > 0):
            raise ValueError("test-function radii must be positive")
        if self.amplitude < 0:
            raise ValueError("test functions are non-negative")

    @property
    def integral(self) -> float:
        return self.amplitude * self.rx * self.rt * BUMP_MASS**2

    def evaluate(self, x, t):
        """``(phi, phi_t, phi_x, phi_xx)`` on the broadcast of ``x`` and ``t``."""
        bx, bx1, bx2 = _bump(x, self.x0, self.rx)
        ct, ct1, _ = _bump(t, self.t0, self.rt)
        a = self.amplitude
        return a * bx * ct, a * bx * ct1, a * bx1 * ct, a * bx2 * ct

    def inside(self, c: Cylinder, slack: float = 1e-12) -> bool:
        return (
            self.x0 - self.rx >= c.mesh.a_left - slack
            and self.x0 + self.rx <= c.mesh.b_right + slack
            and self.t0 - self.rt >= c.times.t_start - slack
            and self.t0 + self.rt <= c.times.t_end + slack
        )


def _check_support(u: GridFunction, tf: TestFunction) -> Cylinder:
    if not isinstance(u.domain, Cylinder):
        raise ValueError("residuals are defined on single cylinders")
    c = u.domain
    if not tf.inside(c):
        raise ValueError(f"test function {tf} is not supported inside the cylinder")
    return c


def _centered_dx(v: np.ndarray, h: float) -> np.ndarray:
    return np.gradient(v, h, axis=1)


def weak_residual(u: GridFunction, tf: TestFunction, m: float) -> float:
    """``int -u phi_t + D(u^m) phi_x`` by the lattice trapezoid rule."""
    c = _check_support(u, tf)
    X, T = c.meshgrid()
    _, ft, fx, _ = tf.evaluate(X, T)
    v = u.values
    integrand = -v * ft + _centered_dx(phi(v, m), c.h) * fx
    return float(np.sum(integrand) * c.h * c.tau)


def _second_difference(f: np.ndarray, h: float) -> np.ndarray:
    """Three-point second difference along space, zero-padded.

    Applied to a compactly supported test function this sums by parts
    exactly, so ``u^m`` affine in ``x`` contributes nothing.
    """
    padded = np.pad(f, ((0, 0), (1, 1)))
    return (padded[:, 2:] - 2.0 * f + padded[:, :-2]) / h**2


def very_weak_residual(u: GridFunction, tf: TestFunction, m: float) -> float:
    """``int -u phi_t - u^m phi_xx``; no derivative of ``u`` is formed.

    ``phi_xx`` is the second difference of the sampled test function.
    """
    c = _check_support(u, tf)
    X, T = c.meshgrid()
    f, ft, _, _ = tf.evaluate(X, T)
    v = u.values
    integrand = -v * ft - phi(v, m) * _second_difference(f, c.h)
    return float(np.sum(integrand) * c.h * c.tau)


@dataclass(frozen=True)
class TestFamily:
    """Bump centres every ``stride`` nodes and paired radius scales (in nodes)."""

    stride: int = 2
    scales: tuple = ((1 / 16, 1 / 16), (1 / 8, 1 / 8), (1 / 4, 1 / 4))

    __test__ = False

    def radii_nodes(self, c: Cylinder):
        n, k = c.mesh.n_cells, c.times.n_steps
        out = []
        for fx, ft in self.scales:
            out.append((max(2, int(round(fx * n))), max(2, int(round(ft * k)))))
        return out

    def describe(self, c: Cylinder) -> str:
        return f"bumps every {self.stride} nodes, radii (nodes) {self.radii_nodes(c)}"


def default_family() -> TestFamily:
    return TestFamily()


def _kernels_1d(r: int, step: float):
    q = np.arange(-r, r + 1) / r
    w = 1.0 - q**2
    val = w**4
    d1 = -8.0 * q * w**3 / (r * step)
    d2 = _second_difference(val[None, :], step)[0]
    return val, d1, d2


def _scan_fields(u: GridFunction, family: TestFamily, m: float):
    """Normalized weak / very weak residual maps for each radius pair.

    Residuals for all centres are computed at once as separable lattice
    correlations with the sampled bump and its derivatives.
    """
    c = u.domain
    v = u.values
    pm = phi(v, m)
    dpm = _centered_dx(pm, c.h)
    out = []
    for rx, rt in family.radii_nodes(c):
        bx, bx1, bx2 = _kernels_1d(rx, c.h)
        ct, ct1, _ = _kernels_1d(rt, c.tau)

        def corr(field, kt, kx):
            tmp = ndimage.correlate1d(field, kt, axis=0, mode="constant")
            return ndimage.correlate1d(tmp, kx, axis=1, mode="constant")

        norm = rx * c.h * rt * c.tau * BUMP_MASS**2
        weak = (corr(-v, ct1, bx) + corr(dpm, ct, bx1)) * c.h * c.tau / norm
        vweak = (corr(-v, ct1, bx) - corr(pm, ct, bx2)) * c.h * c.tau / norm
        valid = np.zeros(c.shape, dtype=bool)
        valid[rt : c.shape[0] - rt : family.stride, rx : c.shape[1] - rx : family.stride] = True
        out.append((rx, rt, weak, vweak, valid))
    return out


def residual_scan(u: GridFunction, m: float, family: TestFamily | None = None) -> tuple[float, float]:
    """Minima of the normalized weak and very weak residuals over the family."""
    if not isinstance(u.domain, Cylinder):
        raise ValueError("residual scans are defined on single cylinders")
    family = family or default_family()
    wmin, vmin = np.inf, np.inf
    for _, _, weak, vweak, valid in _scan_fields(u, family, m):
        if np.any(valid):
            wmin = min(wmin, float(weak[valid].min()))
            vmin = min(vmin, float(vweak[valid].min()))
    if not np.isfinite(wmin):
        raise ValueError("test family is empty on this lattice")
    return wmin, vmin


def family_functions(c: Cylinder, family: TestFamily | None = None) -> list[TestFunction]:
    """Explicit test functions of the family (unit amplitude)."""
    family = family or default_family()
    x, t = c.x, c.t
    out = []
    for rx, rt in family.radii_nodes(c):
        for k in range(rt, c.shape[0] - rt, family.stride):
            for i in range(rx, c.shape[1] - rx, family.stride):
                out.append(TestFunction(float(x[i]), float(t[k]), rx * c.h, rt * c.tau))
    return out


def default_samples(c: Cylinder) -> list[IndexBox]:
    """Subcylinders of width 1/4 or 1/2 and depth 1/4 or 1/2, anchored every 1/8.

    Every sample stays off the cylinder's own parabolic boundary and final slice.
    """
    n, k = c.mesh.n_cells, c.times.n_steps
    out = []
    for wf in (0.25, 0.5):
        for df in (0.25, 0.5):
            w, d = max(2, int(round(wf * n))), max(1, int(round(df * k)))
            for ax in range(8):
                i0 = 1 + int(round(ax * n / 8))
                if i0 + w > n - 1:
                    break
                for at in range(8):
                    k0 = 1 + int(round(at * k / 8))
                    if k0 + d > k - 1:
                        break
                    out.append(IndexBox(i0, i0 + w, k0, k0 + d))
    return out


def superporous_check(
    u: GridFunction, samples: Sequence[IndexBox], cfg: SolverConfig, tol: float | None = None
) -> float:
    """Worst ``max(h - u)`` over sampled subcylinders.

    ``h`` solves the PME on each sample with ``u``'s trace as boundary data.
    The comparison property holds on the family when the result is ``<= tol``.
    """
    if not isinstance(u.domain, Cylinder):
        raise ValueError("superporous checks are defined on single cylinders")
    c = u.domain
    worst = -np.inf
    for box in samples:
        if box.i0 < 1 or box.i1 > c.mesh.n_cells - 1 or box.k1 > c.times.n_steps:
            raise ValueError(f"sample {box} is not strictly inside the cylinder")
        sub = u.restrict(box)
        bd = BoundaryData.from_trace(sub, cfg.m, compatibility_tol=np.inf)
        h, _ = solve_bvp(sub.domain, bd, cfg)
        worst = max(worst, float(np.max(h.values[1:, 1:-1] - sub.values[1:, 1:-1])))
    return worst


def caccioppoli_check(u: GridFunction, zeta, M: float, m: float) -> tuple[float, float, bool]:
    """Energy estimate for bounded supersolutions with a spatial cutoff.

    ``zeta`` returns ``(value, derivative)`` at an array of ``x``. Returns
    ``(lhs, rhs, lhs <= rhs)`` with ``lhs = int zeta^2 |D(u^m)|^2`` and
    ``rhs = 16 M^(2m) T int zeta'^2 + 4 M^(m+1) int zeta^2``.
    """
    c = u.cylinder
    if u.sup() > M * (1 + 1e-12):
        raise ValueError(f"caccioppoli_check needs u <= M; sup u = {u.sup()} > {M}")
    z, dz = (np.asarray(a, dtype=float) for a in zeta(c.x))
    grad = _centered_dx(phi(u.values, m), c.h)
    wx = np.full(c.shape[1], c.h)
    wx[[0, -1]] *= 0.5
    wt = np.full(c.shape[0], c.tau)
    wt[[0, -1]] *= 0.5
    lhs = float(wt @ (grad**2) @ (wx * z**2))
    T = c.times.duration
    rhs = 16.0 * M ** (2 * m) * T * float(wx @ dz**2) + 4.0 * M ** (m + 1) * float(wx @ z**2)
    return lhs, rhs, lhs <= rhs


def bump_cutoff(center: float, radius: float):
    """Spatial cutoff ``(1 - ((x - center)/radius)^2)^4`` with its derivative."""

    def zeta(x):
        val, d1, _ = _bump(x, center, radius)
        return val, d1

    return zeta


def gradient_energy(u: GridFunction, m: float, region: tuple[float, float] | None = None) -> float:
    """``int |D(u^m)|^2`` over the lattice, optionally restricted in space."""
    c = u.cylinder
    grad = _centered_dx(phi(u.values, m), c.h)
    wx = np.full(c.shape[1], c.h)
    wx[[0, -1]] *= 0.5
    if region is not None:
        wx = np.where((c.x >= region[0]) & (c.x <= region[1]), wx, 0.0)
    wt = np.full(c.shape[0], c.tau)
    wt[[0, -1]] *= 0.5
    return float(wt @ grad**2 @ wx)


def default_tolerance(u: GridFunction, m: float) -> float:
    """``5 (h + tau) (1 + sup u)^m``."""
    c = u.cylinder
    return 5.0 * (c.h + c.tau) * (1.0 + max(u.sup(), 0.0)) ** m


@dataclass
class ClassificationReport:
    weak_min_residual: float
    very_weak_min_residual: float
    superporous_worst_violation: float
    tolerance: float
    weak: bool
    very_weak: bool
    superporous: bool
    family: str
    tolerance_formula: str = "5*(h+tau)*(1+sup u)^m"
    extra: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> tuple[bool, bool, bool]:
        return self.weak, self.very_weak, self.superporous

    @property
    def unanimous(self) -> bool:
        return len(set(self.verdicts)) == 1

    def to_json(self, path=None) -> str:
        text = json.dumps(asdict(self), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def classify(
    u: GridFunction,
    cfg: SolverConfig,
    tolerance: float | None = None,
    family: TestFamily | None = None,
    samples: Sequence[IndexBox] | None = None,
) -> ClassificationReport:
    """Residual scans and superporous check, with verdicts at one tolerance."""
    if u.inf() < 0:
        raise ValueError("classification is defined for non-negative functions")
    family = family or default_family()
    tol = default_tolerance(u, cfg.m) if tolerance is None else float(tolerance)
    wmin, vmin = residual_scan(u, cfg.m, family)
    samples = default_samples(u.domain) if samples is None else samples
    worst = superporous_check(u, samples, cfg)
    return ClassificationReport(
        weak_min_residual=wmin,
        very_weak_min_residual=vmin,
        superporous_worst_violation=worst,
        tolerance=tol,
        weak=wmin >= -tol,
        very_weak=vmin >= -tol,
        superporous=worst <= tol,
        family=family.describe(u.domain) + f"; {len(samples)} subcylinders",
    )
