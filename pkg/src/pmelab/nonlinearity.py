"""
The porous-medium nonlinearity ``phi(s) = |s|^(m-1) s`` and its smooth
regularizations ``phi_n``.

``phi_1`` is linear with slope ``c_lin`` on ``|s| <= 1/2``, equal to
``phi`` on ``|s| >= 1``, and a quintic blend in between that matches value,
slope and curvature at both knots. ``phi_n(s) = n^-m phi_1(n s)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from ._kernels import phi_prime_vec, phi_vec

__all__ = [
    "RegularizedPhi",
    "check_exponent",
    "default_core_slope",
    "phi",
    "phi_inverse",
    "phi_prime",
    "phi_reg",
    "phi_reg_prime",
    "phi_reg_primitive",
]


def check_exponent(m: float) -> float:
    m = float(m)
    if not m > 1.0:
        raise ValueError(f"exponent m must be > 1 (degenerate case), got {m}")
    return m


def phi(s, m: float):
    """``|s|^(m-1) s``, elementwise."""
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.abs(s) ** m


def phi_prime(s, m: float):
    return m * np.abs(np.asarray(s, dtype=float)) ** (m - 1.0)


def phi_inverse(v, m: float):
    """Inverse of ``phi``: ``sign(v) |v|^(1/m)``."""
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.abs(v) ** (1.0 / m)


def _blend(m: float, c: float) -> Polynomial:
    # Hermite-quintic data: (value, slope, curvature) at s = 1/2 and s = 1
    knots = [(0.5, (0.5 * c, c, 0.0)), (1.0, (1.0, m, m * (m - 1.0)))]
    rows, rhs = [], []
    for x, (v, d1, d2) in knots:
        rows.append([x**k for k in range(6)])
        rows.append([k * x ** (k - 1) if k >= 1 else 0.0 for k in range(6)])
        rows.append([k * (k - 1) * x ** (k - 2) if k >= 2 else 0.0 for k in range(6)])
        rhs.extend([v, d1, d2])
    return Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)))


def _min_on_blend(poly: Polynomial) -> float:
    # exact minimum over [1/2, 1]: endpoints and interior critical points
    cands = [0.5, 1.0]
    for root in poly.deriv().roots():
        if abs(root.imag) < 1e-12 and 0.5 < root.real < 1.0:
            cands.append(root.real)
    return float(min(poly(x) for x in cands))


def default_core_slope(m: float, samples: int = 400) -> float:
    """Slope of the linear core of ``phi_1`` used when none is given.

    Returns the midpoint of the set of slopes in ``(0, 1]`` for which the
    blend is both increasing and convex.
    """
    m = check_exponent(m)
    good = []
    for c in np.linspace(1.0 / samples, 1.0, samples):
        p = _blend(m, c)
        if _min_on_blend(p.deriv()) > 0.0 and _min_on_blend(p.deriv(2)) >= -1e-12:
            good.append(c)
    if not good:
        raise ValueError(f"no convex monotone blend exists for m={m}")
    return 0.5 * (good[0] + good[-1])


@dataclass(frozen=True)
class RegularizedPhi:
    """Parameters of ``phi_n``.

    Parameters
    ----------
    m : float
        Exponent, ``m > 1``.
    n_reg : int
        Regularization index ``n >= 1``; ``phi_n = phi`` for ``|s| >= 1/n``.
    c_lin : float, optional
        Slope of the linear core of ``phi_1``. Defaults to
        :func:`default_core_slope`. Rejected if the blend is not strictly
        increasing.
    """

    m: float
    n_reg: int
    c_lin: float | None = None
    coef: np.ndarray = field(init=False, repr=False, compare=False)
    dcoef: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m = check_exponent(self.m)
        if int(self.n_reg) != self.n_reg or self.n_reg < 1:
            raise ValueError(f"n_reg must be a positive integer, got {self.n_reg}")
        c = default_core_slope(m) if self.c_lin is None else float(self.c_lin)
        if not c > 0.0:
            raise ValueError(f"c_lin must be positive, got {c}")
        blend = _blend(m, c)
        if not _min_on_blend(blend.deriv()) > 0.0:
            raise ValueError(f"c_lin={c} gives a non-monotone blend for m={m}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "n_reg", int(self.n_reg))
        object.__setattr__(self, "c_lin", c)
        object.__setattr__(self, "coef", blend.coef.copy())
        object.__setattr__(self, "dcoef", blend.deriv().coef.copy())

    @property
    def blend(self) -> Polynomial:
        return Polynomial(self.coef)

    def is_convex(self) -> bool:
        """True when ``phi_n`` is convex on ``s >= 0``."""
        return _min_on_blend(self.blend.deriv(2)) >= -1e-12

    def kernel_args(self):
        return self.m, self.n_reg, self.c_lin, self.coef, self.dcoef


def phi_reg(s, r: RegularizedPhi):
    return phi_vec(s, r.m, r.n_reg, r.c_lin, r.coef)


def phi_reg_prime(s, r: RegularizedPhi):
    return phi_prime_vec(s, r.m, r.n_reg, r.c_lin, r.dcoef)


def phi_reg_primitive(s, r: RegularizedPhi):
    """``Psi_n(s) = int_0^s phi_n``, in closed form."""
    m, n, c = r.m, r.n_reg, r.c_lin
    big = r.blend.integ(lbnd=0.5)
    core_total = c / 8.0
    blend_total = float(big(1.0))
    a = n * np.abs(np.asarray(s, dtype=float))
    inner = np.where(
        a <= 0.5,
        0.5 * c * a**2,
        np.where(
            a < 1.0,
            core_total + big(np.clip(a, 0.5, 1.0)),
            core_total + blend_total + (np.maximum(a, 1.0) ** (m + 1.0) - 1.0) / (m + 1.0),
        ),
    )
    return n ** (-m - 1.0) * inner
