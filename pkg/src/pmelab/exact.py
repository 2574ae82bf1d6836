"""
Closed-form reference solutions of ``u_t = Laplace(u^m)``: the Barenblatt
source solution and steady states with ``u^m`` affine in ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .nonlinearity import check_exponent

__all__ = [
    "BarenblattParams",
    "barenblatt",
    "barenblatt_mass",
    "barenblatt_profile",
    "lambda_exponent",
    "steady_state",
    "support_radius",
]


def lambda_exponent(m: float, n_dim: int) -> float:
    """Self-similarity exponent ``n / (n (m - 1) + 2)``."""
    m = check_exponent(m)
    if int(n_dim) != n_dim or n_dim < 1:
        raise ValueError(f"n_dim must be a positive integer, got {n_dim}")
    return n_dim / (n_dim * (m - 1.0) + 2.0)


@dataclass(frozen=True)
class BarenblattParams:
    m: float
    n_dim: int = 1
    C: float = 1.0

    def __post_init__(self):
        check_exponent(self.m)
        if not self.C > 0:
            raise ValueError(f"Barenblatt constant C must be positive, got {self.C}")
        lambda_exponent(self.m, self.n_dim)

    @property
    def lam(self) -> float:
        return lambda_exponent(self.m, self.n_dim)

    @property
    def k(self) -> float:
        """Coefficient of ``|x|^2 t^(-2 lam / n)`` inside the positive part."""
        return self.lam * (self.m - 1.0) / (2.0 * self.m * self.n_dim)


def _radius_sq(x, n_dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if n_dim == 1:
        return x**2
    if x.shape[-1] != n_dim:
        raise ValueError(f"points must have a trailing axis of length {n_dim}")
    return np.sum(x**2, axis=-1)


def barenblatt_profile(xi, p: BarenblattParams) -> np.ndarray:
    """Profile ``F`` with ``B(x, t) = t^-lam F(|x| t^(-lam/n))``."""
    xi = np.asarray(xi, dtype=float)
    return np.maximum(p.C - p.k * xi**2, 0.0) ** (1.0 / (p.m - 1.0))


def barenblatt(x, t, p: BarenblattParams) -> np.ndarray:
    """Barenblatt solution; zero for ``t <= 0``.

    For ``n_dim == 1`` ``x`` holds coordinates, otherwise points with a
    trailing axis of length ``n_dim``. ``x`` and ``t`` broadcast.
    """
    r2 = _radius_sq(x, p.n_dim)
    t = np.asarray(t, dtype=float)
    r2, t = np.broadcast_arrays(r2, t)
    out = np.zeros(r2.shape)
    pos = t > 0
    tp = t[pos]
    lam, n = p.lam, p.n_dim
    core = np.maximum(p.C - p.k * r2[pos] / tp ** (2.0 * lam / n), 0.0)
    out[pos] = tp ** (-lam) * core ** (1.0 / (p.m - 1.0))
    return out if out.ndim else float(out)


def support_radius(p: BarenblattParams, t: float) -> float:
    """Free-boundary radius ``sqrt(C / k) t^(lam/n)``."""
    if t <= 0:
        return 0.0
    return math.sqrt(p.C / p.k) * t ** (p.lam / p.n_dim)


def barenblatt_mass(p: BarenblattParams, t: float, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """Total mass of ``B(., t)`` by adaptive Gauss-Kronrod quadrature.

    The integration range is split at the free boundary, located
    analytically, so the kink in the integrand sits on an endpoint.
    """
    if not t > 0:
        raise ValueError(f"mass is defined for t > 0, got {t}")
    radius = support_radius(p, t)
    n = p.n_dim

    def radial(r):
        return float(barenblatt(r if n == 1 else np.array([r] + [0.0] * (n - 1)), t, p))

    if n == 1:
        half, _ = integrate.quad(radial, 0.0, radius, epsabs=epsabs, epsrel=epsrel, limit=200)
        return 2.0 * half
    sphere = 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
    val, _ = integrate.quad(lambda r: radial(r) * r ** (n - 1), 0.0, radius, epsabs=epsabs, epsrel=epsrel, limit=200)
    return sphere * val


def steady_state(a: float, b: float, m: float):
    """``(x, t) -> (a x + b)_+^(1/m)``: time independent, ``u^m`` affine where positive."""
    m = check_exponent(m)

    def u(x, t=None):
        return np.maximum(a * np.asarray(x, dtype=float) + b, 0.0) ** (1.0 / m)

    return u
