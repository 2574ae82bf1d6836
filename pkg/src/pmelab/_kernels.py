"""
Hot inner loops of the implicit PME solver.

Two interchangeable implementations are provided for the per-time-level
nonlinear solve:

* a loop implementation compiled with ``numba.njit`` (default), and
* a vectorized pure-numpy implementation (``scipy.linalg.solve_banded``
  for the tridiagonal Newton systems).

Set ``PMELAB_DISABLE_NUMBA=1`` to force the numpy path. Both paths run the
same algorithm and agree to the Newton tolerance; ``benchmarks/`` compares
their speed.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.linalg import solve_banded

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("PMELAB_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")

# status codes returned by the level solvers
CONVERGED = 0
CONVERGED_FALLBACK = 1
FAILED = 2


def _jit(func):
    if numba is None:
        return func
    return numba.njit(cache=True)(func)


# ---------------------------------------------------------------------------
# scalar nonlinearity (loop path)
# ---------------------------------------------------------------------------


def _phi1_abs(a, m, c, coef):
    if a <= 0.5:
        return c * a
    if a < 1.0:
        v = 0.0
        for j in range(coef.size - 1, -1, -1):
            v = v * a + coef[j]
        return v
    return a**m


def _phi1_prime_abs(a, m, c, dcoef):
    if a <= 0.5:
        return c
    if a < 1.0:
        v = 0.0
        for j in range(dcoef.size - 1, -1, -1):
            v = v * a + dcoef[j]
        return v
    return m * a ** (m - 1.0)


def _phi_scalar(s, m, n_reg, c, coef):
    a = abs(s)
    if n_reg == 0:
        v = a**m
    else:
        v = n_reg ** (-m) * _phi1_abs_j(n_reg * a, m, c, coef)
    return v if s >= 0.0 else -v


def _phi_prime_scalar(s, m, n_reg, c, dcoef):
    a = abs(s)
    if n_reg == 0:
        return m * a ** (m - 1.0)
    return n_reg ** (1.0 - m) * _phi1_prime_abs_j(n_reg * a, m, c, dcoef)


_phi1_abs_j = _jit(_phi1_abs)
_phi1_prime_abs_j = _jit(_phi1_prime_abs)
phi_scalar = _jit(_phi_scalar)
phi_prime_scalar = _jit(_phi_prime_scalar)


# ---------------------------------------------------------------------------
# vectorized nonlinearity (numpy path)
# ---------------------------------------------------------------------------


def phi_vec(s, m, n_reg, c, coef):
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    if n_reg == 0:
        return np.sign(s) * a**m
    r = n_reg * a
    core = c * r
    blend = np.polynomial.polynomial.polyval(np.clip(r, 0.5, 1.0), coef)
    outer = np.maximum(r, 1.0) ** m
    v = np.where(r <= 0.5, core, np.where(r < 1.0, blend, outer))
    return np.sign(s) * n_reg ** (-m) * v


def phi_prime_vec(s, m, n_reg, c, dcoef):
    a = np.abs(np.asarray(s, dtype=float))
    if n_reg == 0:
        return m * a ** (m - 1.0)
    r = n_reg * a
    blend = np.polynomial.polynomial.polyval(np.clip(r, 0.5, 1.0), dcoef)
    outer = m * np.maximum(r, 1.0) ** (m - 1.0)
    v = np.where(r <= 0.5, c, np.where(r < 1.0, blend, outer))
    return n_reg ** (1.0 - m) * v


# ---------------------------------------------------------------------------
# loop implementation of one implicit level
# ---------------------------------------------------------------------------


def _merit(u, uo, psi, lam, p, out):
    # out[i] = min(u_i - psi_i, R_i) on interior nodes; returns its sup norm
    n = u.size
    err = 0.0
    for i in range(1, n - 1):
        r = u[i] - uo[i] - lam * (p[i + 1] - 2.0 * p[i] + p[i - 1])
        g = u[i] - psi[i]
        v = r if r < g else g
        out[i] = v
        if abs(v) > err:
            err = abs(v)
    return err


def _bisect_node(i, u, uo, psi, lam, p, m, n_reg, c, coef, lo, hi):
    # solve min(x - psi_i, x - uo_i - lam*(p_{i+1} - 2 phi(x) + p_{i-1})) = 0
    rest = uo[i] + lam * (p[i + 1] + p[i - 1])
    low = lo if lo > psi[i] else psi[i]
    f_low = low + 2.0 * lam * _phi_j(low, m, n_reg, c, coef) - rest
    if f_low >= 0.0:
        return low
    high = hi if hi > low else low + 1.0
    f_high = high + 2.0 * lam * _phi_j(high, m, n_reg, c, coef) - rest
    while f_high < 0.0:
        high = low + 2.0 * (high - low)
        f_high = high + 2.0 * lam * _phi_j(high, m, n_reg, c, coef) - rest
    for _ in range(200):
        mid = 0.5 * (low + high)
        if mid <= low or mid >= high:
            break
        f_mid = mid + 2.0 * lam * _phi_j(mid, m, n_reg, c, coef) - rest
        if f_mid < 0.0:
            low = mid
        else:
            high = mid
    return 0.5 * (low + high)


_phi_j = phi_scalar
_merit_j = _jit(_merit)
_bisect_node_j = _jit(_bisect_node)


def _solve_level_loop(
    uo, left, right, psi, lam, m, n_reg, c, coef, dcoef, lo, hi, tol, maxit, damping, sweeps
):
    n = uo.size
    u = uo.copy()
    u[0] = left
    u[n - 1] = right
    for i in range(1, n - 1):
        floor = lo if lo > psi[i] else psi[i]
        if u[i] < floor:
            u[i] = floor
        if u[i] > hi:
            u[i] = hi
    p = np.empty(n)
    dp = np.empty(n)
    for i in range(n):
        p[i] = _phi_j(u[i], m, n_reg, c, coef)
    g = np.zeros(n)
    lower = np.zeros(n)
    diag = np.ones(n)
    upper = np.zeros(n)
    rhs = np.zeros(n)
    trial = np.empty(n)
    p_trial = np.empty(n)
    g_trial = np.zeros(n)
    err = _merit_j(u, uo, psi, lam, p, g)
    iters = 0
    while iters < maxit:
        if err <= tol:
            return u, iters, err, 0
        iters += 1
        for i in range(n):
            dp[i] = _phi_prime_j(u[i], m, n_reg, c, dcoef)
        # semismooth Newton rows: active rows pin u to psi
        for i in range(1, n - 1):
            r = u[i] - uo[i] - lam * (p[i + 1] - 2.0 * p[i] + p[i - 1])
            if u[i] - psi[i] <= r:
                lower[i] = 0.0
                diag[i] = 1.0
                upper[i] = 0.0
                rhs[i] = -(u[i] - psi[i])
            else:
                lower[i] = -lam * dp[i - 1] if i > 1 else 0.0
                diag[i] = 1.0 + 2.0 * lam * dp[i]
                upper[i] = -lam * dp[i + 1] if i < n - 2 else 0.0
                rhs[i] = -r
        # Thomas algorithm on rows 1..n-2
        for i in range(2, n - 1):
            w = lower[i] / diag[i - 1]
            diag[i] -= w * upper[i - 1]
            rhs[i] -= w * rhs[i - 1]
        rhs[n - 2] /= diag[n - 2]
        for i in range(n - 3, 0, -1):
            rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i]
        step = damping
        accepted = False
        for _ in range(30):
            trial[0] = u[0]
            trial[n - 1] = u[n - 1]
            for i in range(1, n - 1):
                v = u[i] + step * rhs[i]
                floor = lo if lo > psi[i] else psi[i]
                if v < floor:
                    v = floor
                if v > hi:
                    v = hi
                trial[i] = v
            for i in range(n):
                p_trial[i] = _phi_j(trial[i], m, n_reg, c, coef)
            err_trial = _merit_j(trial, uo, psi, lam, p_trial, g_trial)
            if err_trial < err or err_trial <= tol:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        for i in range(n):
            u[i] = trial[i]
            p[i] = p_trial[i]
        err = err_trial
    if err <= tol:
        return u, iters, err, 0
    # projected red-black nonlinear Gauss-Seidel, monotone and always convergent
    for sweep in range(sweeps):
        for color in range(2):
            for i in range(1 + color, n - 1, 2):
                u[i] = _bisect_node_j(i, u, uo, psi, lam, p, m, n_reg, c, coef, lo, hi)
                p[i] = _phi_j(u[i], m, n_reg, c, coef)
        iters += 1
        if sweep % 16 == 15:
            err = _merit_j(u, uo, psi, lam, p, g)
            if err <= tol:
                return u, iters, err, 1
    err = _merit_j(u, uo, psi, lam, p, g)
    return u, iters, err, 1 if err <= tol else 2


_phi_prime_j = phi_prime_scalar
_solve_level_loop_j = _jit(_solve_level_loop)


# ---------------------------------------------------------------------------
# numpy implementation of one implicit level
# ---------------------------------------------------------------------------


def _merit_np(u, uo, psi, lam, p):
    r = u[1:-1] - uo[1:-1] - lam * (p[2:] - 2.0 * p[1:-1] + p[:-2])
    return np.minimum(u[1:-1] - psi[1:-1], r), r


def _bisect_color_np(idx, u, uo, psi, lam, p, m, n_reg, c, coef, lo, hi):
    rest = uo[idx] + lam * (p[idx + 1] + p[idx - 1])
    low = np.maximum(lo, psi[idx])

    def f(x):
        return x + 2.0 * lam * phi_vec(x, m, n_reg, c, coef) - rest

    pinned = f(low) >= 0.0
    high = np.where(hi > low, hi, low + 1.0)
    f_high = f(high)
    while np.any(f_high < 0.0):
        high = np.where(f_high < 0.0, low + 2.0 * (high - low), high)
        f_high = f(high)
    for _ in range(200):
        mid = 0.5 * (low + high)
        if np.all((mid <= low) | (mid >= high)):
            break
        neg = f(mid) < 0.0
        low = np.where(neg, mid, low)
        high = np.where(neg, high, mid)
    return np.where(pinned, np.maximum(lo, psi[idx]), 0.5 * (low + high))


def _solve_level_numpy(
    uo, left, right, psi, lam, m, n_reg, c, coef, dcoef, lo, hi, tol, maxit, damping, sweeps
):
    n = uo.size
    floor = np.maximum(lo, psi)
    u = uo.copy()
    u[0] = left
    u[-1] = right
    u[1:-1] = np.clip(u[1:-1], floor[1:-1], hi)
    p = phi_vec(u, m, n_reg, c, coef)
    g, r = _merit_np(u, uo, psi, lam, p)
    err = float(np.max(np.abs(g))) if g.size else 0.0
    iters = 0
    ab = np.zeros((3, n - 2))
    while iters < maxit:
        if err <= tol:
            return u, iters, err, CONVERGED
        iters += 1
        dp = phi_prime_vec(u, m, n_reg, c, dcoef)
        active = (u[1:-1] - psi[1:-1]) <= r
        ab[1] = np.where(active, 1.0, 1.0 + 2.0 * lam * dp[1:-1])
        # ab[0, j] multiplies x[j] in row j-1; ab[2, j] multiplies x[j] in row j+1
        ab[0, 1:] = np.where(active[:-1], 0.0, -lam * dp[2:-1])
        ab[2, :-1] = np.where(active[1:], 0.0, -lam * dp[1:-2])
        rhs = np.where(active, -(u[1:-1] - psi[1:-1]), -r)
        delta = solve_banded((1, 1), ab, rhs) if n > 3 else rhs / ab[1]
        step = damping
        accepted = False
        for _ in range(30):
            trial = u.copy()
            trial[1:-1] = np.clip(u[1:-1] + step * delta, floor[1:-1], hi)
            p_trial = phi_vec(trial, m, n_reg, c, coef)
            g_trial, r_trial = _merit_np(trial, uo, psi, lam, p_trial)
            err_trial = float(np.max(np.abs(g_trial)))
            if err_trial < err or err_trial <= tol:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        u, p, r, err = trial, p_trial, r_trial, err_trial
    if err <= tol:
        return u, iters, err, CONVERGED
    odd = np.arange(1, n - 1, 2)
    even = np.arange(2, n - 1, 2)
    for sweep in range(sweeps):
        for idx in (odd, even):
            if idx.size:
                u[idx] = _bisect_color_np(idx, u, uo, psi, lam, p, m, n_reg, c, coef, lo, hi)
                p[idx] = phi_vec(u[idx], m, n_reg, c, coef)
        iters += 1
        if sweep % 16 == 15:
            g, _ = _merit_np(u, uo, psi, lam, p)
            err = float(np.max(np.abs(g)))
            if err <= tol:
                return u, iters, err, CONVERGED_FALLBACK
    g, _ = _merit_np(u, uo, psi, lam, p)
    err = float(np.max(np.abs(g)))
    return u, iters, err, CONVERGED_FALLBACK if err <= tol else FAILED


def solve_level(
    uo, left, right, psi, lam, m, n_reg, c, coef, dcoef, lo, hi, tol, maxit, damping, sweeps,
    use_numba=None,
):
    """Advance one implicit Euler level of ``u_t = (phi(u))_xx``.

    Solves ``min(u - psi, u - uo - lam * D2 phi(u)) = 0`` at interior nodes
    with Dirichlet values ``left``/``right``. Pass ``psi = -inf`` for the
    unconstrained problem. Returns ``(u, iterations, residual, status)``.
    """
    if use_numba is None:
        use_numba = USE_NUMBA
    args = (
        np.ascontiguousarray(uo, dtype=float),
        float(left),
        float(right),
        np.ascontiguousarray(psi, dtype=float),
        float(lam),
        float(m),
        int(n_reg),
        float(c),
        np.ascontiguousarray(coef, dtype=float),
        np.ascontiguousarray(dcoef, dtype=float),
        float(lo),
        float(hi),
        float(tol),
        int(maxit),
        float(damping),
        int(sweeps),
    )
    if use_numba and numba is not None:
        return _solve_level_loop_j(*args)
    return _solve_level_numpy(*args)
