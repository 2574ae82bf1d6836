"""
Reproducible numerical experiments: refinement studies, randomized
comparison sweeps, perturbation ladders, Schwarz runs, obstacle ladders
and the supersolution-equivalence corpus.

Functions here return plain metrics; verdicts are drawn by the callers
(CLI scenarios and the acceptance tests).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import optimize

from .classify import bump_cutoff, caccioppoli_check, classify
from .domain import CylinderUnion, IndexBox, build_cylinder
from .exact import BarenblattParams, barenblatt, lambda_exponent
from .gridfunction import GridFunction
from .nonlinearity import phi
from .perron import boundary_attainment, perron_ladder, perturbation_gap, sample_boundary_nodes
from .schwarz import schwarz_solve, union_boundary_values
from .solver import BoundaryData, SolverConfig, scheme_residual, solve_bvp, solve_obstacle, solve_signed, solve_union


def random_smooth(rng: np.random.Generator, base: float = 0.6, amp: float = 0.4, modes: int = 3) -> Callable:
    """Random positive trigonometric field ``f(x, t)`` on ``[0, 1] x [0, T]``.

    Values lie in ``[base - amp, base + amp]``.
    """
    a = rng.uniform(-1.0, 1.0, size=modes)
    a *= amp / max(np.sum(np.abs(a)), 1e-12)
    kx = rng.integers(1, 4, size=modes)
    kt = rng.uniform(0.0, 4.0, size=modes)
    ph = rng.uniform(0.0, 2 * np.pi, size=(2, modes))

    def f(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.full(np.broadcast(x, t).shape, base)
        for j in range(modes):
            out = out + a[j] * np.sin(kx[j] * np.pi * x + ph[0, j]) * np.cos(kt[j] * t + ph[1, j])
        return out

    return f


# -- Barenblatt refinement -------------------------------------------------


def barenblatt_run(h: float, tau: float, cfg: SolverConfig | None = None, C: float = 1.0, L: float = 6.0, t1: float = 1.0, t2: float = 2.0):
    cfg = cfg or SolverConfig()
    m = cfg.m
    p = BarenblattParams(m, 1, C)
    n_cells = int(round(2 * L / h))
    n_steps = int(round((t2 - t1) / tau))
    c = build_cylinder(-L, L, t1, t2, n_cells, n_steps)
    bd = BoundaryData.from_function(c, lambda x, t: barenblatt(x, t, p), m)
    u, rep = solve_bvp(c, bd, cfg)
    exact = barenblatt(c.x, t2, p)
    w = np.full(c.shape[1], c.h)
    w[[0, -1]] *= 0.5
    l1 = float(w @ np.abs(u.values[-1] - exact) / (w @ exact))
    drift = abs(rep.mass[-1] - rep.mass[0]) / rep.mass[0]
    return {
        "h": c.h,
        "tau": c.tau,
        "l1_rel_error": l1,
        "mass_rel_drift": float(drift),
        "lambda": lambda_exponent(m, 1),
        "max_newton": max(rep.newton_iterations),
    }, u


# -- comparison and regularization -----------------------------------------


def comparison_sweep(n_pairs: int = 50, n_nodes: int = 64, seed: int = 0, T: float = 0.25, cfg: SolverConfig | None = None):
    """Solve randomized ordered data pairs and record the worst ordering breach.

    Returns the per-pair rows and the first pair's two solutions.
    """
    cfg = cfg or SolverConfig(m=2.0)
    rng = np.random.default_rng(seed)
    c = build_cylinder(0.0, 1.0, 0.0, T, n_nodes - 1, n_nodes - 1)
    rows, first = [], None
    for j in range(n_pairs):
        f = random_smooth(rng)
        bump = random_smooth(rng, base=0.5, amp=0.5)
        lift = rng.uniform(0.0, 0.3)
        g = lambda x, t, f=f, bump=bump, lift=lift: f(x, t) + lift * bump(x, t)
        lo, _ = solve_bvp(c, BoundaryData.from_function(c, f, cfg.m), cfg)
        hi, _ = solve_bvp(c, BoundaryData.from_function(c, g, cfg.m), cfg)
        breach = float(np.max(lo.values - hi.values))
        rows.append({"pair": j, "worst_breach": breach})
        if first is None:
            first = (lo, hi)
    return rows, first


def regularization_consistency(n_nodes: int = 64, T: float = 0.5, cfg: SolverConfig | None = None, levels=(4, 16, 64, 256)):
    cfg = cfg or SolverConfig()
    m = cfg.m
    c = build_cylinder(-1.0, 1.0, 0.0, T, n_nodes - 1, n_nodes - 1)
    positive = BoundaryData.from_function(c, lambda x, t: 0.5 + 0.3 * np.sin(np.pi * x) + 0.1 * t, m)
    exact_phi, _ = solve_bvp(c, positive, replace(cfg, n_reg=0))
    reg, _ = solve_signed(c, positive, replace(cfg, n_reg=10**6))
    signed = BoundaryData.from_function(c, lambda x, t: 0.6 * np.sin(1.5 * np.pi * x) + 0.2 * x * (1 - t), m)
    sols = [solve_signed(c, signed, replace(cfg, n_reg=n))[0] for n in levels]
    diffs = [float(np.max(np.abs(a.values - b.values))) for a, b in zip(sols, sols[1:])]
    return {
        "n_reg": list(levels),
        "positive_max_diff": float(np.max(np.abs(exact_phi.values - reg.values))),
        "cauchy_diffs": diffs,
        "cauchy_ratios": [b / a for a, b in zip(diffs, diffs[1:])],
    }


# -- perturbation gap and Perron ladder -------------------------------------


def perturbation_study(grids=((100, 100), (200, 200)), eps_values=(0.1, 0.01, 0.001), cfg: SolverConfig | None = None):
    """Oleinik gap vs. its bound for Barenblatt-trace data on ``[-5, 5] x [1, 2]``."""
    cfg = cfg or SolverConfig()
    m = cfg.m
    p = BarenblattParams(m)
    rows = []
    for n_cells, n_steps in grids:
        c = build_cylinder(-5.0, 5.0, 1.0, 2.0, n_cells, n_steps)
        bd = BoundaryData.from_function(c, lambda x, t: barenblatt(x, t, p), m)
        u, _ = solve_bvp(c, bd, cfg)
        M = bd.sup()
        for eps in eps_values:
            u_eps, _ = solve_bvp(c, bd.shifted(eps), cfg)
            lhs, rhs = perturbation_gap(u, u_eps, eps, M, m)
            rows.append(
                {
                    "h": c.h,
                    "tau": c.tau,
                    "eps": eps,
                    "lhs": lhs,
                    "rhs": rhs,
                    "slack_C": max(lhs - rhs, 0.0) / (c.h + c.tau),
                }
            )
    return rows


PERRON_DATA = {
    "hump": ((0.0, 1.0, 0.0, 0.5), lambda x, t: 0.3 + 0.5 * np.sin(np.pi * x) * np.exp(-t)),
    "oscillating": ((0.0, 1.0, 0.0, 0.5), lambda x, t: 0.5 + 0.3 * np.sin(2 * np.pi * x) * np.cos(t) + 0.2 * t),
    "barenblatt": ((-5.0, 5.0, 1.0, 2.0), lambda x, t: barenblatt(x, t, BarenblattParams(2.0))),
}


def perron_study(name: str, n_cells: int = 64, n_steps: int = 64, j_max: int = 10, n_points: int = 10, cfg: SolverConfig | None = None):
    cfg = cfg or SolverConfig()
    m = cfg.m
    (a, b, t1, t2), f = PERRON_DATA[name]
    c = build_cylinder(a, b, t1, t2, n_cells, n_steps)
    bd = BoundaryData.from_function(c, lambda x, t: f(x, t) + 0 * x, m)
    ladder = perron_ladder(c, bd, [2.0**-j for j in range(1, j_max + 1)], cfg)
    attainment = []
    for xi in sample_boundary_nodes(c, n_points):
        devs = [boundary_attainment(ladder.direct, bd, xi, r * c.h) for r in (4, 2, 1)]
        attainment.append({"node": list(xi), "deviations": devs})
    return {
        "data": name,
        "eps": ladder.eps,
        "gaps": ladder.gaps,
        "sandwich_violation": max(ladder.sandwich_violation),
        "monotone_violation": ladder.monotone_violation(),
        "attainment": attainment,
    }, ladder


# -- Schwarz --------------------------------------------------------------


SCHWARZ_BOXES = ((0, 30, 0, 63), (16, 47, 0, 63), (33, 63, 0, 63))


def schwarz_study(sweep_tol: float = 1e-6, max_sweeps: int = 50, cfg: SolverConfig | None = None):
    """Three overlapping members tiling ``[0, 1] x [0, 1/4]`` on a 64 x 64 lattice."""
    amb = build_cylinder(0.0, 1.0, 0.0, 0.25, 63, 63)
    k = CylinderUnion(amb, tuple(IndexBox(*b) for b in SCHWARZ_BOXES))
    f = lambda x, t: 0.6 + 0.3 * np.sin(np.pi * x) * np.exp(-t) + 0.2 * x * np.cos(3 * t)
    cfg = cfg or SolverConfig()
    m = cfg.m
    bv = union_boundary_values(k, f)
    result = schwarz_solve(k, bv, cfg, sweep_tol, max_sweeps)
    direct, _ = solve_bvp(amb, BoundaryData.from_function(amb, f, m), cfg)
    changes = [h["sup_change"] for h in result.history]
    return {
        "converged": result.converged,
        "sweeps": len(result.history),
        "sup_changes": changes,
        "monotonicity_violations": sum(h["monotonicity_violations"] for h in result.history),
        "changes_decreasing": all(b < a for a, b in zip(changes, changes[1:])),
        "max_diff_direct": float(np.max(np.abs(result.solution.values - direct.values))),
        "slab_direct_diff": float(np.max(np.abs(solve_union(k, bv, cfg).values - direct.values))),
    }, result


# -- obstacle ---------------------------------------------------------------


def brute_force_obstacle(c, psi: np.ndarray, bd: BoundaryData, cfg: SolverConfig, tol: float = 1e-9) -> np.ndarray:
    """Obstacle solution by enumerating active sets level by level.

    For each candidate active set the inactive equations are solved with
    ``scipy.optimize.fsolve``; the unique candidate satisfying feasibility
    and complementarity is kept. Exponential cost: small lattices only.
    """
    lam = c.tau / c.h**2
    phi_ = cfg.phi
    u = np.empty(c.shape)
    u[0] = bd.u0
    left, right = bd.left_u, bd.right_u
    n = c.shape[1]
    interior = range(1, n - 1)
    for k in range(1, c.shape[0]):
        found = None
        for pattern in itertools.product((False, True), repeat=n - 2):
            active = dict(zip(interior, pattern))
            free = [i for i in interior if not active[i]]

            def assemble(z):
                v = np.empty(n)
                v[0], v[-1] = left[k], right[k]
                for i in interior:
                    v[i] = psi[k, i] if active[i] else 0.0
                v[free] = z
                return v

            def res(v):
                p = phi_(v)
                return v[1:-1] - u[k - 1, 1:-1] - lam * (p[2:] - 2 * p[1:-1] + p[:-2])

            if free:
                z0 = np.maximum(u[k - 1, free], psi[k, free])
                # convergence is judged by the residual check below, not by fsolve's flag
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    z = optimize.fsolve(lambda z: res(assemble(z))[np.array(free) - 1], z0, xtol=1e-14)
            else:
                z = np.array([])
            v = assemble(z)
            r = res(v)
            ok = all(v[i] >= psi[k, i] - tol for i in free) and all(r[i - 1] >= -tol for i in interior if active[i])
            ok = ok and all(abs(r[i - 1]) <= tol for i in free)
            if ok:
                found = v
                break
        if found is None:
            raise RuntimeError(f"no feasible active set at level {k}")
        u[k] = found
    return u


def obstacle_study(n_nodes: int = 32, cfg: SolverConfig | None = None, tol: float = 1e-9):
    c = build_cylinder(0.0, 1.0, 0.0, 0.2, n_nodes - 1, n_nodes - 1)
    cfg = cfg or SolverConfig()
    m = cfg.m
    bd = BoundaryData.from_function(c, lambda x, t: 0.3 + 0 * x, m)
    X, T = c.meshgrid()
    sols, psis = [], []
    for lift in (0.0, 0.05, 0.1):
        psi = 0.1 + lift + 0.5 * np.sin(np.pi * X) * np.minimum(T / 0.1, 1.0)
        w, _ = solve_obstacle(c, psi, bd, cfg)
        sols.append(w)
        psis.append(psi)
    checks = []
    for w, psi in zip(sols, psis):
        r = scheme_residual(w, cfg)
        interior = np.isfinite(r)
        off = interior & (w.values > psi + tol)
        checks.append(
            {
                "min_gap": float(np.min(w.values - psi)),
                "min_residual": float(np.min(r[interior])),
                "max_residual_off_contact": float(np.max(np.abs(r[off]))) if np.any(off) else 0.0,
                "contact_nodes": int(np.count_nonzero(interior & ~off)),
            }
        )
    order = [float(np.max(a.values - b.values)) for a, b in zip(sols, sols[1:])]
    psi_order = [float(np.min(b - a)) for a, b in zip(psis, psis[1:])]
    # small lattice against enumeration
    small = build_cylinder(0.0, 1.0, 0.0, 0.1, 5, 5)
    sbd = BoundaryData.from_function(small, lambda x, t: 0.3 + 0 * x, m)
    Xs, Ts = small.meshgrid()
    spsi = 0.2 + 0.5 * np.sin(np.pi * Xs) * np.minimum(Ts / 0.04, 1.0)
    ws, _ = solve_obstacle(small, spsi, sbd, replace(cfg, newton_tol=min(cfg.newton_tol, 1e-13)))
    oracle = brute_force_obstacle(small, spsi, sbd, cfg)
    return {
        "checks": checks,
        "order_breach": order,
        "obstacle_increments": psi_order,
        "oracle_max_diff": float(np.max(np.abs(ws.values - oracle))),
    }, sols


# -- equivalence corpus -------------------------------------------------------


@dataclass
class CorpusEntry:
    name: str
    kind: str
    make: Callable  # cylinder -> GridFunction

    @property
    def supersolution(self) -> bool:
        return self.kind != "negative_control"


def build_corpus(seed: int = 0, cfg: SolverConfig | None = None, n_solutions: int = 9, n_minima: int = 6, n_lifted: int = 5):
    """Deterministic corpus: solver outputs, minima of two solutions,
    solutions with lifted data, and two negative controls."""
    rng = np.random.default_rng(seed)
    cfg = cfg or SolverConfig()
    m = cfg.m
    fields = [random_smooth(rng) for _ in range(n_solutions)]

    def solution(f, lift=0.0):
        def make(c):
            return solve_bvp(c, BoundaryData.from_function(c, lambda x, t: f(x, t) + lift, m), cfg)[0]

        return make

    entries = [CorpusEntry(f"solution_{j}", "solution", solution(f)) for j, f in enumerate(fields)]
    pairs = [(j, (j + 1 + j // len(fields)) % len(fields)) for j in range(n_minima)]
    for a, b in pairs:
        fa, fb = fields[a], fields[b]

        def make(c, fa=fa, fb=fb):
            ua, ub = solution(fa)(c), solution(fb)(c)
            return ua.with_values(np.minimum(ua.values, ub.values))

        entries.append(CorpusEntry(f"min_{a}_{b}", "minimum", make))
    for j in range(n_lifted):
        eps = float(10.0 ** -(j % 3 + 1))
        entries.append(CorpusEntry(f"lifted_{j}_eps{eps:g}", "lifted", solution(fields[j], eps)))
    entries.append(CorpusEntry("control_abs", "negative_control", lambda c: GridFunction.from_function(c, lambda x, t: np.abs(2 * x - 1) + 0 * t)))
    entries.append(
        CorpusEntry("control_sqrt_abs", "negative_control", lambda c: GridFunction.from_function(c, lambda x, t: np.sqrt(np.abs(2 * x - 1)) + 0 * t))
    )
    return entries


def equivalence_suite(n_nodes: int = 129, seed: int = 0, cfg: SolverConfig | None = None):
    """Classify every corpus entry; re-test disagreements at half the mesh size."""
    cfg = cfg or SolverConfig()
    rows = []
    for entry in build_corpus(seed, cfg):
        c = build_cylinder(0.0, 1.0, 0.0, 1.0, n_nodes - 1, n_nodes - 1)
        u = entry.make(c)
        rep = classify(u, cfg)
        row = {"name": entry.name, "kind": entry.kind, "report": rep, "refined": None, "solution": u}
        if not rep.unanimous:
            fine = build_cylinder(0.0, 1.0, 0.0, 1.0, 2 * (n_nodes - 1), 2 * (n_nodes - 1))
            row["refined"] = classify(entry.make(fine), cfg)
        rows.append(row)
    return rows


def caccioppoli_suite(n_nodes: int = 129, seed: int = 0, cfg: SolverConfig | None = None, refinements=(32, 64, 128, 256), radii=(1.0, 0.5, 0.25)):
    cfg = cfg or SolverConfig()
    m = cfg.m
    rows = []
    zeta = bump_cutoff(0.5, 0.45)
    for entry in build_corpus(seed, cfg):
        if not entry.supersolution:
            continue
        c = build_cylinder(0.0, 1.0, 0.0, 1.0, n_nodes - 1, n_nodes - 1)
        u = entry.make(c)
        lhs, rhs, ok = caccioppoli_check(u, zeta, u.sup(), m)
        rows.append({"name": entry.name, "lhs": lhs, "rhs": rhs, "pass": ok})
    p = BarenblattParams(m)
    blowup = []
    for r in radii:
        lhs = []
        for n in refinements:
            c = build_cylinder(-1.0, 1.0, 0.0, 1.0, n, n)
            u = GridFunction.from_function(c, lambda x, t: barenblatt(x, t, p))
            lhs.append(caccioppoli_check(u, bump_cutoff(0.0, r), u.sup(), m)[0])
        blowup.append({"radius": r, "resolutions": list(refinements), "lhs": lhs})
    return rows, blowup
