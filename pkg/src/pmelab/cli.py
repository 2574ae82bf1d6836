"""
Command-line experiment runner.

Usage::

    pmelab list
    pmelab run config.yaml [--output-dir DIR] [--seed N] [--verbose]

A config is a YAML mapping::

    scenario: equivalence_suite     # required, see ``pmelab list``
    m: 2.0
    seed: 0
    regularization: 0               # n_reg; 0 = exact nonlinearity
    output_dir: runs/equivalence
    solver: {newton_tol: 1.0e-10, max_newton: 50, damping: 1.0}
    grid: {...}                     # scenario-specific, see README
    tolerances: {...}               # scenario-specific, see README

Unknown keys anywhere are rejected. Exit codes: 0 all assertions pass,
1 an assertion failed, 2 bad config, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from . import experiments as ex
from .exact import lambda_exponent
from .schwarz import SchwarzError
from .solver import SolverConfig, SolverDivergence

log = logging.getLogger("pmelab")

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# -- artifact writing ---------------------------------------------------------


class ArtifactWriter:
    """Single writer for all scenario outputs; records a sha256 per file."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def text(self, name: str, content: str) -> None:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode()
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")

    def table(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
        self.text(name, buf.getvalue())

    def manifest(self) -> None:
        entries = [{"file": k, "sha256": v} for k, v in sorted(self.files.items())]
        text = json.dumps({"files": entries}, indent=2) + "\n"
        (self.root / "manifest.json").write_text(text)


def _plain(obj):
    """Recursively convert numpy scalars and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


@dataclass
class Context:
    cfg: SolverConfig
    grid: dict
    tol: dict
    seed: int
    out: ArtifactWriter
    checks: list = field(default_factory=list)

    def check(self, name: str, ok: bool, **detail) -> None:
        self.checks.append({"assertion": name, "passed": bool(ok), **detail})
        log.info("%s %s", "PASS" if ok else "FAIL", name)


# -- scenarios ------------------------------------------------------------------


def _barenblatt_validation(ctx: Context) -> None:
    g, tol = ctx.grid, ctx.tol
    if len(g["h"]) != len(g["tau"]):
        raise ConfigError("grid.tau: must have the same length as grid.h")
    rows = []
    for h, tau in zip(g["h"], g["tau"]):
        r, u = ex.barenblatt_run(h, tau, ctx.cfg, g["C"], g["half_width"], g["t_start"], g["t_end"])
        rows.append(r)
        final = [(x, u.cylinder.t[-1], v) for x, v in zip(u.cylinder.x, u.values[-1])]
        ctx.out.table(f"profile_h{h:g}.csv", ["x", "t", "u"], final)
    ctx.out.table(
        "error_table.csv",
        ["h", "tau", "l1_rel_error", "mass_rel_drift", "lambda"],
        [[r["h"], r["tau"], r["l1_rel_error"], r["mass_rel_drift"], r["lambda"]] for r in rows],
    )
    errs = [r["l1_rel_error"] for r in rows]
    ctx.check("l1_error_within_tolerance", max(errs) <= tol["l1_error"], errors=errs)
    ctx.check("l1_error_decreases", all(b < a for a, b in zip(errs, errs[1:])), errors=errs)
    drift = max(r["mass_rel_drift"] for r in rows)
    ctx.check("mass_conserved", drift <= tol["mass_drift"], drift=drift)
    lam = lambda_exponent(ctx.cfg.m, 1)
    ctx.check("lambda_exact", lam == 1.0 / (ctx.cfg.m + 1.0), value=lam)


def _comparison_sweep(ctx: Context) -> None:
    g, tol = ctx.grid, ctx.tol
    rows, (lo, hi) = ex.comparison_sweep(g["n_pairs"], g["n_nodes"], ctx.seed, g["t_end"], ctx.cfg)
    ctx.out.table("pairs.csv", ["pair", "worst_breach"], [[r["pair"], r["worst_breach"]] for r in rows])
    ctx.out.text("pair0_lower.csv", lo.to_csv())
    ctx.out.text("pair0_upper.csv", hi.to_csv())
    worst = max(r["worst_breach"] for r in rows)
    ctx.check("ordering_preserved", worst <= tol["order_factor"] * ctx.cfg.newton_tol, worst_breach=worst)
    reg = ex.regularization_consistency(g["reg_nodes"], g["reg_t_end"], ctx.cfg, tuple(g["reg_levels"]))
    ctx.out.json("regularization.json", reg)
    ctx.check("positive_data_regularization_agrees", reg["positive_max_diff"] <= ctx.cfg.newton_tol, diff=reg["positive_max_diff"])
    ctx.check("signed_data_cauchy", max(reg["cauchy_ratios"]) <= tol["cauchy_ratio"], ratios=reg["cauchy_ratios"])


def _perturbation_gap(ctx: Context) -> None:
    g, tol = ctx.grid, ctx.tol
    rows = ex.perturbation_study(tuple((n, n) for n in g["cells"]), tuple(g["eps"]), ctx.cfg)
    ctx.out.table("gap_table.csv", ["h", "tau", "eps", "lhs", "rhs", "slack_C"], [[r[k] for k in ("h", "tau", "eps", "lhs", "rhs", "slack_C")] for r in rows])
    for eps in g["eps"]:
        slack = [r["slack_C"] for r in rows if r["eps"] == eps]
        stable = max(slack) == 0.0 or (min(slack) > 0 and max(slack) / min(slack) <= tol["slack_ratio"])
        ctx.check(f"slack_stable_eps{eps:g}", stable, slack=slack)
    for name in g["perron_data"]:
        if name not in ex.PERRON_DATA:
            raise ConfigError(f"grid.perron_data: unknown data set {name!r}")
        r, ladder = ex.perron_study(name, g["perron_cells"], g["perron_cells"], g["j_max"], g["points"], ctx.cfg)
        ctx.out.text(f"ladder_{name}.csv", ladder.to_csv())
        ctx.out.text(f"solution_{name}.csv", ladder.direct.to_csv())
        ctx.out.json(f"attainment_{name}.json", r["attainment"])
        order_tol = tol["order_factor"] * ctx.cfg.newton_tol
        ctx.check(f"ladder_sandwich_{name}", r["sandwich_violation"] <= order_tol, value=r["sandwich_violation"])
        ctx.check(f"ladder_monotone_{name}", r["monotone_violation"] <= order_tol, value=r["monotone_violation"])
        gaps = r["gaps"]
        ctx.check(f"ladder_gap_{name}", gaps[-1] <= tol["ladder_gap"], final_gap=gaps[-1], final_eps=r["eps"][-1])
        devs = [a["deviations"] for a in r["attainment"]]
        ctx.check(f"attainment_monotone_{name}", all(d[0] >= d[1] >= d[2] for d in devs))


def _schwarz_union(ctx: Context) -> None:
    tol = ctx.tol
    r, result = ex.schwarz_study(tol["sweep_tol"], tol["max_sweeps"], ctx.cfg)
    ctx.out.text("solution.csv", result.solution.to_csv())
    ctx.out.text("history.json", result.to_json() + "\n")
    ctx.out.json("summary.json", r)
    ctx.check("converged", r["converged"] and r["sweeps"] <= tol["max_sweeps"], sweeps=r["sweeps"])
    ctx.check("iterates_nondecreasing", r["monotonicity_violations"] == 0)
    ctx.check("sup_change_decreasing", r["changes_decreasing"])
    ctx.check("matches_direct_solve", r["max_diff_direct"] <= tol["direct_factor"] * tol["sweep_tol"], diff=r["max_diff_direct"])


def _obstacle_demo(ctx: Context) -> None:
    tol = ctx.tol
    r, sols = ex.obstacle_study(ctx.grid["n_nodes"], ctx.cfg, tol["complementarity"])
    for j, w in enumerate(sols, start=1):
        ctx.out.text(f"obstacle_{j}.csv", w.to_csv())
    ctx.out.json("checks.json", r)
    ctx.check("obstacles_increasing", min(r["obstacle_increments"]) > 0)
    ctx.check("solutions_ordered", max(r["order_breach"]) <= tol["complementarity"])
    for j, c in enumerate(r["checks"], start=1):
        ctx.check(f"above_obstacle_{j}", c["min_gap"] >= -tol["complementarity"])
        ctx.check(f"supersolution_{j}", c["min_residual"] >= -ctx.cfg.newton_tol, value=c["min_residual"])
        ctx.check(f"solves_off_contact_{j}", c["max_residual_off_contact"] <= tol["complementarity"], value=c["max_residual_off_contact"])
    ctx.check("brute_force_oracle", r["oracle_max_diff"] <= tol["oracle"], diff=r["oracle_max_diff"])


def _equivalence_suite(ctx: Context) -> None:
    rows = ex.equivalence_suite(ctx.grid["n_nodes"], ctx.seed, ctx.cfg)
    summary = []
    for r in rows:
        ctx.out.text(f"reports/{r['name']}.json", r["report"].to_json() + "\n")
        ctx.out.text(f"corpus/{r['name']}.csv", r["solution"].to_csv())
        if r["refined"] is not None:
            ctx.out.text(f"reports/{r['name']}_refined.json", r["refined"].to_json() + "\n")
        v = r["report"].verdicts
        summary.append([r["name"], r["kind"], *map(int, v), int(r["report"].unanimous), "" if r["refined"] is None else int(r["refined"].unanimous)])
    ctx.out.table("summary.csv", ["name", "kind", "weak", "very_weak", "superporous", "unanimous", "refined_unanimous"], summary)
    agree = sum(r["report"].unanimous for r in rows) / len(rows)
    ctx.check("corpus_size", len(rows) >= 20, size=len(rows))
    ctx.check("agreement_rate", agree >= ctx.tol["agreement"], rate=agree)
    ctx.check("disagreements_resolved", all(r["refined"].unanimous for r in rows if r["refined"] is not None))
    for r in rows:
        if r["kind"] == "negative_control":
            ctx.check(f"control_rejected_{r['name']}", not any(r["report"].verdicts))


def _caccioppoli_suite(ctx: Context) -> None:
    g = ctx.grid
    rows, blowup = ex.caccioppoli_suite(g["n_nodes"], ctx.seed, ctx.cfg, tuple(g["refinements"]), tuple(g["radii"]))
    ctx.out.table("caccioppoli.csv", ["name", "lhs", "rhs", "pass"], [[r["name"], r["lhs"], r["rhs"], int(r["pass"])] for r in rows])
    ctx.out.table(
        "blowup.csv", ["radius", "n_cells", "lhs"], [[b["radius"], n, v] for b in blowup for n, v in zip(b["resolutions"], b["lhs"])]
    )
    ctx.check("energy_bound_holds", all(r["pass"] for r in rows), count=len(rows))
    for b in blowup:
        growth = [y / x for x, y in zip(b["lhs"], b["lhs"][1:])]
        ctx.check(f"energy_diverges_r{b['radius']:g}", min(growth) >= ctx.tol["min_growth"], growth=growth)


@dataclass(frozen=True)
class Scenario:
    description: str
    run: Callable[[Context], None]
    grid: dict
    tolerances: dict


SCENARIOS: dict[str, Scenario] = {
    "barenblatt_validation": Scenario(
        "Barenblatt refinement study: L1 error, mass drift and the self-similarity exponent",
        _barenblatt_validation,
        {"half_width": 6.0, "t_start": 1.0, "t_end": 2.0, "C": 1.0, "h": [0.02, 0.01], "tau": [5e-4, 2.5e-4]},
        {"l1_error": 0.03, "mass_drift": 1e-6},
    ),
    "comparison_sweep": Scenario(
        "Randomized ordered data pairs keep their order; regularized solves converge",
        _comparison_sweep,
        {"n_pairs": 50, "n_nodes": 64, "t_end": 0.25, "reg_nodes": 64, "reg_t_end": 0.5, "reg_levels": [4, 16, 64, 256]},
        {"order_factor": 10.0, "cauchy_ratio": 0.7},
    ),
    "perturbation_gap": Scenario(
        "Gap under lifted data vs. its bound; monotone ladders and boundary attainment",
        _perturbation_gap,
        {"cells": [100, 200], "eps": [0.1, 0.01, 0.001], "perron_data": ["hump", "oscillating", "barenblatt"], "perron_cells": 64, "j_max": 10, "points": 10},
        {"slack_ratio": 2.0, "ladder_gap": 1e-3, "order_factor": 10.0},
    ),
    "schwarz_union": Scenario(
        "Alternating method on three overlapping cylinders vs. the direct solve",
        _schwarz_union,
        {},
        {"sweep_tol": 1e-6, "max_sweeps": 50, "direct_factor": 10.0},
    ),
    "obstacle_demo": Scenario(
        "Obstacle ladder: ordering, complementarity and a brute-force oracle",
        _obstacle_demo,
        {"n_nodes": 32},
        {"complementarity": 1e-9, "oracle": 1e-10},
    ),
    "equivalence_suite": Scenario(
        "Three-way supersolution classification of a seeded corpus",
        _equivalence_suite,
        {"n_nodes": 129},
        {"agreement": 0.95},
    ),
    "caccioppoli_suite": Scenario(
        "Energy estimate on the corpus; gradient-energy blow-up of the Barenblatt solution",
        _caccioppoli_suite,
        {"n_nodes": 129, "refinements": [32, 64, 128, 256], "radii": [1.0, 0.5, 0.25]},
        {"min_growth": 1.5},
    ),
}


# -- configuration ----------------------------------------------------------------

TOP_LEVEL = {"scenario", "m", "seed", "regularization", "output_dir", "solver", "grid", "tolerances"}
SOLVER_KEYS = {"newton_tol", "max_newton", "damping", "c_lin", "fallback_sweeps"}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    m: float = 2.0
    seed: int = 0
    regularization: int = 0
    output_dir: str = "pmelab-output"
    solver: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(m=self.m, n_reg=self.regularization, **self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"solver: {exc}") from exc


def _merge(section: str, given, defaults: dict) -> dict:
    if given is None:
        given = {}
    if not isinstance(given, dict):
        raise ConfigError(f"{section}: expected a mapping")
    for key in given:
        if key not in defaults:
            raise ConfigError(f"{section}.{key}: unknown key")
    merged = dict(defaults)
    for key, value in given.items():
        default = defaults[key]
        if isinstance(default, list):
            if not isinstance(value, list) or not value or not all(_same_kind(default[0], v) for v in value):
                raise ConfigError(f"{section}.{key}: expected a non-empty list like {default}")
        elif not _same_kind(default, value):
            raise ConfigError(f"{section}.{key}: expected a value like {default!r}")
        merged[key] = value
    return merged


def _same_kind(default, value) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(default, int):
        return isinstance(value, int)
    if isinstance(default, float):
        return isinstance(value, (int, float))
    return isinstance(value, type(default))


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate YAML config text; raises :class:`ConfigError`."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "<document>"
        raise ConfigError(f"{where}: not valid YAML ({getattr(exc, 'problem', None) or exc.__class__.__name__})") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<document>: top level must be a mapping")
    for key in raw:
        if key not in TOP_LEVEL:
            raise ConfigError(f"{key}: unknown key")
    name = raw.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {name!r}")
    scenario_def = SCENARIOS[name]
    solver = raw.get("solver") or {}
    if not isinstance(solver, dict):
        raise ConfigError("solver: expected a mapping")
    for key in solver:
        if key not in SOLVER_KEYS:
            raise ConfigError(f"solver.{key}: unknown key")
    for key, kind in (("m", (int, float)), ("seed", int), ("regularization", int), ("output_dir", str)):
        if key in raw and (not isinstance(raw[key], kind) or isinstance(raw[key], bool)):
            raise ConfigError(f"{key}: wrong type")
    cfg = ExperimentConfig(
        scenario=name,
        m=float(raw.get("m", 2.0)),
        seed=raw.get("seed", 0),
        regularization=raw.get("regularization", 0),
        output_dir=raw.get("output_dir", "pmelab-output"),
        solver=dict(solver),
        grid=_merge("grid", raw.get("grid"), scenario_def.grid),
        tolerances=_merge("tolerances", raw.get("tolerances"), scenario_def.tolerances),
    )
    cfg.solver_config()
    return cfg


def list_scenarios() -> str:
    return "".join(f"{name:24s}{s.description}\n" for name, s in SCENARIOS.items())


def run(cfg: ExperimentConfig, output_dir: str | None = None) -> int:
    out = ArtifactWriter(Path(output_dir or cfg.output_dir))
    ctx = Context(cfg.solver_config(), cfg.grid, cfg.tolerances, cfg.seed, out)
    try:
        SCENARIOS[cfg.scenario].run(ctx)
    except (SolverDivergence, SchwarzError) as exc:
        log.error("solver failure: %s", exc)
        out.json("verdict.json", {"scenario": cfg.scenario, "passed": False, "solver_failure": str(exc), "assertions": ctx.checks})
        out.manifest()
        return EXIT_SOLVER
    passed = all(c["passed"] for c in ctx.checks)
    out.json("verdict.json", {"scenario": cfg.scenario, "passed": passed, "assertions": ctx.checks})
    out.manifest()
    return EXIT_OK if passed else EXIT_ASSERT


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pmelab", description="Porous medium equation experiment runner")
    parser.add_argument("--verbose", "-v", action="store_true", help="log each assertion")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list scenarios")
    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config", help="YAML config file")
    p_run.add_argument("--output-dir", help="override the config's output_dir")
    p_run.add_argument("--seed", type=int, help="override the config's seed")
    p_run.add_argument("--verbose", "-v", action="store_true", dest="verbose_run", help="log each assertion")
    args = parser.parse_args(argv)
    verbose = args.verbose or getattr(args, "verbose_run", False)
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "list":
        sys.stdout.write(list_scenarios())
        return EXIT_OK
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        status = run(cfg, args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{cfg.scenario}: {'PASS' if status == EXIT_OK else 'FAIL'} (exit {status})")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
