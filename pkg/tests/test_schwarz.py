import json

import numpy as np
import pytest

from pmelab.domain import CylinderUnion, IndexBox, build_cylinder
from pmelab.exact import BarenblattParams, barenblatt
from pmelab.gridfunction import GridFunction
from pmelab.schwarz import (
    SchwarzError,
    SchwarzState,
    initial_subsolution,
    schwarz_solve,
    schwarz_sweep,
    union_boundary_values,
)
from pmelab.solver import BoundaryData, SolverConfig, scheme_residual, solve_bvp, solve_union

CFG = SolverConfig()
BAR = BarenblattParams(2.0)


def bar_trace(x, t):
    return barenblatt(x, t + 1.0, BAR)


def wavy(x, t):
    return 0.6 + 0.3 * np.sin(np.pi * x) * np.exp(-t) + 0.2 * x * np.cos(3 * t)


@pytest.fixture
def pair():
    amb = build_cylinder(-4, 4, 0, 0.5, 40, 20)
    return CylinderUnion(amb, (IndexBox(0, 24, 0, 20), IndexBox(16, 40, 0, 20)))


@pytest.fixture
def staggered():
    amb = build_cylinder(0, 1, 0, 0.3, 30, 24)
    return CylinderUnion(amb, (IndexBox(0, 16, 0, 12), IndexBox(8, 24, 6, 18), IndexBox(14, 30, 12, 24)))


class TestInitialSubsolution:
    def test_constant_data(self, pair):
        v = initial_subsolution(pair, union_boundary_values(pair, lambda x, t: 0.7 + 0 * x))
        np.testing.assert_allclose(v.values[pair.closure_mask], 0.7)
        np.testing.assert_allclose(np.nan_to_num(scheme_residual(v, CFG)), 0.0, atol=1e-14)

    @pytest.mark.parametrize("f", [bar_trace, wavy])
    def test_residual_non_positive(self, staggered, f):
        v = initial_subsolution(staggered, union_boundary_values(staggered, f))
        r = scheme_residual(v, CFG)
        assert np.nanmax(r) <= 1e-14

    def test_below_solution(self, staggered):
        bv = union_boundary_values(staggered, wavy)
        v = initial_subsolution(staggered, bv)
        u = solve_union(staggered, bv, CFG)
        mask = staggered.closure_mask
        assert np.all(v.values[mask] <= u.values[mask] + 1e-12)

    def test_rejects_missing_boundary(self, pair):
        bv = union_boundary_values(pair, wavy)
        bv[0, 3] = np.nan
        with pytest.raises(ValueError):
            initial_subsolution(pair, bv)


class TestSweep:
    def test_single_member_one_sweep(self):
        amb = build_cylinder(0, 1, 0, 0.25, 20, 20)
        k = CylinderUnion(amb, (amb.box(),))
        bv = union_boundary_values(k, wavy)
        state = SchwarzState(k, initial_subsolution(k, bv).values)
        s1 = schwarz_sweep(state, CFG)
        direct, _ = solve_bvp(amb, BoundaryData.from_function(amb, wavy, 2.0), CFG)
        np.testing.assert_allclose(s1.values, direct.values, atol=1e-12)
        s2 = schwarz_sweep(s1, CFG)
        assert s2.history[-1]["sup_change"] <= 1e-12
        assert state.sweep == 0 and s2.sweep == 2  # states are not mutated

    def test_constant_fixed_point(self, pair):
        bv = union_boundary_values(pair, lambda x, t: 0.4 + 0 * x)
        s1 = schwarz_sweep(SchwarzState(pair, initial_subsolution(pair, bv).values), CFG)
        np.testing.assert_allclose(s1.values[pair.closure_mask], 0.4, atol=1e-13)

    def test_decrease_detected(self, pair):
        bv = union_boundary_values(pair, bar_trace)
        start = initial_subsolution(pair, bv).values.copy()
        start[pair.solve_mask] += 1.0  # a supersolution start: sweeps would decrease it
        with pytest.raises(SchwarzError, match="decreased"):
            schwarz_sweep(SchwarzState(pair, start), CFG)


class TestSolve:
    def test_barenblatt_pair(self, pair):
        res = schwarz_solve(pair, union_boundary_values(pair, bar_trace), CFG, sweep_tol=1e-8)
        changes = [h["sup_change"] for h in res.history]
        assert res.converged
        assert all(b < a for a, b in zip(changes, changes[1:]))
        direct, _ = solve_bvp(pair.ambient, BoundaryData.from_function(pair.ambient, bar_trace, 2.0), CFG)
        assert np.max(np.abs(res.solution.values - direct.values)) <= 10 * 1e-8

    def test_staggered_matches_slab_solve(self, staggered):
        bv = union_boundary_values(staggered, wavy)
        res = schwarz_solve(staggered, bv, CFG, sweep_tol=1e-9, max_sweeps=100)
        slab = solve_union(staggered, bv, CFG)
        mask = staggered.closure_mask
        assert res.converged
        np.testing.assert_allclose(res.solution.values[mask], slab.values[mask], atol=1e-8)
        assert np.all(np.isnan(res.solution.values[~mask]))

    def test_monotone_in_data(self, staggered):
        eps = 0.05
        base = schwarz_solve(staggered, union_boundary_values(staggered, wavy), CFG, 1e-9, 100).solution
        lifted = schwarz_solve(staggered, union_boundary_values(staggered, lambda x, t: wavy(x, t) + eps), CFG, 1e-9, 100).solution
        diff = (lifted.values - base.values)[staggered.closure_mask]
        assert diff.min() >= -1e-9
        assert diff.max() >= eps - 1e-12

    def test_not_converged_flag(self, pair):
        res = schwarz_solve(pair, union_boundary_values(pair, bar_trace), CFG, sweep_tol=1e-14, max_sweeps=2)
        assert not res.converged and len(res.history) == 2
        assert json.loads(res.to_json())["converged"] is False

    def test_start_iterate(self, pair):
        bv = union_boundary_values(pair, bar_trace)
        first = schwarz_solve(pair, bv, CFG, sweep_tol=1e-14, max_sweeps=3).solution
        res = schwarz_solve(pair, bv, CFG, sweep_tol=1e-8, start=first)
        assert res.converged
        assert isinstance(res.solution, GridFunction)
