import numpy as np
import pytest

from pmelab.domain import build_cylinder, parabolic_boundary
from pmelab.exact import BarenblattParams, barenblatt
from pmelab.gridfunction import GridFunction
from pmelab.perron import (
    boundary_attainment,
    gap_bound,
    perron_ladder,
    perturbation_gap,
    sample_boundary_nodes,
)
from pmelab.solver import BoundaryData, SolverConfig, solve_bvp

CFG = SolverConfig()
BAR = BarenblattParams(2.0)


def bar_problem(n=60):
    c = build_cylinder(-5, 5, 1, 2, n, n)
    return c, BoundaryData.from_function(c, lambda x, t: barenblatt(x, t, BAR), 2.0)


class TestPerturbationGap:
    def test_zero_lift(self):
        c, bd = bar_problem()
        u, _ = solve_bvp(c, bd, CFG)
        assert perturbation_gap(u, u, 0.0, bd.sup(), 2.0) == (0.0, 0.0)

    @pytest.mark.parametrize("value, eps", [(0.5, 0.1), (1.0, 0.01), (0.0, 0.2)])
    def test_constant_closed_form(self, value, eps):
        c = build_cylinder(0, 1, 0, 1, 10, 10)
        u = GridFunction.from_function(c, lambda x, t: value + 0 * x)
        u_eps = GridFunction.from_function(c, lambda x, t: value + eps + 0 * x)
        lhs, rhs = perturbation_gap(u, u_eps, eps, value, 2.0)
        assert lhs == pytest.approx(eps * ((value + eps) ** 2 - value**2))
        assert lhs <= rhs

    def test_barenblatt_bound_and_scaling(self):
        c, bd = bar_problem()
        u, _ = solve_bvp(c, bd, CFG)
        out = []
        for eps in (0.1, 0.01):
            u_eps, _ = solve_bvp(c, bd.shifted(eps), CFG)
            lhs, rhs = perturbation_gap(u, u_eps, eps, bd.sup(), 2.0)
            assert lhs <= rhs
            out.append(lhs)
        # u_eps - u = O(eps) and phi(u_eps) - phi(u) = O(eps): the gap is quadratic in eps
        slope = np.log(out[0] / out[1]) / np.log(10.0)
        assert 1.5 <= slope <= 2.5

    def test_lattice_mismatch(self):
        a = GridFunction.from_function(build_cylinder(0, 1, 0, 1, 4, 4), lambda x, t: 0 * x)
        b = GridFunction.from_function(build_cylinder(0, 1, 0, 1, 8, 4), lambda x, t: 0 * x)
        with pytest.raises(ValueError):
            perturbation_gap(a, b, 0.1, 1.0, 2.0)

    def test_bound_formula(self):
        assert gap_bound(0.1, 2.0, 1.0, 2.0) == pytest.approx(0.1 * 2.0 * (2.0 + 4.0))


class TestLadder:
    def test_constant_data(self):
        c = build_cylinder(0, 1, 0, 0.5, 16, 16)
        bd = BoundaryData.from_function(c, lambda x, t: 0.5 + 0 * x, 2.0)
        eps = [0.2, 0.1, 0.05]
        ladder = perron_ladder(c, bd, eps, CFG)
        np.testing.assert_allclose(ladder.gaps, eps, rtol=1e-12)
        np.testing.assert_allclose(ladder.lower[0].values, 0.3, atol=1e-13)
        assert max(ladder.sandwich_violation) <= 1e-12

    def test_floor_at_zero(self):
        c = build_cylinder(0, 1, 0, 0.5, 16, 16)
        bd = BoundaryData.from_function(c, lambda x, t: 0.05 + 0 * x, 2.0)
        ladder = perron_ladder(c, bd, [0.1], CFG)
        assert ladder.lower[0].inf() == 0.0
        np.testing.assert_allclose(ladder.upper[0].values, 0.1, atol=1e-13)

    def test_barenblatt_sandwich_and_monotone(self):
        c, bd = bar_problem(40)
        ladder = perron_ladder(c, bd, [2.0**-j for j in range(1, 7)], CFG)
        assert max(ladder.sandwich_violation) <= 10 * CFG.newton_tol
        assert ladder.monotone_violation() <= 10 * CFG.newton_tol
        assert all(b < a for a, b in zip(ladder.gaps, ladder.gaps[1:]))

    def test_zero_eps_is_direct_solve(self):
        c, bd = bar_problem(30)
        ladder = perron_ladder(c, bd, [0.0], CFG)
        np.testing.assert_array_equal(ladder.lower[0].values, ladder.direct.values)
        np.testing.assert_array_equal(ladder.upper[0].values, ladder.direct.values)

    @pytest.mark.parametrize("eps", [[], [0.1, 0.1], [0.1, 0.2], [-0.1]])
    def test_sequence_validated(self, eps):
        c, bd = bar_problem(10)
        with pytest.raises(ValueError):
            perron_ladder(c, bd, eps, CFG)

    def test_csv(self, tmp_path):
        c = build_cylinder(0, 1, 0, 0.5, 8, 8)
        bd = BoundaryData.from_function(c, lambda x, t: 0.5 + 0 * x, 2.0)
        text = perron_ladder(c, bd, [0.5, 0.25], CFG).to_csv(tmp_path / "ladder.csv")
        assert text.splitlines()[0] == "j,eps,sup_gap,sandwich_violation"
        assert (tmp_path / "ladder.csv").read_text() == text


class TestAttainment:
    def test_sampled_nodes_on_boundary(self):
        c = build_cylinder(0, 1, 0, 1, 20, 20)
        nodes = sample_boundary_nodes(c, 10)
        pb = parabolic_boundary(c)
        assert len(set(nodes)) == 10 and all(n in pb for n in nodes)

    def test_constant_data(self):
        c = build_cylinder(0, 1, 0, 0.5, 16, 16)
        bd = BoundaryData.from_function(c, lambda x, t: 0.5 + 0 * x, 2.0)
        u, _ = solve_bvp(c, bd, CFG)
        assert boundary_attainment(u, bd, (0, 8), 4 * c.h) == pytest.approx(0.0, abs=1e-13)

    def test_decreasing_with_radius(self):
        c = build_cylinder(0, 1, 0, 0.5, 64, 64)
        bd = BoundaryData.from_function(c, lambda x, t: 0.3 + 0.5 * np.sin(np.pi * x) * np.exp(-t), 2.0)
        u, _ = solve_bvp(c, bd, CFG)
        for xi in sample_boundary_nodes(c, 10):
            d = [boundary_attainment(u, bd, xi, r * c.h) for r in (4, 2, 1)]
            assert d[0] >= d[1] >= d[2]

    def test_rejects_interior_node_and_bad_radius(self):
        c = build_cylinder(0, 1, 0, 0.5, 8, 8)
        bd = BoundaryData.from_function(c, lambda x, t: 0.5 + 0 * x, 2.0)
        u, _ = solve_bvp(c, bd, CFG)
        with pytest.raises(ValueError, match="parabolic-boundary"):
            boundary_attainment(u, bd, (4, 4), 0.1)
        with pytest.raises(ValueError):
            boundary_attainment(u, bd, (0, 4), 0.0)
