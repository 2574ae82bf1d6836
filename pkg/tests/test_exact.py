import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from pmelab.exact import (
    BarenblattParams,
    barenblatt,
    barenblatt_mass,
    barenblatt_profile,
    lambda_exponent,
    steady_state,
    support_radius,
)


def beta_mass(m, n, C):
    """Closed-form mass via the Beta function (independent of the quadrature)."""
    p = BarenblattParams(m, n, C)
    q = 1.0 / (m - 1.0)
    R2 = C / p.k
    return C**q * (math.pi * R2) ** (n / 2) * special.gamma(q + 1) / special.gamma(q + 1 + n / 2)


@pytest.mark.parametrize("m, n, expected", [(2, 1, 1 / 3), (2, 2, 1 / 2), (3, 1, 1 / 4)])
def test_lambda(m, n, expected):
    assert lambda_exponent(m, n) == pytest.approx(expected, rel=1e-15)


def test_lambda_rejects_bad_dimension():
    with pytest.raises(ValueError):
        lambda_exponent(2.0, 0)


class TestBarenblatt:
    p = BarenblattParams(2.0)

    @pytest.mark.parametrize("t", [-1.0, 0.0])
    def test_vanishes_before_origin(self, t):
        assert barenblatt(0.3, t, self.p) == 0.0

    def test_value_at_origin(self):
        assert barenblatt(0.0, 1.0, self.p) == pytest.approx(1.0)
        assert barenblatt(0.0, 1.0, BarenblattParams(3.0, 1, 4.0)) == pytest.approx(2.0)

    def test_support_radius(self):
        assert support_radius(self.p, 1.0) == pytest.approx(math.sqrt(12.0))
        r = support_radius(self.p, 2.0)
        assert barenblatt(r * (1 + 1e-9), 2.0, self.p) == 0.0
        assert barenblatt(r * (1 - 1e-3), 2.0, self.p) > 0.0

    @given(st.floats(1.2, 4.0), st.floats(0.1, 5.0), st.floats(0.1, 3.0))
    def test_zero_outside_support(self, m, t, C):
        p = BarenblattParams(m, 1, C)
        lam = p.lam
        edge2 = 2 * m * C * t ** (2 * lam) / (lam * (m - 1))
        assert barenblatt(math.sqrt(edge2) * 1.001, t, p) == 0.0

    def test_self_similar_profile(self):
        x = np.linspace(-5, 5, 101)
        t = 2.5
        np.testing.assert_allclose(barenblatt(x, t, self.p), t ** (-1 / 3) * barenblatt_profile(x * t ** (-1 / 3), self.p))

    def test_radial_points(self):
        p = BarenblattParams(2.0, 2)
        pts = np.array([[0.3, 0.4], [0.5, 0.0]])
        np.testing.assert_allclose(barenblatt(pts, 1.0, p), barenblatt(np.array([[0.0, 0.5], [0.0, 0.5]]), 1.0, p))

    def test_solves_pme_symbolically(self):
        x, t = sp.symbols("x t", positive=True)
        lam = sp.Rational(1, 3)
        k = lam / 4
        u = t ** (-lam) * (1 - k * x**2 * t ** (-2 * lam))
        assert sp.simplify(sp.diff(u, t) - sp.diff(u**2, x, 2)) == 0
        assert u.subs({x: 0, t: 1}) == 1


class TestMass:
    @pytest.mark.parametrize("m, n, C", [(2.0, 1, 1.0), (3.0, 1, 0.5), (1.5, 1, 2.0), (2.0, 2, 1.0), (2.5, 3, 1.0)])
    def test_matches_beta_function(self, m, n, C):
        p = BarenblattParams(m, n, C)
        assert barenblatt_mass(p, 1.3) == pytest.approx(beta_mass(m, n, C), rel=1e-9)

    def test_time_independent(self):
        p = BarenblattParams(2.0)
        m1, m2 = barenblatt_mass(p, 1.0), barenblatt_mass(p, 2.0)
        assert abs(m1 - m2) / m1 <= 1e-8

    def test_small_constant_small_mass(self):
        masses = [barenblatt_mass(BarenblattParams(2.0, 1, C), 1.0) for C in (1e-2, 1e-4, 1e-6)]
        assert masses[0] > masses[1] > masses[2] and masses[2] < 1e-8

    def test_rejects_nonpositive_time(self):
        with pytest.raises(ValueError):
            barenblatt_mass(BarenblattParams(2.0), 0.0)


class TestSteadyState:
    def test_constant(self):
        u = steady_state(0.0, 1.0, 2.0)
        np.testing.assert_allclose(u(np.linspace(0, 1, 11)), 1.0)

    def test_square_root(self):
        u = steady_state(1.0, 0.0, 2.0)
        x = np.linspace(0, 1, 11)
        np.testing.assert_allclose(u(x), np.sqrt(x))
        np.testing.assert_allclose(np.diff(u(x) ** 2, 2), 0.0, atol=1e-15)

    def test_positive_part(self):
        assert steady_state(-1.0, 0.5, 3.0)(1.0) == 0.0
