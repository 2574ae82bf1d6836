import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmelab.domain import CylinderUnion, IndexBox, build_cylinder
from pmelab.gridfunction import GridFunction


def sample(c):
    return GridFunction.from_function(c, lambda x, t: np.exp(-x) * (1 + t) / 3.0)


class TestGridFunction:
    def test_shape_checked(self):
        with pytest.raises(ValueError, match="shape"):
            GridFunction(build_cylinder(0, 1, 0, 1, 4, 4), np.zeros((4, 4)))

    def test_non_finite_rejected(self):
        v = np.zeros((5, 5))
        v[2, 2] = np.inf
        with pytest.raises(ValueError, match="finite"):
            GridFunction(build_cylinder(0, 1, 0, 1, 4, 4), v)

    def test_immutable(self):
        u = sample(build_cylinder(0, 1, 0, 1, 4, 4))
        with pytest.raises(ValueError):
            u.values[0, 0] = 1.0

    def test_union_masks_outside(self):
        amb = build_cylinder(0, 1, 0, 1, 10, 10)
        k = CylinderUnion(amb, (IndexBox(0, 6, 0, 5), IndexBox(4, 10, 3, 10)))
        u = GridFunction.from_function(k, lambda x, t: 1 + x + t)
        assert np.isnan(u.values[10, 0]) and np.isfinite(u.values[0, 0])
        assert u.sup() == pytest.approx(1 + 1 + 1)

    def test_restrict(self):
        u = sample(build_cylinder(0, 1, 0, 1, 8, 8))
        sub = u.restrict(IndexBox(2, 6, 1, 5))
        np.testing.assert_array_equal(sub.values, u.values[1:6, 2:7])
        assert sub.cylinder.x[0] == pytest.approx(0.25)


class TestSerialization:
    def test_csv_layout(self):
        u = sample(build_cylinder(0, 1, 0, 1, 2, 1))
        lines = u.to_csv().splitlines()
        assert lines[0] == "x,t,u"
        assert len(lines) == 1 + 6
        first = lines[1].split(",")
        assert (float(first[0]), float(first[1])) == (0.0, 0.0)
        assert [float(line.split(",")[0]) for line in lines[1:4]] == [0.0, 0.5, 1.0]  # space varies fastest
        assert float(lines[4].split(",")[1]) == 1.0

    @given(st.integers(2, 9), st.integers(1, 9), st.floats(-3, 3), st.floats(0.1, 5))
    def test_csv_round_trip_exact(self, n, k, a, length):
        c = build_cylinder(a, a + length, 0.0, 1.0, n, k)
        u = sample(c)
        back = GridFunction.from_csv(u.to_csv(), c)
        np.testing.assert_array_equal(back.values, u.values)

    def test_csv_file_round_trip_infers_lattice(self, tmp_path):
        c = build_cylinder(-1, 1, 0, 0.5, 8, 4)
        u = sample(c)
        u.to_csv(tmp_path / "u.csv")
        back = GridFunction.from_csv(tmp_path / "u.csv")
        np.testing.assert_array_equal(back.values, u.values)
        assert back.cylinder.shape == c.shape

    def test_npz_round_trip_union(self, tmp_path):
        amb = build_cylinder(0, 1, 0, 1, 10, 10)
        k = CylinderUnion(amb, (IndexBox(0, 6, 0, 5), IndexBox(4, 10, 3, 10)))
        u = GridFunction.from_function(k, lambda x, t: 1 + x * t)
        u.save(tmp_path / "u.npz")
        back = GridFunction.load(tmp_path / "u.npz")
        assert back.domain.boxes == k.boxes
        np.testing.assert_array_equal(back.values, u.values)

    def test_npz_round_trip_cylinder(self, tmp_path):
        u = sample(build_cylinder(0, 2, 1, 3, 6, 4))
        u.save(tmp_path / "u.npz")
        back = GridFunction.load(tmp_path / "u.npz")
        assert back.same_lattice(u)
        np.testing.assert_array_equal(back.values, u.values)
