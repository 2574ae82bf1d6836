import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pmelab.domain import (
    CylinderUnion,
    IndexBox,
    boxes_from_fractions,
    build_cylinder,
    parabolic_boundary,
    runs,
    union_parabolic_boundary,
)


class TestBuildCylinder:
    def test_small_lattice(self):
        c = build_cylinder(0, 1, 0, 1, 4, 2)
        assert c.shape == (3, 5)
        assert c.h == pytest.approx(0.25)
        assert c.tau == pytest.approx(0.5)

    def test_fine_lattice(self):
        c = build_cylinder(-1, 1, 0, 0.5, 200, 500)
        assert c.h == pytest.approx(0.01)
        assert c.tau == pytest.approx(0.001)
        assert c.volume == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "args",
        [(0, 1, 0, 1, 1, 1), (0, 1, 0, 1, 4, 0), (1, 0, 0, 1, 4, 2), (0, 1, 1, 0, 4, 2), (0, np.nan, 0, 1, 4, 2)],
    )
    def test_rejects_bad_input(self, args):
        with pytest.raises(ValueError):
            build_cylinder(*args)

    def test_sub_and_locate_round_trip(self):
        c = build_cylinder(0, 2, 0, 1, 8, 4)
        box = IndexBox(2, 6, 1, 3)
        sub = c.sub(box)
        assert sub.shape == (3, 5)
        np.testing.assert_allclose(sub.x, c.x[2:7])
        assert c.locate(sub) == box


class TestParabolicBoundary:
    def test_counts_small(self):
        pb = parabolic_boundary(build_cylinder(0, 1, 0, 1, 4, 2))
        assert len(pb.initial_nodes) == 5
        assert len(pb.lateral_nodes) == 4
        assert len(pb) == 9

    def test_counts_minimal(self):
        assert len(parabolic_boundary(build_cylinder(0, 1, 0, 1, 2, 1))) == 5

    @given(st.integers(2, 12), st.integers(1, 12))
    def test_final_slice_interior_excluded(self, n, k):
        c = build_cylinder(0, 1, 0, 1, n, k)
        pb = parabolic_boundary(c)
        assert len(pb) == (n + 1) + 2 * k
        assert all((i, k) not in pb for i in range(1, n))

    def test_mask_matches_nodes(self):
        c = build_cylinder(0, 1, 0, 1, 5, 3)
        mask = parabolic_boundary(c).mask(c.shape)
        assert mask[0].all() and mask[:, 0].all() and mask[:, -1].all()
        assert not mask[1:, 1:-1].any()


def geometric_boundary(boxes, shape):
    """Brute-force parabolic boundary from point containment.

    A closure node is off the boundary iff a small backward neighbourhood
    ``(i - d, i + d) x (k - d, k]`` lies in the union of closed boxes. Box
    corners sit on integers, so probing a few offsets decides containment.
    """

    def inside(x, t):
        return any(b.i0 <= x <= b.i1 and b.k0 <= t <= b.k1 for b in boxes)

    closure, boundary = set(), set()
    for k, i in itertools.product(range(shape[0]), range(shape[1])):
        if not inside(i, k):
            continue
        closure.add((i, k))
        probes = [(i + dx, k + dt) for dx in (-0.45, 0.0, 0.45) for dt in (-0.45, -0.2, 0.0)]
        if not all(inside(x, t) for x, t in probes):
            boundary.add((i, k))
    return closure, boundary


STAGGERED = (IndexBox(0, 10, 0, 6), IndexBox(6, 16, 3, 10), IndexBox(12, 20, 7, 14))


class TestUnionBoundary:
    def test_identical_members(self):
        c = build_cylinder(0, 1, 0, 1, 6, 4)
        k = CylinderUnion(c, (c.box(), c.box()))
        assert union_parabolic_boundary(k).nodes == parabolic_boundary(c).nodes

    def test_overlap_removes_inner_lateral_nodes(self):
        c = build_cylinder(0, 1, 0, 1, 10, 4)
        k = CylinderUnion(c, (IndexBox(0, 6, 0, 4), IndexBox(4, 10, 0, 4)))
        pb = union_parabolic_boundary(k)
        assert pb.nodes == parabolic_boundary(c).nodes
        assert all((i, kk) not in pb for i in (4, 6) for kk in range(1, 5))

    def test_staggered_union_matches_geometric_oracle(self):
        amb = build_cylinder(0, 1, 0, 1, 20, 14)
        k = CylinderUnion(amb, STAGGERED)
        closure, boundary = geometric_boundary(STAGGERED, amb.shape)
        assert set(zip(*np.nonzero(k.closure_mask.T))) == closure
        assert union_parabolic_boundary(k).nodes == boundary
        assert set(zip(*np.nonzero(k.boundary_mask.T))) == boundary

    @given(st.lists(st.tuples(st.integers(0, 8), st.integers(2, 6), st.integers(0, 6), st.integers(1, 5)), min_size=1, max_size=4))
    def test_random_unions_match_geometric_oracle(self, specs):
        boxes = tuple(IndexBox(i0, min(i0 + w, 14), k0, min(k0 + d, 10)) for i0, w, k0, d in specs if min(i0 + w, 14) - i0 >= 2 and min(k0 + d, 10) > k0)
        if not boxes:
            return
        amb = build_cylinder(0, 1, 0, 1, 14, 10)
        try:
            k = CylinderUnion(amb, boxes)
        except ValueError:
            return  # disconnected
        _, boundary = geometric_boundary(boxes, amb.shape)
        assert union_parabolic_boundary(k).nodes == boundary

    def test_disconnected_union_rejected(self):
        amb = build_cylinder(0, 1, 0, 1, 20, 4)
        with pytest.raises(ValueError, match="disconnected"):
            CylinderUnion(amb, (IndexBox(0, 5, 0, 4), IndexBox(10, 20, 0, 4)))

    def test_member_outside_ambient_rejected(self):
        amb = build_cylinder(0, 1, 0, 1, 10, 4)
        with pytest.raises(ValueError):
            CylinderUnion(amb, (IndexBox(0, 12, 0, 4),))

    def test_node_classes(self):
        amb = build_cylinder(0, 1, 0, 1, 20, 14)
        k = CylinderUnion(amb, STAGGERED)
        cls = k.classify_nodes()
        assert np.array_equal(cls == 1, k.boundary_mask)
        assert np.array_equal(cls >= 2, k.solve_mask)
        assert np.all(cls[14, 13:20] == 3)  # final slice of the last member

    def test_from_cylinders(self):
        amb = build_cylinder(0, 1, 0, 1, 10, 10)
        members = [amb.sub(IndexBox(0, 6, 0, 10)), amb.sub(IndexBox(4, 10, 0, 10))]
        k = CylinderUnion.from_cylinders(amb, members)
        assert k.boxes == (IndexBox(0, 6, 0, 10), IndexBox(4, 10, 0, 10))

    def test_boxes_from_fractions(self):
        c = build_cylinder(0, 1, 0, 1, 8, 4)
        assert boxes_from_fractions(c, [(0, 0.5, 0.25, 1.0)]) == (IndexBox(0, 4, 1, 4),)


@pytest.mark.parametrize(
    "row, expected",
    [([0, 1, 1, 0, 1], [(1, 3), (4, 5)]), ([1, 1, 1], [(0, 3)]), ([0, 0], [])],
)
def test_runs(row, expected):
    assert runs(np.array(row, dtype=bool)) == expected


@pytest.mark.parametrize("box", [(0, 1, 0, 1), (0, 4, 2, 2), (-1, 4, 0, 1)])
def test_index_box_rejects_degenerate(box):
    with pytest.raises(ValueError):
        IndexBox(*box)
