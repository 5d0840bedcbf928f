import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msbin.partition import (
    Domain,
    PartitionTree,
    build_equal_count,
    build_equal_width,
    descendants,
)

UNIT = Domain(0.0, 1.0)


class TestDomain:
    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            Domain(1.0, 1.0)
        with pytest.raises(ValueError):
            Domain(2.0, 1.0)

    def test_half_open_membership(self):
        d = Domain(0.0, 1.0)
        assert d.contains(0.0)
        assert not d.contains(1.0)


class TestEqualWidth:
    def test_single_split(self):
        tree = build_equal_width(UNIT, 1)
        assert tree.boundaries(1).tolist() == [0.0, 0.5, 1.0]

    def test_three_levels_dyadic_widths(self):
        tree = build_equal_width(UNIT, 3)
        bnd = tree.boundaries(3)
        assert np.allclose(np.diff(bnd), 0.125)
        assert tree.region(3, 5) == (0.5, 0.625)

    def test_affine_domain(self):
        tree = build_equal_width(Domain(2.0, 4.0), 2)
        assert tree.boundaries(2).tolist() == [2.0, 2.5, 3.0, 3.5, 4.0]

    def test_rejects_zero_levels(self):
        with pytest.raises(ValueError):
            build_equal_width(UNIT, 0)


class TestEqualCount:
    def test_odd_split_puts_floor_half_left(self):
        tree = build_equal_count([0.1, 0.2, 0.9], UNIT, 1)
        assert tree.boundaries(1)[1] == pytest.approx(0.15)
        assert tree.locate(0.1, 1) == 1
        assert tree.locate(0.2, 1) == 2

    def test_empty_parent_falls_back_to_midpoint(self):
        tree = build_equal_count([], UNIT, 1)
        assert tree.boundaries(1)[1] == 0.5

    def test_symmetric_two_points(self):
        tree = build_equal_count([0.25, 0.75], UNIT, 1)
        assert tree.boundaries(1)[1] == 0.5

    def test_rejects_positions_outside_domain(self):
        with pytest.raises(ValueError):
            build_equal_count([1.5], UNIT, 1)

    def test_unsplittable_cluster_is_a_clear_error(self):
        # duplicated subnormal points put a cut at 5e-324, leaving the
        # child interval [0, 5e-324) with no representable interior cut
        with pytest.raises(ValueError, match="too concentrated"):
            build_equal_count([5e-324, 5e-324], UNIT, 2)

    def test_child_counts_split_evenly(self):
        rng = np.random.default_rng(7)
        pts = np.sort(rng.random(93))
        tree = build_equal_count(pts, UNIT, 3)
        for r in range(1, 4):
            counts = np.bincount(np.asarray(tree.locate(pts, r)) - 1,
                                 minlength=2**r)
            for j in range(2 ** (r - 1)):
                parent = counts[2 * j] + counts[2 * j + 1]
                assert counts[2 * j] == parent // 2


class TestDescendants:
    def test_one_level_down(self):
        assert descendants(1, 2, 2).tolist() == [3, 4]

    def test_all_leaves(self):
        assert descendants(0, 1, 3).tolist() == list(range(1, 9))

    def test_same_level_is_identity(self):
        assert descendants(2, 3, 2).tolist() == [3]

    def test_rejects_inverted_levels(self):
        with pytest.raises(ValueError):
            descendants(3, 1, 2)

    def test_union_of_children(self):
        for s in range(0, 3):
            for j in range(1, 2**s + 1):
                for r in range(s + 1, 5):
                    lhs = set(descendants(s, j, r).tolist())
                    rhs = set(descendants(s + 1, 2 * j - 1, r).tolist())
                    rhs |= set(descendants(s + 1, 2 * j, r).tolist())
                    assert lhs == rhs


class TestLocate:
    def test_interior_point(self):
        tree = build_equal_width(UNIT, 2)
        assert tree.locate(0.3, 2) == 2

    def test_left_endpoint(self):
        tree = build_equal_width(UNIT, 3)
        assert tree.locate(0.0, 3) == 1

    def test_last_bin(self):
        tree = build_equal_width(UNIT, 3)
        assert tree.locate(0.999, 3) == 8

    def test_rejects_outside_domain(self):
        tree = build_equal_width(UNIT, 1)
        with pytest.raises(ValueError):
            tree.locate(1.0, 1)


@settings(max_examples=30, deadline=None, derandomize=True)
@given(st.lists(st.integers(min_value=0, max_value=99_999), min_size=0,
                max_size=40), st.integers(min_value=1, max_value=4))
def test_nesting_and_coverage_random_trees(ticks, levels):
    # positions on a 1e-5 grid: duplicates allowed, pathological float
    # spacing (narrower than any representable cut) excluded
    pts = np.sort(np.asarray(ticks, dtype=float)) / 100_000.0
    tree = build_equal_count(pts, UNIT, levels)
    for r in range(1, levels + 1):
        child = tree.boundaries(r)
        parent = tree.boundaries(r - 1)
        # nesting: every parent boundary survives, children stay inside
        assert np.all(np.isin(parent, child))
        for l in range(1, 2**r + 1):
            lo, hi = tree.region(r, l)
            plo, phi = tree.region(r - 1, (l + 1) // 2)
            assert plo <= lo < hi <= phi
    if pts.size:
        for r in range(1, levels + 1):
            counts = np.bincount(np.asarray(tree.locate(pts, r)) - 1,
                                 minlength=2**r)
            assert counts.sum() == pts.size


def test_json_round_trip():
    tree = build_equal_count([0.2, 0.4, 0.9], UNIT, 2)
    again = PartitionTree.from_json_dict(json.loads(tree.to_json()))
    assert again.levels == tree.levels
    for r in range(tree.levels + 1):
        assert np.array_equal(again.boundaries(r), tree.boundaries(r))
