from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coloc.errors import EmptyList, EmptyMask
from coloc.geometry import BoundingBox, iou, round_to_box, tight_box, union_box
from coloc.imagery import BinaryMask

from oracles import iou_enumerate


def boxes(max_side=64):
    def build(draw):
        t, b = sorted(draw(st.lists(st.integers(0, max_side - 1), min_size=2, max_size=2, unique=True)))
        l, r = sorted(draw(st.lists(st.integers(0, max_side - 1), min_size=2, max_size=2, unique=True)))
        return BoundingBox(t, b, l, r)

    return st.composite(lambda draw: build(draw))()


def test_box_invariants():
    with pytest.raises(ValueError):
        BoundingBox(3, 3, 0, 1)
    with pytest.raises(ValueError):
        BoundingBox(0, 1, 5, 2)
    with pytest.raises(ValueError):
        BoundingBox(-1, 1, 0, 1)
    assert BoundingBox(0, 9, 0, 9).area == 100


class TestTightBox:
    def test_extremes(self):
        bits = np.zeros((10, 10), bool)
        bits[2, 3] = bits[5, 7] = True
        assert tight_box(BinaryMask(bits)) == BoundingBox(2, 5, 3, 7)

    def test_full(self):
        assert tight_box(BinaryMask(np.ones((10, 10), bool))) == BoundingBox(0, 9, 0, 9)

    def test_single_pixel_expanded(self):
        bits = np.zeros((10, 10), bool)
        bits[4, 4] = True
        assert tight_box(BinaryMask(bits)) == BoundingBox(4, 5, 4, 5)

    def test_single_pixel_in_corner(self):
        bits = np.zeros((10, 10), bool)
        bits[9, 9] = True
        assert tight_box(BinaryMask(bits)) == BoundingBox(8, 9, 8, 9)

    def test_empty(self):
        with pytest.raises(EmptyMask):
            tight_box(BinaryMask(np.zeros((3, 3), bool)))


class TestIoU:
    def test_identical_and_disjoint(self):
        a = BoundingBox(1, 5, 2, 8)
        assert iou(a, a) == 1.0
        assert iou(a, BoundingBox(10, 12, 10, 12)) == 0.0

    def test_offset_squares(self):
        a, b = BoundingBox(0, 9, 0, 9), BoundingBox(5, 14, 5, 14)
        assert iou_enumerate(a.as_tuple(), b.as_tuple()) == Fraction(25, 175)
        assert iou(a, b) == pytest.approx(25 / 175, abs=1e-15)

    @given(boxes(24), boxes(24))
    def test_properties(self, a, b):
        v = iou(a, b)
        assert v == iou(b, a)
        assert 0.0 <= v <= 1.0
        assert abs(v - float(iou_enumerate(a.as_tuple(), b.as_tuple()))) < 1e-12


class TestUnion:
    def test_cases(self):
        a = BoundingBox(0, 3, 0, 3)
        assert union_box([a]) == a
        assert union_box([a, BoundingBox(5, 8, 5, 8)]) == BoundingBox(0, 8, 0, 8)
        assert union_box([BoundingBox(0, 9, 0, 9), BoundingBox(2, 4, 2, 4)]) == BoundingBox(0, 9, 0, 9)

    def test_empty(self):
        with pytest.raises(EmptyList):
            union_box([])

    @given(st.lists(boxes(), min_size=1, max_size=6))
    def test_contains_inputs(self, bs):
        u = union_box(bs)
        assert all(u.contains(x) for x in bs)


class TestRound:
    def test_rounding(self):
        assert round_to_box([2.4, 7.6, 1.0, 9.0], 20, 20) == BoundingBox(2, 8, 1, 9)

    def test_repair(self):
        assert round_to_box([5.4, 5.6, 1.0, 3.0], 20, 20).as_tuple()[:2] == (5, 6)
        assert round_to_box([5.4, 5.2, 1.0, 3.0], 20, 20).as_tuple()[:2] == (5, 6)

    def test_clamp(self):
        box = round_to_box([-3.0, 50.0, 0.0, 4.0], 20, 20)
        assert (box.t, box.b) == (0, 19)

    def test_repair_at_border(self):
        box = round_to_box([30.0, 25.0, 19.0, 19.0], 20, 20)
        assert box.as_tuple() == (18, 19, 18, 19)

    @given(
        st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=4, max_size=4),
        st.integers(2, 80),
        st.integers(2, 80),
    )
    def test_always_valid(self, v, w, h):
        box = round_to_box(v, w, h)
        assert box.fits(w, h)
        assert box.b > box.t and box.r > box.l
