"""Axis-aligned boxes in inclusive integer pixel coordinates.

A box is always ordered ``(t, b, l, r)``: top row, bottom row, left column,
right column.  Area counts pixels, ``(b - t + 1) * (r - l + 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyList, EmptyMask
from .imagery import BinaryMask


@dataclass(frozen=True, order=True)
class BoundingBox:
    t: int
    b: int
    l: int
    r: int

    def __post_init__(self):
        for name in ("t", "b", "l", "r"):
            value = getattr(self, name)
            if isinstance(value, (bool, np.bool_)) or not float(value).is_integer():
                raise ValueError(f"box coordinate {name}={value!r} is not an integer")
            object.__setattr__(self, name, int(value))
        if self.t < 0 or self.l < 0:
            raise ValueError(f"box {self.as_tuple()} has negative coordinates")
        if self.b <= self.t or self.r <= self.l:
            raise ValueError(f"box {self.as_tuple()} violates b > t and r > l")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.t, self.b, self.l, self.r)

    def as_vector(self) -> np.ndarray:
        return np.array(self.as_tuple(), dtype=np.float64)

    @property
    def height(self) -> int:
        return self.b - self.t + 1

    @property
    def width(self) -> int:
        return self.r - self.l + 1

    @property
    def area(self) -> int:
        return self.height * self.width

    def fits(self, width: int, height: int) -> bool:
        return self.b <= height - 1 and self.r <= width - 1

    def contains(self, other: "BoundingBox") -> bool:
        return self.t <= other.t and self.b >= other.b and self.l <= other.l and self.r >= other.r

    def intersects(self, other: "BoundingBox") -> bool:
        return intersection_area(self, other) > 0

    def __iter__(self):
        return iter(self.as_tuple())


# The continuous relaxation used inside the solver: a length-4 float array in
# (t, b, l, r) order.
BoxVector = np.ndarray


def tight_box(mask: BinaryMask) -> BoundingBox:
    """Smallest box holding every true pixel.

    A single-row (or single-column) extent is widened by one pixel, downward
    (rightward) when possible, so the result is a legal box.
    """
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if rows.size == 0:
        raise EmptyMask("mask has no true pixels")
    cols = np.flatnonzero(mask.bits.any(axis=0))
    t, b = _widen(int(rows[0]), int(rows[-1]), mask.height)
    l, r = _widen(int(cols[0]), int(cols[-1]), mask.width)
    return BoundingBox(t, b, l, r)


def _widen(lo: int, hi: int, size: int) -> tuple[int, int]:
    if hi > lo:
        return lo, hi
    if lo + 1 <= size - 1:
        return lo, lo + 1
    return size - 2, size - 1


def intersection_area(a: BoundingBox, b: BoundingBox) -> int:
    h = min(a.b, b.b) - max(a.t, b.t) + 1
    w = min(a.r, b.r) - max(a.l, b.l) + 1
    if h <= 0 or w <= 0:
        return 0
    return h * w


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Jaccard index of the two boxes as pixel sets."""
    inter = intersection_area(a, b)
    return inter / (a.area + b.area - inter)


def union_box(boxes: Iterable[BoundingBox]) -> BoundingBox:
    boxes = list(boxes)
    if not boxes:
        raise EmptyList("union_box needs at least one box")
    return BoundingBox(
        min(x.t for x in boxes),
        max(x.b for x in boxes),
        min(x.l for x in boxes),
        max(x.r for x in boxes),
    )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _repair(lo: int, hi: int, size: int) -> tuple[int, int]:
    lo = min(max(lo, 0), size - 1)
    hi = min(max(hi, 0), size - 1)
    if hi <= lo:
        hi = lo + 1
        if hi > size - 1:
            hi, lo = size - 1, size - 2
    return lo, hi


def round_to_box(v: Sequence[float], width: int, height: int) -> BoundingBox:
    """Snap a continuous (t, b, l, r) vector to a legal pixel box.

    Components are rounded half-up, clamped to the image, then ``b`` (``r``)
    is pushed to ``t + 1`` (``l + 1``) if needed, shifting ``t`` (``l``) up
    when the far edge is already on the border.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (4,) or not np.all(np.isfinite(v)):
        raise ValueError(f"expected 4 finite components, got {v!r}")
    t, b, l, r = (_round_half_up(x) for x in v)
    t, b = _repair(t, b, height)
    l, r = _repair(l, r, width)
    return BoundingBox(t, b, l, r)
