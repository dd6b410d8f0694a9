"""Raster I/O, Otsu thresholding, binarization, components and edge extents.

Every map in the pipeline (input image, saliency, co-saliency, fused prior)
is a :class:`GrayMap`: a ``(height, width)`` float array with values in
``[0, 1]``.  Foreground is always ``value > threshold`` (strict).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import (
    DegenerateMap,
    MinimumSizeViolated,
    UnsupportedFormat,
    WriteFailure,
    ZeroDimension,
)

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_EDGE_THRESHOLD = 0.1

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
_SUPPORTED_FORMATS = {"PNG", "PPM"}  # PIL reports binary PGM as PPM


@dataclass(frozen=True, eq=False)
class GrayMap:
    """Normalized grayscale raster, stored row-major as ``values[row, col]``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"GrayMap needs a 2-D array, got shape {v.shape}")
        if v.shape[0] == 0 or v.shape[1] == 0:
            raise ZeroDimension(f"raster has a zero dimension: {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise MinimumSizeViolated(f"raster must be at least 2x2, got {v.shape[1]}x{v.shape[0]}")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("GrayMap values must lie in [0, 1]")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def quantized(self) -> np.ndarray:
        """8-bit levels ``round(v * 255)`` as ``uint8``."""
        return np.floor(self.values * 255.0 + 0.5).astype(np.uint8)

    def __eq__(self, other):
        if not isinstance(other, GrayMap):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool).copy()
        if b.ndim != 2:
            raise ValueError(f"BinaryMask needs a 2-D array, got shape {b.shape}")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def any(self) -> bool:
        return bool(self.bits.any())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return bool(np.array_equal(self.bits, other.bits))

    __hash__ = None


@dataclass(frozen=True)
class EdgeProfile:
    """Distinct row and column indices of edge pixels.

    Only the extremes matter downstream: they bound the box coordinates.
    """

    rows: tuple[int, ...]
    cols: tuple[int, ...]

    def __post_init__(self):
        if not self.rows or not self.cols:
            raise ValueError("EdgeProfile rows and cols must be non-empty")
        if min(self.rows) >= max(self.rows) or min(self.cols) >= max(self.cols):
            raise ValueError("EdgeProfile must span at least two rows and two columns")

    @property
    def row_range(self) -> tuple[int, int]:
        return self.rows[0], self.rows[-1]

    @property
    def col_range(self) -> tuple[int, int]:
        return self.cols[0], self.cols[-1]

    @classmethod
    def full_extent(cls, width: int, height: int) -> "EdgeProfile":
        return cls(tuple(range(height)), tuple(range(width)))


def load_gray_map(path) -> GrayMap:
    """Read an 8-bit PGM or PNG (gray or RGB) into a GrayMap.

    RGB is reduced to luma ``0.299 R + 0.587 G + 0.114 B`` in floating point
    before scaling by 1/255, so no intermediate rounding happens.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such raster: {path}")
    try:
        with Image.open(path) as im:
            fmt = im.format
            mode = im.mode
            im.load()
            if fmt not in _SUPPORTED_FORMATS:
                raise UnsupportedFormat(f"{path}: unsupported format {fmt!r}")
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64)
            elif mode == "RGB":
                rgb = np.asarray(im, dtype=np.float64)
                arr = rgb @ np.asarray(LUMA_WEIGHTS)
            else:
                raise UnsupportedFormat(f"{path}: unsupported pixel mode {mode!r} (need 8-bit L or RGB)")
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: not a readable raster") from exc
    if arr.size == 0:
        raise ZeroDimension(f"{path}: empty raster")
    return GrayMap(np.clip(arr / 255.0, 0.0, 1.0))


def raster_size(path) -> tuple[int, int]:
    """(width, height) of a raster file, read from the header only."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such raster: {path}")
    try:
        with Image.open(path) as im:
            return im.size
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: not a readable raster") from exc


def save_gray_map(gmap: GrayMap, path) -> None:
    """Write as 8-bit PNG or binary PGM, chosen by the file suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".png", ".pgm"):
        raise UnsupportedFormat(f"cannot write {path.suffix!r}; use .png or .pgm")
    im = Image.fromarray(gmap.quantized(), mode="L")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        im.save(path, format="PNG" if suffix == ".png" else "PPM")
    except OSError as exc:
        raise WriteFailure(f"{path}: {exc}") from exc


def otsu_level(hist: np.ndarray) -> int:
    """Index k maximizing between-class variance for classes ``<= k`` / ``> k``.

    Ties resolve to the lowest k.  Raises DegenerateMap for single-level
    histograms.
    """
    hist = np.asarray(hist, dtype=np.int64)
    levels = np.arange(hist.size, dtype=np.int64)
    n0 = np.cumsum(hist)[:-1]
    s0 = np.cumsum(hist * levels)[:-1]
    n = int(hist.sum())
    s = int((hist * levels).sum())
    n1 = n - n0
    s1 = s - s0
    valid = (n0 > 0) & (n1 > 0)
    if not valid.any():
        raise DegenerateMap("map has a single intensity level")
    # n0*n1*(mu0 - mu1)^2, up to the constant 1/n^2
    diff = (s0 * n1 - s1 * n0).astype(np.float64)
    denom = np.where(valid, n0 * n1, 1).astype(np.float64)
    score = np.where(valid, diff * diff / denom, -1.0)
    return int(np.argmax(score))


def otsu_threshold(gmap: GrayMap) -> float:
    """Otsu threshold over the 256-bin histogram of ``round(v * 255)``.

    The returned value sits halfway between the last background level and
    the first foreground level, so ``v > threshold`` reproduces the level
    split even for maps whose values are not exact multiples of 1/255.
    """
    hist = np.bincount(gmap.quantized().ravel(), minlength=256)
    k = otsu_level(hist)
    return (k + 0.5) / 255.0


def binarize(gmap: GrayMap, threshold: float) -> BinaryMask:
    return BinaryMask(gmap.values > threshold)


def otsu_mask(gmap: GrayMap) -> BinaryMask:
    return binarize(gmap, otsu_threshold(gmap))


def label_components(mask: BinaryMask) -> tuple[np.ndarray, int]:
    """8-connected labeling; labels run 1..count, background is 0."""
    labels, count = ndimage.label(mask.bits, structure=_EIGHT_CONNECTED)
    return labels, int(count)


def connected_components(mask: BinaryMask) -> list[np.ndarray]:
    """Partition the true pixels into 8-connected components.

    Each component is an ``(k, 2)`` int array of ``(row, col)`` coordinates
    in row-major order.  Components are ordered by their first pixel.
    """
    labels, count = label_components(mask)
    if count == 0:
        return []
    coords = np.argwhere(labels > 0)
    ids = labels[coords[:, 0], coords[:, 1]]
    order = np.argsort(ids, kind="stable")
    coords, ids = coords[order], ids[order]
    splits = np.flatnonzero(np.diff(ids)) + 1
    return list(np.split(coords, splits))


def sobel_magnitude(image: GrayMap) -> np.ndarray:
    v = image.values
    gy = ndimage.sobel(v, axis=0, mode="nearest")
    gx = ndimage.sobel(v, axis=1, mode="nearest")
    return np.hypot(gx, gy)


def edge_profile(image: GrayMap, edge_threshold: float = DEFAULT_EDGE_THRESHOLD) -> EdgeProfile:
    """Rows and columns holding Sobel edges of at least ``edge_threshold``.

    The gradient magnitude is normalized by its maximum.  Falls back to the
    full image extent when the edges are absent or span a single row or
    column, so the box constraints always stay feasible.
    """
    mag = sobel_magnitude(image)
    peak = mag.max()
    if peak <= 0.0:
        return EdgeProfile.full_extent(image.width, image.height)
    edges = (mag / peak) >= edge_threshold
    rows = np.flatnonzero(edges.any(axis=1))
    cols = np.flatnonzero(edges.any(axis=0))
    if rows.size < 2 or cols.size < 2:
        return EdgeProfile.full_extent(image.width, image.height)
    return EdgeProfile(tuple(int(r) for r in rows), tuple(int(c) for c in cols))
