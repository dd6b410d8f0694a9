"""Seeded synthetic co-localization datasets.

Each image holds one axis-aligned rectangle.  The saliency map is the
rectangle mask plus noise, and in a fraction of images an extra bright
blob placed away from the object; the co-saliency map is the mask with
milder noise.  Distractor placements are written to ``distractors.csv``
so evaluations can single those images out.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import BoundingBox
from .errors import WriteFailure
from .harness import BOXES_FILE, MANIFEST_FILE
from .imagery import GrayMap, save_gray_map

SALIENCY_NOISE = 0.1
COSALIENCY_NOISE = 0.05
IMAGE_NOISE = 0.01
DISTRACTOR_RATE = 0.3
DISTRACTOR_GAP = 3
DISTRACTOR_FILE = "distractors.csv"
MIN_SIZE = 32


def _rectangle(rng, size):
    lo, hi = size // 5, size // 2
    h, w = rng.integers(lo, hi + 1, size=2)
    t = int(rng.integers(0, size - h + 1))
    l = int(rng.integers(0, size - w + 1))
    return BoundingBox(t, t + int(h) - 1, l, l + int(w) - 1)


def _place_distractor(rng, size, rect, tries=200):
    side = max(3, size // 8)
    for _ in range(tries):
        t = int(rng.integers(0, size - side + 1))
        l = int(rng.integers(0, size - side + 1))
        box = BoundingBox(t, t + side - 1, l, l + side - 1)
        row_gap = max(rect.t - box.b, box.t - rect.b)
        col_gap = max(rect.l - box.r, box.l - rect.r)
        if max(row_gap, col_gap) > DISTRACTOR_GAP:
            return box
    return None


def _fill(shape, box):
    m = np.zeros(shape)
    m[box.t : box.b + 1, box.l : box.r + 1] = 1.0
    return m


def make_dataset(out_root, n_per_class=20, size=128, seed=0, n_classes=3) -> list[str]:
    """Write a synthetic dataset in the standard layout; returns class names."""
    try:
        return _write_dataset(Path(out_root), n_per_class, size, seed, n_classes)
    except OSError as exc:
        raise WriteFailure(f"{out_root}: {exc}") from exc


def _write_dataset(out_root, n_per_class, size, seed, n_classes):
    if size < MIN_SIZE:
        raise ValueError(f"image size must be at least {MIN_SIZE}, got {size}")
    if n_per_class < 1 or n_classes < 1:
        raise ValueError("need at least one class and one image per class")
    rng = np.random.default_rng(seed)
    shape = (size, size)
    classes = [f"class{i + 1}" for i in range(n_classes)]
    for cls in classes:
        cdir = out_root / cls
        bg, fg = rng.uniform(0.1, 0.3), rng.uniform(0.6, 0.9)
        gt_lines, distractor_lines = [], []
        for i in range(n_per_class):
            stem = f"{cls}_{i:03d}"
            rect = _rectangle(rng, size)
            mask = _fill(shape, rect)
            image = bg + (fg - bg) * mask + rng.normal(0.0, IMAGE_NOISE, shape)
            sal = mask + rng.normal(0.0, SALIENCY_NOISE, shape)
            if rng.random() < DISTRACTOR_RATE:
                blob = _place_distractor(rng, size, rect)
                if blob is not None:
                    sal = np.maximum(sal, _fill(shape, blob))
                    distractor_lines.append(f"{stem},{blob.t},{blob.b},{blob.l},{blob.r}")
            cosal = mask + rng.normal(0.0, COSALIENCY_NOISE, shape)
            for sub, arr in (("images", image), ("saliency", sal), ("cosaliency", cosal)):
                save_gray_map(GrayMap(np.clip(arr, 0.0, 1.0)), cdir / sub / f"{stem}.png")
            gt_lines.append(f"{stem},{rect.t},{rect.b},{rect.l},{rect.r}")
        (cdir / BOXES_FILE).write_text("# stem,t,b,l,r\n" + "\n".join(gt_lines) + "\n")
        (cdir / DISTRACTOR_FILE).write_text("# stem,t,b,l,r\n" + "".join(l + "\n" for l in distractor_lines))
        manifest = {"provenance": "synthetic", "seed": seed, "size": size}
        (cdir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return classes
