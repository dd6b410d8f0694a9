"""Map quality scores, the fused object prior, and the anchored box."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMap, DimensionMismatch
from .geometry import BoundingBox, tight_box
from .imagery import BinaryMask, GrayMap, label_components, otsu_mask, otsu_threshold

QUALITY_FLOOR = 0.05

# Fusion weights are snapped to this dyadic grid.  Rescaling both scores by a
# common factor perturbs q_s / (q_s + q_c) by a few ulps at most; snapping
# absorbs that so the fused map depends on the ratio alone, bit for bit.
_WEIGHT_GRID = 2.0**32


@dataclass(frozen=True)
class QualityScores:
    q_s: float
    q_c: float

    def __post_init__(self):
        if not (self.q_s > 0 and self.q_c > 0):
            raise ValueError(f"quality scores must be positive, got {self.q_s}, {self.q_c}")

    def saliency_weight(self) -> float:
        w = self.q_s / (self.q_s + self.q_c)
        return float(np.floor(w * _WEIGHT_GRID + 0.5) / _WEIGHT_GRID)


def quality_score(gmap: GrayMap, floor: float = QUALITY_FLOOR) -> float:
    """Foreground/background mean contrast under the Otsu split, floored.

    Raises DegenerateMap for single-level maps; callers usually substitute
    the floor in that case.
    """
    fg = otsu_mask(gmap).bits
    contrast = gmap.values[fg].mean() - gmap.values[~fg].mean()
    return float(max(contrast, floor))


def quality_scores(saliency: GrayMap, cosaliency: GrayMap) -> QualityScores:
    def score(m):
        try:
            return quality_score(m)
        except DegenerateMap:
            return QUALITY_FLOOR

    return QualityScores(score(saliency), score(cosaliency))


def absolute_prior(saliency: GrayMap, cosaliency: GrayMap, q: QualityScores) -> GrayMap:
    """Fuse the two maps, lifting weakly salient pixels that are co-salient.

    Where saliency is below its Otsu threshold and co-saliency is above its
    own, the pixel takes the quality-weighted mean of both maps; everywhere
    else it keeps the saliency value unchanged.
    """
    if saliency.shape != cosaliency.shape:
        raise DimensionMismatch(f"saliency {saliency.shape} vs co-saliency {cosaliency.shape}")
    s, c = saliency.values, cosaliency.values
    lift = (s < otsu_threshold(saliency)) & (c > otsu_threshold(cosaliency))
    w = q.saliency_weight()
    fused = np.where(lift, w * s + (1.0 - w) * c, s)
    return GrayMap(np.clip(fused, 0.0, 1.0))


class PriorRegions:
    """Foreground components of a static prior, labeled once.

    The prior does not change across iterations, only the mediator box does,
    so the labeling is cached and each query is a cheap overlap lookup.
    Raises DegenerateMap if the prior cannot be thresholded.
    """

    def __init__(self, prior: GrayMap):
        self.prior = prior
        self.labels, self.count = label_components(otsu_mask(prior))

    def anchored_box(self, mediator: BoundingBox) -> BoundingBox:
        window = self.labels[mediator.t : mediator.b + 1, mediator.l : mediator.r + 1]
        hit = np.unique(window[window > 0])
        if hit.size == 0:
            return mediator
        keep = np.isin(self.labels, hit)
        return tight_box(BinaryMask(keep))


def anchored_box(prior: GrayMap, mediator: BoundingBox) -> BoundingBox:
    """Tight box around the whole prior regions touching ``mediator``.

    Regions are 8-connected components of the Otsu-binarized prior; a region
    counts if any of its pixels lies in the mediator box, and it is kept
    entire rather than clipped.  With no touching region the mediator itself
    is returned.
    """
    return PriorRegions(prior).anchored_box(mediator)
