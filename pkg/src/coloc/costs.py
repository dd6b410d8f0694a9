"""Per-reference rejection costs.

Each reference box k gets a 4x4 matrix ``-J * log(rho)`` where J is its IoU
with the anchored box and rho holds the normalized per-coordinate deviations
on the diagonal and ones elsewhere.  Off-diagonals therefore vanish, and a
coordinate that agrees with the anchored box is expensive to move away from.
"""

from __future__ import annotations

import numpy as np

from .geometry import BoundingBox, iou


def default_clamp(width: int, height: int) -> float:
    """Half a pixel of normalized deviation on the longer image side."""
    return 1.0 / (2.0 * max(width, height))


def deviation_ratios(anchor: BoundingBox, ref: BoundingBox, width: int, height: int) -> np.ndarray:
    return np.array(
        [
            abs(anchor.t - ref.t) / height,
            abs(anchor.b - ref.b) / height,
            abs(anchor.l - ref.l) / width,
            abs(anchor.r - ref.r) / width,
        ]
    )


def deviation_matrix(anchor: BoundingBox, ref: BoundingBox, width: int, height: int) -> np.ndarray:
    rho = np.ones((4, 4))
    np.fill_diagonal(rho, deviation_ratios(anchor, ref, width, height))
    return rho


def cost_matrix(jaccard: float, ratios, delta: float) -> np.ndarray:
    """``-jaccard * log(clip(rho, delta, 1))`` for a rho with the given diagonal."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"clamp delta must lie in (0, 1), got {delta}")
    diag = -jaccard * np.log(np.clip(np.asarray(ratios, dtype=np.float64), delta, 1.0))
    # -0.0 from a zero Jaccard or a unit ratio is normalized to +0.0
    return np.diag(diag + 0.0)


def rejection_cost(anchor: BoundingBox, ref: BoundingBox, width: int, height: int, delta: float | None = None) -> np.ndarray:
    """Diagonal cost matrix for deviating from ``ref`` (natural log).

    Ratios are clamped to ``[delta, 1]`` so an exact coordinate match yields
    a large but finite cost.
    """
    if delta is None:
        delta = default_clamp(width, height)
    return cost_matrix(iou(anchor, ref), deviation_ratios(anchor, ref, width, height), delta)
