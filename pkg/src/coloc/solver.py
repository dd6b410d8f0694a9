"""Per-image box optimization and the mediator iteration.

Each iteration minimizes the summed weighted squared deviation from three
reference boxes (co-saliency, saliency, and the previous solution) subject
to ordering and edge-extent bounds.  With diagonal costs this splits into a
vertical ``(t, b)`` and a horizontal ``(l, r)`` problem, each a convex
quadratic in two variables under ``lo <= x``, ``y <= hi``, ``y >= x + 1``,
solved exactly by enumerating KKT active sets.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .costs import rejection_cost
from .errors import (
    ColocError,
    DegenerateMap,
    DegenerateSaliency,
    DimensionMismatch,
    EmptyMask,
    InfeasibleConstraints,
)
from .geometry import BoundingBox, round_to_box, tight_box
from .imagery import DEFAULT_EDGE_THRESHOLD, EdgeProfile, GrayMap, edge_profile, otsu_mask
from .prior import PriorRegions, absolute_prior, quality_scores

REFERENCE_KEYS = ("c", "s", "o")
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class ReferenceSet:
    z_c: BoundingBox
    z_s: BoundingBox
    z_o: BoundingBox

    def __getitem__(self, key: str) -> BoundingBox:
        return {"c": self.z_c, "s": self.z_s, "o": self.z_o}[key]


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 2.0
    max_iters: int = 30
    clamp_delta: float | None = None  # None: half a pixel, see costs.default_clamp
    edge_threshold: float = DEFAULT_EDGE_THRESHOLD

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.clamp_delta is not None and not 0.0 < self.clamp_delta < 1.0:
            raise ValueError(f"clamp_delta must lie in (0, 1), got {self.clamp_delta}")


class Termination(str, enum.Enum):
    CONVERGED = "converged"
    FORCED_BREAK = "forced_break"


@dataclass(frozen=True)
class IterationRecord:
    box: BoundingBox
    anchor: BoundingBox
    cost_diagonals: dict  # key -> (4,) diagonal of M^k
    step_sq_norm: float


@dataclass
class IterationTrace:
    records: list = field(default_factory=list)
    termination: Termination | None = None
    note: str = ""  # set when one map was degenerate and the loop was skipped

    def __len__(self):
        return len(self.records)

    @property
    def final_box(self) -> BoundingBox:
        return self.records[-1].box

    def to_lines(self) -> list[str]:
        lines = ["iter\tt\tb\tl\tr\tstep_sq_norm\ttermination"]
        for i, rec in enumerate(self.records, start=1):
            term = self.termination.value if i == len(self.records) and self.termination else "-"
            t, b, l, r = rec.box.as_tuple()
            lines.append(f"{i}\t{t}\t{b}\t{l}\t{r}\t{rec.step_sq_norm:.4f}\t{term}")
        if self.note:
            lines.append(f"# {self.note}")
        return lines


def _objective_1d_pair(x, y, wx, tx, wy, ty):
    return wx * (x - tx) ** 2 + wy * (y - ty) ** 2


def _solve_pair(targets_x, weights_x, targets_y, weights_y, hold_x, hold_y, lo, hi):
    """Minimize sum_k wx_k (x - x_k)^2 + wy_k (y - y_k)^2 on the ordered strip.

    Feasible set: ``lo <= x``, ``y <= hi``, ``y >= x + 1``.  A coordinate with
    zero total weight has a flat objective and is held as close to its
    ``hold`` value as feasibility allows.
    """
    if hi < lo + 1:
        raise InfeasibleConstraints(f"edge extent [{lo}, {hi}] cannot hold two ordered coordinates")
    wx, wy = float(np.sum(weights_x)), float(np.sum(weights_y))
    if wx > 0 and wy > 0:
        cx = float(np.dot(weights_x, targets_x)) / wx
        cy = float(np.dot(weights_y, targets_y)) / wy
        shared = (wx * cx + wy * (cy - 1.0)) / (wx + wy)  # x on the face y = x + 1
        candidates = [
            (cx, cy),  # nothing active
            (lo, cy),  # x = lo
            (cx, hi),  # y = hi
            (shared, shared + 1.0),  # y = x + 1
            (lo, lo + 1.0),  # vertices
            (hi - 1.0, hi),
            (lo, hi),
        ]
        best, best_val = None, 0.0
        for x, y in candidates:
            if x < lo - _FEAS_TOL or y > hi + _FEAS_TOL or y - x < 1.0 - _FEAS_TOL:
                continue
            val = _objective_1d_pair(x, y, wx, cx, wy, cy)
            if best is None or val < best_val - 1e-15 * (1.0 + abs(best_val)):
                best, best_val = (x, y), val
        return best
    if wy > 0:
        cy = float(np.dot(weights_y, targets_y)) / wy
        y = min(max(cy, lo + 1.0), hi)
        x = min(max(hold_x, lo), y - 1.0)
        return x, y
    if wx > 0:
        cx = float(np.dot(weights_x, targets_x)) / wx
        x = min(max(cx, lo), hi - 1.0)
        y = min(max(hold_y, x + 1.0), hi)
        return x, y
    x = min(max(hold_x, lo), hi - 1.0)
    y = min(max(hold_y, x + 1.0), hi)
    return x, y


def solve_qp(refs: ReferenceSet, costs: Mapping[str, np.ndarray], edges: EdgeProfile) -> np.ndarray:
    """Global real-valued minimizer as a (t, b, l, r) vector.

    ``costs`` maps each of ``"c"``, ``"s"``, ``"o"`` to a diagonal 4x4
    matrix with nonnegative entries.
    """
    targets = np.array([refs[k].as_vector() for k in REFERENCE_KEYS])  # (3, 4)
    weights = np.array([np.diag(np.asarray(costs[k], dtype=np.float64)) for k in REFERENCE_KEYS])
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("cost diagonals must be finite and nonnegative")
    hold = refs.z_o.as_vector()
    row_lo, row_hi = edges.row_range
    col_lo, col_hi = edges.col_range
    t, b = _solve_pair(targets[:, 0], weights[:, 0], targets[:, 1], weights[:, 1], hold[0], hold[1], row_lo, row_hi)
    l, r = _solve_pair(targets[:, 2], weights[:, 2], targets[:, 3], weights[:, 3], hold[2], hold[3], col_lo, col_hi)
    return np.array([t, b, l, r], dtype=np.float64)


def qp_objective(z, refs: ReferenceSet, costs: Mapping[str, np.ndarray]) -> float:
    """Summed quadratic deviation cost of a box vector against all references."""
    z = np.asarray(z, dtype=np.float64)
    total = 0.0
    for k in REFERENCE_KEYS:
        d = z - refs[k].as_vector()
        total += float(d @ np.asarray(costs[k]) @ d)
    return total


def extract_reference_box(gmap: GrayMap) -> BoundingBox:
    """Extreme foreground pixels of the Otsu-binarized map."""
    mask = otsu_mask(gmap)
    if not mask.any():
        raise EmptyMask("Otsu foreground is empty")  # unreachable for a two-level map
    return tight_box(mask)


def _fallback_trace(box: BoundingBox, note: str) -> IterationTrace:
    rec = IterationRecord(box=box, anchor=box, cost_diagonals={}, step_sq_norm=0.0)
    return IterationTrace([rec], Termination.CONVERGED, note)


def colocalize_image(
    saliency: GrayMap,
    cosaliency: GrayMap,
    image: GrayMap,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[BoundingBox, IterationTrace]:
    """Run the mediator iteration for one image.

    The mediator starts at the co-saliency box.  Every pass re-anchors on the
    prior regions touching the mediator, rebuilds the three cost matrices,
    solves and rounds, and stops once the squared step is below
    ``cfg.epsilon`` or after ``cfg.max_iters`` passes.
    """
    if not (saliency.shape == cosaliency.shape == image.shape):
        raise DimensionMismatch(
            f"image {image.shape}, saliency {saliency.shape}, co-saliency {cosaliency.shape} differ"
        )
    height, width = image.shape
    z_c = z_s = None
    try:
        z_c = extract_reference_box(cosaliency)
    except DegenerateMap:
        pass
    try:
        z_s = extract_reference_box(saliency)
    except DegenerateMap:
        pass
    # with exactly one usable map there is nothing to balance
    if z_c is None and z_s is None:
        raise DegenerateSaliency("both saliency and co-saliency maps are degenerate")
    if z_s is None:
        return z_c, _fallback_trace(z_c, "saliency map degenerate; co-saliency box returned")
    if z_c is None:
        return z_s, _fallback_trace(z_s, "co-saliency map degenerate; saliency box returned")

    prior = absolute_prior(saliency, cosaliency, quality_scores(saliency, cosaliency))
    try:
        regions = PriorRegions(prior)
    except DegenerateMap:
        regions = None
    edges = edge_profile(image, cfg.edge_threshold)

    z_o = z_c
    trace = IterationTrace()
    for _ in range(cfg.max_iters):
        refs = ReferenceSet(z_c=z_c, z_s=z_s, z_o=z_o)
        anchor = regions.anchored_box(z_o) if regions is not None else z_o
        costs = {k: rejection_cost(anchor, refs[k], width, height, cfg.clamp_delta) for k in REFERENCE_KEYS}
        z = round_to_box(solve_qp(refs, costs, edges), width, height)
        step = float(np.sum((z.as_vector() - z_o.as_vector()) ** 2))
        trace.records.append(
            IterationRecord(z, anchor, {k: np.diag(costs[k]).copy() for k in REFERENCE_KEYS}, step)
        )
        if step < cfg.epsilon:
            trace.termination = Termination.CONVERGED
            return z, trace
        z_o = z
    trace.termination = Termination.FORCED_BREAK
    return z_o, trace


@dataclass
class CaseResult:
    box: BoundingBox | None
    trace: IterationTrace | None
    error: ColocError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_case(case, cfg):
    image, saliency, cosaliency = case
    try:
        box, trace = colocalize_image(saliency, cosaliency, image, cfg)
    except ColocError as exc:
        return CaseResult(None, None, exc)
    return CaseResult(box, trace)


def colocalize_set(
    cases: Sequence[tuple[GrayMap, GrayMap, GrayMap]],
    cfg: SolverConfig = SolverConfig(),
    jobs: int = 1,
) -> list[CaseResult]:
    """Co-localize each ``(image, saliency, cosaliency)`` case independently.

    Failures are captured per case.  Output order follows input order for any
    ``jobs``.
    """
    if jobs <= 1 or len(cases) <= 1:
        return [_run_case(c, cfg) for c in cases]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda c: _run_case(c, cfg), cases))

