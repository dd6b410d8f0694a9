"""Object co-localization from saliency and co-saliency maps.

A mediator box, started at the co-saliency box, is refined by repeatedly
solving a small quadratic program that trades off the saliency box, the
co-saliency box and the mediator itself.
"""

from .errors import ColocError
from .geometry import BoundingBox, iou, round_to_box, tight_box, union_box
from .imagery import EdgeProfile, GrayMap, binarize, edge_profile, load_gray_map, otsu_threshold
from .solver import SolverConfig, colocalize_image, colocalize_set, solve_qp

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "ColocError",
    "EdgeProfile",
    "GrayMap",
    "SolverConfig",
    "binarize",
    "colocalize_image",
    "colocalize_set",
    "edge_profile",
    "iou",
    "load_gray_map",
    "otsu_threshold",
    "round_to_box",
    "solve_qp",
    "tight_box",
    "union_box",
]
