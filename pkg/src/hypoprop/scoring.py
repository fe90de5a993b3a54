"""Per-step hybrid track score and its accumulation."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .geometry import bbox_iou, mask_iou, warp_mask
from .model import BBox, Params, Proposal


def _box(p) -> BBox:
    return p.box if isinstance(p, Proposal) else p


def motion_score(cur, prev_same, prev_others: Sequence, w_f: float, w_n: float) -> float:
    """Continuity with the track's own previous box plus the competitor penalty.

    Accepts proposals or bare boxes. The penalty uses the largest IoU against
    ``prev_others`` and vanishes when there are none.
    """
    cb = _box(cur)
    s = w_f * bbox_iou(cb, _box(prev_same))
    if len(prev_others):
        s += w_n * max(bbox_iou(cb, _box(o)) for o in prev_others)
    return s


def propagation_score(cur_mask: np.ndarray, prev_mask: np.ndarray, flow: np.ndarray) -> float:
    """IoU of the current mask with the previous mask carried forward by ``flow``."""
    return mask_iou(cur_mask, warp_mask(prev_mask, flow))


def root_score(p_d: float) -> float:
    if not 0.0 < p_d < 1.0:
        raise ValueError(f"detection probability must lie in (0, 1), got {p_d}")
    return math.log(1.0 - p_d)


def step_score(s_m: float, s_p: float, params: Params, root: bool = False) -> float:
    """``ln(1 - P_D)`` for a tree root, ``w_m * s_m + w_p * s_p`` otherwise."""
    if root:
        return root_score(params.p_d)
    return params.w_m * s_m + params.w_p * s_p


def accumulate(parent_cumulative: float, step: float) -> float:
    return parent_cumulative + step
