"""Constant-velocity box prediction and the IoU gate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import bbox_iou
from .model import BBox, Proposal


@dataclass(frozen=True)
class TrackHistory:
    """Chronological box centres and sizes along one track path."""

    centers: np.ndarray  # (n, 2)
    sizes: np.ndarray  # (n, 2)

    def __post_init__(self):
        if len(self.centers) == 0:
            raise ValueError("track history is empty")
        if len(self.centers) != len(self.sizes):
            raise ValueError("centres and sizes differ in length")

    @classmethod
    def from_boxes(cls, boxes: Sequence[BBox]) -> "TrackHistory":
        if len(boxes) == 0:
            raise ValueError("track history is empty")
        centers = np.array([b.center for b in boxes], dtype=np.float64)
        sizes = np.array([(b.width, b.height) for b in boxes], dtype=np.float64)
        return cls(centers, sizes)

    def __len__(self):
        return len(self.centers)


def estimate_velocity(h: TrackHistory, n: int) -> np.ndarray:
    """Mean of the last ``min(n, len(h) - 1)`` centre differences (pixels/frame)."""
    if n < 1:
        raise ValueError("window must be >= 1")
    m = min(n, len(h) - 1)
    if m <= 0:
        return np.zeros(2)
    # the sum of consecutive differences telescopes
    return (h.centers[-1] - h.centers[-1 - m]) / m


def predict_candidate(h: TrackHistory, n: int) -> BBox:
    """Box at ``last centre + velocity`` with the mean of the last ``n`` sizes."""
    v = estimate_velocity(h, n)
    cx, cy = h.centers[-1] + v
    w, hh = h.sizes[-min(n, len(h)):].mean(axis=0)
    return BBox.from_center(float(cx), float(cy), float(w), float(hh))


def gate(candidate: BBox, proposals: Sequence[Proposal], th_g: float) -> tuple[list[Proposal], list[Proposal]]:
    """Split proposals by ``iou(candidate, p) > th_g``; order is preserved."""
    inside: list[Proposal] = []
    outside: list[Proposal] = []
    for p in proposals:
        (inside if bbox_iou(candidate, p.box) > th_g else outside).append(p)
    return inside, outside
