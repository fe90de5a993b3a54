"""Region similarity J, contour accuracy F and their sequence statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .geometry import mask_iou


def _same_shape(pred, gt):
    if pred.shape != gt.shape:
        raise ValueError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")


def region_similarity(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mask IoU; two empty masks count as a perfect match."""
    _same_shape(pred, gt)
    if not pred.any() and not gt.any():
        return 1.0
    return mask_iou(pred, gt)


def boundary(mask: np.ndarray) -> np.ndarray:
    """Set pixels with at least one 4-neighbour outside the mask (frame edge counts as outside)."""
    mask = np.asarray(mask, dtype=np.bool_)
    inner = ndimage.binary_erosion(mask, structure=ndimage.generate_binary_structure(2, 1), border_value=0)
    return mask & ~inner


def default_tolerance(width: int, height: int) -> int:
    return int(math.ceil(0.008 * math.hypot(width, height)))


def contour_accuracy(pred: np.ndarray, gt: np.ndarray, tol: float | None = None) -> float:
    """Boundary F-measure with Euclidean matching tolerance ``tol`` pixels."""
    _same_shape(pred, gt)
    if tol is None:
        tol = default_tolerance(pred.shape[1], pred.shape[0])
    bp = boundary(pred)
    bg = boundary(gt)
    np_, ng = int(bp.sum()), int(bg.sum())
    if np_ == 0 and ng == 0:
        return 1.0
    if np_ == 0 or ng == 0:
        return 0.0
    dist_to_gt = ndimage.distance_transform_edt(~bg)
    dist_to_pred = ndimage.distance_transform_edt(~bp)
    precision = float(np.count_nonzero(dist_to_gt[bp] <= tol)) / np_
    recall = float(np.count_nonzero(dist_to_pred[bg] <= tol)) / ng
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def aggregate(series: Sequence[float]) -> tuple[float, float, float]:
    """(mean, recall above 0.5, decay) of a per-frame series.

    Decay is the mean of the first quarter of frames minus the mean of the
    last quarter; series shorter than four frames compare first and last.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot aggregate an empty series")
    mean = float(x.mean())
    recall = float(np.mean(x > 0.5))
    if x.size >= 4:
        bins = np.array_split(x, 4)
        decay = float(bins[0].mean() - bins[-1].mean())
    else:
        decay = float(x[0] - x[-1])
    return mean, recall, decay


@dataclass
class SequenceScores:
    """Per-object per-frame J and F."""

    frames: list[int]
    j: dict[int, list[float]]
    f: dict[int, list[float]]

    def g(self, obj: int) -> list[float]:
        return [(a + b) / 2.0 for a, b in zip(self.j[obj], self.f[obj])]

    def summary(self) -> dict[str, float]:
        """DAVIS-style averages: statistics per object, then the mean over objects."""
        out: dict[str, float] = {}
        for name, table in (("J", self.j), ("F", self.f)):
            stats = np.array([aggregate(v) for v in table.values()])
            out[f"{name}_mean"], out[f"{name}_recall"], out[f"{name}_decay"] = (float(s) for s in stats.mean(axis=0))
        out["G_mean"] = (out["J_mean"] + out["F_mean"]) / 2.0
        return out


def evaluate_labels(
    labels: Sequence[np.ndarray],
    gt_masks: Sequence[Mapping[int, np.ndarray]],
    object_ids: Sequence[int],
    *,
    include_first: bool = False,
    tol: float | None = None,
) -> SequenceScores:
    """Score label grids (pixel value = object id) against per-object ground truth."""
    if len(labels) != len(gt_masks):
        raise ValueError("prediction and ground truth cover different frame counts")
    start = 0 if include_first else 1
    frames = list(range(start, len(labels)))
    if not frames:
        raise ValueError("no frames to evaluate")
    j = {o: [] for o in object_ids}
    f = {o: [] for o in object_ids}
    for t in frames:
        for o in object_ids:
            pred = labels[t] == o
            gt = gt_masks[t].get(o)
            if gt is None:
                gt = np.zeros_like(pred)
            j[o].append(region_similarity(pred, gt))
            f[o].append(contour_accuracy(pred, gt, tol))
    return SequenceScores(frames, j, f)
