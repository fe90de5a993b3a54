"""Box and raster primitives."""

from __future__ import annotations

import numpy as np

from . import kernels
from .model import BBox


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "grids"):
    if a.shape[:2] != b.shape[:2]:
        raise ValueError(f"{what} differ in size: {a.shape[:2]} vs {b.shape[:2]}")


def bbox_iou(a: BBox, b: BBox) -> float:
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two mask grids; 0 when both are empty."""
    _check_same_shape(a, b, "masks")
    inter, union = kernels.overlap_counts(np.ascontiguousarray(a, dtype=np.bool_), np.ascontiguousarray(b, dtype=np.bool_))
    if union == 0:
        return 0.0
    return inter / union


def warp_mask(mask: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Forward-warp a mask by a dense flow field.

    Every set pixel moves to the nearest integer of ``(x + dx, y + dy)``
    (halves round up); targets outside the grid are dropped and collisions
    merge.
    """
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must have shape (H, W, 2), got {flow.shape}")
    _check_same_shape(mask, flow, "mask and flow")
    return kernels.warp_forward(np.ascontiguousarray(mask, dtype=np.bool_), np.ascontiguousarray(flow))


def gaussian_value(b: BBox, x, y):
    """Unit-peak axis-aligned Gaussian of ``b`` (sigmas w/2, h/2) at frame coords."""
    cx, cy = b.center
    sx = b.width / 2.0
    sy = b.height / 2.0
    return np.exp(-0.5 * (((np.asarray(x) - cx) / sx) ** 2 + ((np.asarray(y) - cy) / sy) ** 2))


def gaussian_map(b: BBox, width: int, height: int) -> np.ndarray:
    """Gaussian weight map sampled at pixel centres."""
    if width <= 0 or height <= 0:
        raise ValueError("grid must be positive")
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    cx, cy = b.center
    gx = np.exp(-0.5 * ((xs - cx) / (b.width / 2.0)) ** 2)
    gy = np.exp(-0.5 * ((ys - cy) / (b.height / 2.0)) ** 2)
    return np.outer(gy, gx)


def crop_with_margin(b: BBox, r: float, width: int, height: int) -> BBox:
    """Grow ``b`` by ``r * w`` / ``r * h`` on every side, clipped to the frame."""
    if r < 0:
        raise ValueError("margin ratio must be non-negative")
    mx = r * b.width
    my = r * b.height
    x0 = max(0.0, b.x_min - mx)
    y0 = max(0.0, b.y_min - my)
    x1 = min(float(width), b.x_max + mx)
    y1 = min(float(height), b.y_max + my)
    if not (x0 < x1 and y0 < y1):
        raise ValueError(f"box {b.as_tuple()} lies outside the {width}x{height} frame")
    return BBox(x0, y0, x1, y1)


def box_region(b: BBox, width: int, height: int) -> tuple[slice, slice]:
    """Row/column slices of the pixels whose centres fall inside ``b``."""
    c0 = max(0, int(np.ceil(b.x_min - 0.5)))
    c1 = min(width, int(np.floor(b.x_max - 0.5)) + 1)
    r0 = max(0, int(np.ceil(b.y_min - 0.5)))
    r1 = min(height, int(np.floor(b.y_max - 0.5)) + 1)
    return slice(r0, max(r0, r1)), slice(c0, max(c0, c1))


def box_mask(b: BBox, width: int, height: int) -> np.ndarray:
    out = np.zeros((height, width), dtype=np.bool_)
    out[box_region(b, width, height)] = True
    return out
