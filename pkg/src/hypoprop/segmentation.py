"""Mask generators, probability thresholding and multi-object merging."""

from __future__ import annotations

import zlib
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import ndimage

from .geometry import bbox_iou, box_region, crop_with_margin, gaussian_map, warp_mask
from .model import BBox, Params


class MaskGenerator:
    """Produces a probability grid for the object inside ``box``.

    Implementations get the frame index, an optional frame image and the
    prior mask (the parent's mask carried forward by optical flow, or an
    empty grid for a restarted track). The output covers the whole frame and
    must be zero outside ``crop_with_margin(box, margin)``.
    """

    name = "base"

    def __call__(self, box: BBox, prior: np.ndarray, *, frame_index: int, margin: float, image=None) -> np.ndarray:
        raise NotImplementedError


def _crop_slices(box: BBox, margin: float, shape) -> tuple[slice, slice]:
    h, w = shape[:2]
    return box_region(crop_with_margin(box, margin, w, h), w, h)


class FlowPropGenerator(MaskGenerator):
    """Prior mask restricted to the margin crop, optionally box-blurred.

    With ``radius=0`` the output is exactly the cropped prior. A positive
    radius averages over a ``(2r+1)^2`` window; note that repeated blurring
    followed by a threshold below 0.5 dilates the mask frame after frame.
    """

    name = "flowprop"

    def __init__(self, radius: int = 0):
        if radius < 0:
            raise ValueError("smoothing radius must be non-negative")
        self.radius = int(radius)

    def __call__(self, box, prior, *, frame_index, margin, image=None):
        rs, cs = _crop_slices(box, margin, prior.shape)
        out = np.zeros(prior.shape[:2], dtype=np.float32)
        patch = prior[rs, cs].astype(np.float32)
        if self.radius > 0 and patch.size:
            patch = ndimage.uniform_filter(patch, size=2 * self.radius + 1, mode="constant")
        out[rs, cs] = np.clip(patch, 0.0, 1.0)
        return out


class OracleGenerator(MaskGenerator):
    """Segments from ground truth: an upper bound for pipeline tests.

    The object whose ground-truth bounding box best overlaps ``box`` is
    returned inside the crop. With ``noise > 0`` each boundary pixel in the
    crop flips with that probability, seeded per (seed, frame, box).
    """

    name = "oracle"

    def __init__(self, gt_masks: Mapping[int, Mapping[int, np.ndarray]], noise: float = 0.0, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        self.gt_masks = gt_masks
        self.noise = float(noise)
        self.seed = int(seed)
        self._boxes: dict[tuple[int, int], Optional[BBox]] = {}

    def _gt_box(self, frame_index, obj, mask):
        key = (frame_index, obj)
        if key not in self._boxes:
            self._boxes[key] = BBox.from_mask(mask) if mask.any() else None
        return self._boxes[key]

    def __call__(self, box, prior, *, frame_index, margin, image=None):
        out = np.zeros(prior.shape[:2], dtype=np.float32)
        masks = self.gt_masks.get(frame_index)
        if masks is None:
            raise KeyError(f"oracle generator has no ground truth for frame {frame_index}")
        best, best_iou = None, 0.0
        for obj in sorted(masks):
            gb = self._gt_box(frame_index, obj, masks[obj])
            if gb is None:
                continue
            v = bbox_iou(gb, box)
            if v > best_iou:
                best, best_iou = obj, v
        if best is None:
            return out
        rs, cs = _crop_slices(box, margin, prior.shape)
        gt = masks[best]
        patch = gt[rs, cs].copy()
        if self.noise > 0.0 and patch.size:
            edge = gt ^ ndimage.binary_erosion(gt) | ndimage.binary_dilation(gt) ^ gt
            tag = zlib.crc32(np.asarray(box.as_tuple(), dtype=np.float64).tobytes())
            rng = np.random.default_rng([self.seed, frame_index, tag])
            flip = edge[rs, cs] & (rng.random(patch.shape) < self.noise)
            patch ^= flip
        out[rs, cs] = patch
        return out


def make_generator(name: str, gt_masks=None, *, noise: float = 0.0, seed: int = 0, radius: int = 0) -> MaskGenerator:
    if name == "flowprop":
        return FlowPropGenerator(radius=radius)
    if name == "oracle":
        if gt_masks is None:
            raise ValueError("the oracle generator needs ground-truth masks")
        return OracleGenerator(gt_masks, noise=noise, seed=seed)
    raise ValueError(f"unknown mask generator {name!r} (expected 'oracle' or 'flowprop')")


def generate_mask(
    gen: MaskGenerator,
    image,
    box: BBox,
    prior: np.ndarray,
    params: Params,
    frame_index: int,
) -> np.ndarray:
    """Run ``gen`` and enforce its output contract."""
    z = gen(box, prior, frame_index=frame_index, margin=params.r, image=image)
    z = np.asarray(z)
    if z.shape != prior.shape[:2]:
        raise ValueError(f"{gen.name} generator returned shape {z.shape}, expected {prior.shape[:2]}")
    if not np.all(np.isfinite(z)) or z.min(initial=0.0) < 0.0 or z.max(initial=0.0) > 1.0:
        raise ValueError(f"{gen.name} generator returned values outside [0, 1]")
    rs, cs = _crop_slices(box, params.r, prior.shape)
    inside = np.zeros(z.shape, dtype=np.bool_)
    inside[rs, cs] = True
    if np.any(z[~inside] != 0):
        raise ValueError(f"{gen.name} generator wrote outside the crop window")
    return z


def threshold_mask(z: np.ndarray, th_m: float) -> np.ndarray:
    return np.asarray(z) > th_m


def merge_masks(
    masks: Sequence[np.ndarray],
    probs: Sequence[np.ndarray],
    prev_masks: Sequence[np.ndarray],
    flow: np.ndarray,
    boxes: Sequence[Optional[BBox]],
    lam: float,
) -> np.ndarray:
    """Merge per-object masks into one label grid (0 = background, i+1 = object i).

    Pixels claimed by a single mask take that label. Each 4-connected patch of
    multiply-claimed pixels goes to one of its two claimants with the largest
    probability mass: the stronger one wins outright when its Gaussian-weighted
    mass, scaled by ``lam``, still beats the runner-up; otherwise the
    Gaussian-weighted overlap of the flow-warped previous masks decides, and
    the runner-up takes the patch unless the leader is strictly ahead there.
    """
    c = len(masks)
    if c == 0:
        raise ValueError("no object masks to merge")
    if not (len(probs) == len(prev_masks) == len(boxes) == c):
        raise ValueError("per-object inputs differ in length")
    shape = masks[0].shape
    for grid in (*masks, *probs, *prev_masks):
        if grid.shape != shape:
            raise ValueError(f"grid of shape {grid.shape} does not match {shape}")
    if flow.shape[:2] != shape:
        raise ValueError("flow does not match the mask grid")
    h, w = shape

    stack = np.stack([np.asarray(m, dtype=np.bool_) for m in masks])
    count = stack.sum(axis=0)
    labels = np.zeros(shape, dtype=np.int32)
    single = count == 1
    labels[single] = np.argmax(stack[:, single], axis=0) + 1

    patches, npatch = ndimage.label(count >= 2)
    if npatch == 0:
        return labels

    gauss: dict[int, np.ndarray] = {}
    warped: dict[int, np.ndarray] = {}

    def g(i):
        if i not in gauss:
            gauss[i] = gaussian_map(boxes[i], w, h) if boxes[i] is not None else np.zeros(shape)
        return gauss[i]

    def q(i):
        if i not in warped:
            warped[i] = warp_mask(prev_masks[i], flow)
        return warped[i]

    for k, sl in enumerate(ndimage.find_objects(patches), start=1):
        region = patches[sl] == k
        claimants = [i for i in range(c) if np.any(stack[i][sl] & region)]
        mass = {i: float(np.asarray(probs[i][sl], dtype=np.float64)[region].sum()) for i in claimants}
        ranked = sorted(claimants, key=lambda i: (-mass[i], i))
        top, second = ranked[0], ranked[1]

        def weighted(i, grid):
            return float((g(i)[sl] * np.asarray(grid[sl], dtype=np.float64))[region].sum())

        if weighted(top, probs[top]) * lam > weighted(second, probs[second]):
            winner = top
        elif weighted(top, q(top)) > weighted(second, q(second)):
            winner = top
        else:
            winner = second

        # pixels the winner does not claim fall back to their best-ranked claimant
        order = [winner] + [i for i in ranked if i != winner]
        sub = labels[sl]
        todo = region.copy()
        for i in order:
            take = todo & stack[i][sl]
            sub[take] = i + 1
            todo &= ~take
    return labels
