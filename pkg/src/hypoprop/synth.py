"""Synthetic scenarios: moving shapes, exact flow and a simulated detector."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .geometry import bbox_iou
from .model import BBox, Proposal
from .scenario import ScenarioFrame, ScenarioStream


@dataclass
class ObjectSpec:
    """A rectangle or ellipse moving with constant velocity.

    ``start`` is the centre at frame 0. ``depth`` orders drawing: larger
    values sit in front. ``occlusion`` is a half-open frame range during
    which the object is hidden from view (empty ground truth).
    """

    shape: str = "rect"
    size: tuple[float, float] = (20.0, 20.0)
    start: tuple[float, float] = (32.0, 32.0)
    velocity: tuple[float, float] = (0.0, 0.0)
    depth: int = 0
    occlusion: Optional[tuple[int, int]] = None
    intensity: int = 200

    def center(self, t: int) -> tuple[float, float]:
        return (self.start[0] + self.velocity[0] * t, self.start[1] + self.velocity[1] * t)

    def hidden(self, t: int) -> bool:
        return self.occlusion is not None and self.occlusion[0] <= t < self.occlusion[1]


@dataclass
class DetectorConfig:
    miss_prob: float = 0.0
    jitter: float = 0.0
    fp_rate: float = 0.0  # expected false positives per frame
    confidence: tuple[float, float] = (0.9, 1.0)
    fp_confidence: tuple[float, float] = (0.05, 0.6)
    fp_size: tuple[float, float] = (8.0, 32.0)
    miss_on_occlusion: bool = True


@dataclass
class SynthConfig:
    width: int = 128
    height: int = 128
    num_frames: int = 30
    objects: list[ObjectSpec] = field(default_factory=list)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    seed: int = 0
    th_p: float = 0.05
    th_n: float = 0.6
    render_images: bool = False

    def validate(self) -> "SynthConfig":
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame size must be positive")
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if not self.objects:
            raise ValueError("at least one object is required")
        d = self.detector
        for name in ("miss_prob",):
            if not 0.0 <= getattr(d, name) <= 1.0:
                raise ValueError(f"detector.{name} must lie in [0, 1]")
        if d.jitter < 0 or d.fp_rate < 0:
            raise ValueError("detector jitter and fp_rate must be non-negative")
        for lo, hi in (d.confidence, d.fp_confidence):
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError("confidence ranges must satisfy 0 <= lo <= hi <= 1")
        for i, ob in enumerate(self.objects):
            if ob.shape not in ("rect", "ellipse"):
                raise ValueError(f"objects[{i}]: unknown shape {ob.shape!r}")
            if ob.size[0] <= 0 or ob.size[1] <= 0:
                raise ValueError(f"objects[{i}]: zero-size object")
            if ob.hidden(0):
                raise ValueError(f"objects[{i}]: must be visible in the annotated first frame")
        return self

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthConfig":
        data = dict(data)
        objs = []
        for ob in data.pop("objects", []):
            ob = dict(ob)
            for k in ("size", "start", "velocity", "occlusion"):
                if ob.get(k) is not None:
                    ob[k] = tuple(ob[k])
            objs.append(ObjectSpec(**ob))
        det = dict(data.pop("detector", {}))
        for k in ("confidence", "fp_confidence", "fp_size"):
            if k in det:
                det[k] = tuple(det[k])
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(objects=objs, detector=DetectorConfig(**det), **data).validate()

    @classmethod
    def load(cls, path) -> "SynthConfig":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() in (".yml", ".yaml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)


def rasterize(ob: ObjectSpec, t: int, width: int, height: int) -> np.ndarray:
    """Amodal silhouette of ``ob`` at frame ``t``, sampled at pixel centres."""
    cx, cy = ob.center(t)
    hw, hh = ob.size[0] / 2.0, ob.size[1] / 2.0
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    if ob.shape == "rect":
        inx = (xs >= cx - hw) & (xs < cx + hw)
        iny = (ys >= cy - hh) & (ys < cy + hh)
        return iny[:, None] & inx[None, :]
    u = ((xs - cx) / hw) ** 2
    v = ((ys - cy) / hh) ** 2
    return (v[:, None] + u[None, :]) <= 1.0


def _jitter_box(box: BBox, sigma: float, rng: np.random.Generator) -> BBox:
    if sigma <= 0:
        return box
    x0, y0, x1, y1 = np.asarray(box.as_tuple()) + rng.normal(0.0, sigma, 4)
    # keep at least one pixel of extent after the jitter
    if x1 - x0 < 1.0:
        mid = (x0 + x1) / 2.0
        x0, x1 = mid - 0.5, mid + 0.5
    if y1 - y0 < 1.0:
        mid = (y0 + y1) / 2.0
        y0, y1 = mid - 0.5, mid + 0.5
    return BBox(float(x0), float(y0), float(x1), float(y1))


def nms(boxes: Sequence[BBox], scores: Sequence[float], th_n: float) -> list[int]:
    """Greedy non-maximum suppression; indices kept, highest score first."""
    order = sorted(range(len(boxes)), key=lambda i: (-scores[i], i))
    kept: list[int] = []
    for i in order:
        if all(bbox_iou(boxes[i], boxes[j]) <= th_n for j in kept):
            kept.append(i)
    return kept


def simulate_detector(
    gt_boxes: Sequence[Mapping[int, BBox]],
    cfg: SynthConfig,
    th_p: float | None = None,
    th_n: float | None = None,
) -> list[list[Proposal]]:
    """Noisy detections for every frame.

    ``gt_boxes[t]`` maps object id to its detectable box at frame ``t``.
    Each true box is dropped with the miss probability, otherwise jittered
    and given a confidence; false positives are sprinkled uniformly. The
    result is filtered by ``confidence > th_p`` and greedy NMS at ``th_n``.
    Frame ``t`` draws from its own stream seeded by ``(seed, t)``.
    """
    th_p = cfg.th_p if th_p is None else th_p
    th_n = cfg.th_n if th_n is None else th_n
    d = cfg.detector
    out = []
    for t, boxes in enumerate(gt_boxes):
        rng = np.random.default_rng([cfg.seed, t])
        cand: list[BBox] = []
        conf: list[float] = []
        for obj in sorted(boxes):
            # draw every variate unconditionally so streams stay aligned
            missed = rng.random() < d.miss_prob
            box = _jitter_box(boxes[obj], d.jitter, rng)
            c = float(rng.uniform(*d.confidence))
            if not missed:
                cand.append(box)
                conf.append(c)
        for _ in range(int(rng.poisson(d.fp_rate)) if d.fp_rate > 0 else 0):
            w, h = rng.uniform(*d.fp_size, size=2)
            x0 = rng.uniform(0, max(cfg.width - w, 1.0))
            y0 = rng.uniform(0, max(cfg.height - h, 1.0))
            cand.append(BBox(float(x0), float(y0), float(x0 + w), float(y0 + h)))
            conf.append(float(rng.uniform(*d.fp_confidence)))
        keep = [i for i in range(len(cand)) if conf[i] > th_p]
        kept = nms([cand[i] for i in keep], [conf[i] for i in keep], th_n)
        out.append([Proposal(cand[keep[k]], conf[keep[k]], t, pid) for pid, k in enumerate(kept)])
    return out


def synth_scenario(cfg: SynthConfig) -> ScenarioStream:
    """Rasterised ground truth, exact flow and simulated proposals.

    Ground-truth masks are amodal silhouettes, so objects that cross each
    other overlap; an object inside its occlusion window has an empty mask.
    Flow to the next frame carries every object's velocity on its silhouette,
    hidden ones included, painted back to front; background flow is zero.
    """
    cfg.validate()
    w, h, T = cfg.width, cfg.height, cfg.num_frames
    ids = list(range(1, len(cfg.objects) + 1))
    order = sorted(range(len(cfg.objects)), key=lambda i: (cfg.objects[i].depth, i))

    amodal = [[rasterize(ob, t, w, h) for ob in cfg.objects] for t in range(T)]
    gt = []
    det_boxes = []
    for t in range(T):
        masks = {}
        boxes = {}
        for i, ob in enumerate(cfg.objects):
            m = amodal[t][i] if not ob.hidden(t) else np.zeros((h, w), dtype=np.bool_)
            masks[ids[i]] = m
            src = m if cfg.detector.miss_on_occlusion else amodal[t][i]
            if src.any():
                boxes[ids[i]] = BBox.from_mask(src)
        gt.append(masks)
        det_boxes.append(boxes)

    annotations = {}
    for i, ob in enumerate(cfg.objects):
        m = gt[0][ids[i]]
        if not m.any():
            raise ValueError(f"objects[{i}] rasterises to an empty mask in frame 0")
        annotations[ids[i]] = (BBox.from_mask(m), m)

    proposals = simulate_detector(det_boxes, cfg)
    frames = []
    for t in range(T):
        flow = None
        if t < T - 1:
            flow = np.zeros((h, w, 2), dtype=np.float32)
            for i in order:
                flow[amodal[t][i]] = cfg.objects[i].velocity
        image = None
        if cfg.render_images:
            image = np.full((h, w), 30, dtype=np.uint8)
            for i in order:
                if not cfg.objects[i].hidden(t):
                    image[amodal[t][i]] = cfg.objects[i].intensity
        frames.append(ScenarioFrame(t, proposals[t], flow, gt[t], image))
    return ScenarioStream(w, h, annotations, frames).validate()
