"""Scenario containers and their on-disk formats.

A scenario is one JSON document plus binary flow sidecars::

    {
      "format": "hypoprop-scenario", "version": 1,
      "width": W, "height": H, "num_objects": C,
      "objects": [{"id": 1, "box": [x0, y0, x1, y1], "mask": "<rle>"}, ...],
      "frames": [
        {"index": 0,
         "proposals": [{"id": 0, "box": [...], "confidence": 0.93}, ...],
         "flow": "scene_flow/00000.mhpf",      # omitted on the last frame
         "gt_masks": {"1": "<rle>", ...},       # optional
         "image": "scene_img/00000.pgm"}        # optional
      ]
    }

Masks are run-length strings over the row-major pixel order, alternating
background/foreground counts and starting with background. Flow files are
little-endian: magic ``MHPF``, int32 width, int32 height, then row-major
float32 ``(dx, dy)`` pairs. Sidecar paths are relative to the JSON file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import BBox, Proposal

FORMAT_TAG = "hypoprop-scenario"
FLOW_MAGIC = b"MHPF"


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


# --------------------------------------------------------------------------
# run-length masks
# --------------------------------------------------------------------------


def rle_encode(mask: np.ndarray) -> str:
    flat = np.asarray(mask, dtype=np.bool_).ravel()
    if flat.size == 0:
        return "0"
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return " ".join(str(r) for r in runs)


def rle_decode(text: str, width: int, height: int) -> np.ndarray:
    try:
        runs = [int(tok) for tok in text.split()]
    except ValueError as exc:
        raise ScenarioError(f"run-length string has a non-integer token: {exc}") from None
    if any(r < 0 for r in runs):
        raise ScenarioError("run-length string has a negative run")
    total = sum(runs)
    if total != width * height:
        raise ScenarioError(f"run lengths sum to {total}, expected {width}x{height}={width * height}")
    values = np.zeros(len(runs), dtype=np.bool_)
    values[1::2] = True
    return np.repeat(values, runs).reshape(height, width)


# --------------------------------------------------------------------------
# flow and image sidecars
# --------------------------------------------------------------------------


def write_flow(path, flow: np.ndarray) -> None:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise ValueError(f"flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    with open(path, "wb") as fh:
        fh.write(FLOW_MAGIC)
        fh.write(np.array([w, h], dtype="<i4").tobytes())
        fh.write(np.ascontiguousarray(flow, dtype="<f4").tobytes())


def read_flow(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12 or data[:4] != FLOW_MAGIC:
        raise ScenarioError(f"{path}: not a flow file (bad magic)")
    w, h = (int(v) for v in np.frombuffer(data[4:12], dtype="<i4"))
    if w <= 0 or h <= 0:
        raise ScenarioError(f"{path}: invalid flow size {w}x{h}")
    expect = 12 + w * h * 2 * 4
    if len(data) != expect:
        raise ScenarioError(f"{path}: expected {expect} bytes for {w}x{h} flow, found {len(data)}")
    flow = np.frombuffer(data[12:], dtype="<f4").reshape(h, w, 2).astype(np.float32)
    if not np.all(np.isfinite(flow)):
        raise ScenarioError(f"{path}: flow contains non-finite displacements")
    return flow


def write_pgm(path, grid: np.ndarray) -> None:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("PGM needs a 2-D grid")
    if grid.min(initial=0) < 0 or grid.max(initial=0) > 255:
        raise ValueError("PGM values must lie in [0, 255]")
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(grid.astype(np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ScenarioError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ScenarioError(f"{path}: only binary PGM (P5) is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ScenarioError(f"{path}: 16-bit PGM is not supported")
    pos += 1
    body = data[pos : pos + w * h]
    if len(body) != w * h:
        raise ScenarioError(f"{path}: PGM body too short")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).copy()


# --------------------------------------------------------------------------
# containers
# --------------------------------------------------------------------------


@dataclass
class ScenarioFrame:
    frame_index: int
    proposals: list[Proposal] = field(default_factory=list)
    flow: Optional[np.ndarray] = None  # to the next frame
    gt_masks: Optional[dict[int, np.ndarray]] = None
    image: Optional[np.ndarray] = None


@dataclass
class ScenarioStream:
    width: int
    height: int
    annotations: dict[int, tuple[BBox, np.ndarray]]
    frames: list[ScenarioFrame]

    @property
    def num_objects(self) -> int:
        return len(self.annotations)

    @property
    def object_ids(self) -> list[int]:
        return sorted(self.annotations)

    def gt_by_frame(self) -> dict[int, dict[int, np.ndarray]]:
        """Ground-truth masks keyed by frame; frame 0 falls back to the annotations."""
        out = {}
        for fr in self.frames:
            if fr.gt_masks is not None:
                out[fr.frame_index] = fr.gt_masks
        if 0 not in out:
            out[0] = {o: m for o, (_, m) in self.annotations.items()}
        return out

    def has_ground_truth(self) -> bool:
        return all(fr.gt_masks is not None for fr in self.frames[1:])

    def validate(self) -> "ScenarioStream":
        if self.width <= 0 or self.height <= 0:
            raise ScenarioError("width and height must be positive")
        if not self.frames:
            raise ScenarioError("scenario has no frames")
        if not self.annotations:
            raise ScenarioError("scenario needs at least one annotated object")
        ids = self.object_ids
        if ids != list(range(1, len(ids) + 1)):
            raise ScenarioError(f"object ids must be 1..C, got {ids}")
        if len(ids) > 255:
            raise ScenarioError("at most 255 objects fit a graymap label image")
        shape = (self.height, self.width)
        for o, (box, mask) in self.annotations.items():
            if mask.shape != shape:
                raise ScenarioError(f"objects[{o}]: mask is {mask.shape}, frame is {shape}")
            if not mask.any():
                raise ScenarioError(f"objects[{o}]: first-frame mask is empty")
        last = len(self.frames) - 1
        for t, fr in enumerate(self.frames):
            where = f"frames[{t}]"
            if fr.frame_index != t:
                raise ScenarioError(f"{where}: frame index {fr.frame_index}, expected {t} (indices must be contiguous from 0)")
            pids = set()
            for p in fr.proposals:
                if p.frame_index != t:
                    raise ScenarioError(f"{where}: proposal {p.proposal_id} claims frame {p.frame_index}")
                if p.proposal_id in pids:
                    raise ScenarioError(f"{where}: duplicate proposal id {p.proposal_id}")
                if p.proposal_id < 0:
                    raise ScenarioError(f"{where}: proposal ids must be non-negative")
                pids.add(p.proposal_id)
            if t < last:
                if fr.flow is None:
                    raise ScenarioError(f"{where}: missing flow to the next frame")
                if fr.flow.shape != (*shape, 2):
                    raise ScenarioError(f"{where}: flow is {fr.flow.shape}, expected {(*shape, 2)}")
            if fr.gt_masks is not None:
                for o, m in fr.gt_masks.items():
                    if o not in self.annotations:
                        raise ScenarioError(f"{where}: ground truth for unknown object {o}")
                    if m.shape != shape:
                        raise ScenarioError(f"{where}: ground truth for object {o} is {m.shape}")
            if fr.image is not None and fr.image.shape[:2] != shape:
                raise ScenarioError(f"{where}: image is {fr.image.shape[:2]}, expected {shape}")
        return self


# --------------------------------------------------------------------------
# (de)serialisation
# --------------------------------------------------------------------------


def _box_from(value, where) -> BBox:
    if not (isinstance(value, list) and len(value) == 4):
        raise ScenarioError(f"{where}: box must be a list of four numbers")
    try:
        return BBox(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from None


def _get(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioError(f"{where}: missing field '{key}'")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise ScenarioError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return value


def load_scenario(path) -> ScenarioStream:
    """Parse and validate a scenario file."""
    path = Path(path)
    base = path.parent
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    if doc.get("format", FORMAT_TAG) != FORMAT_TAG:
        raise ScenarioError(f"{path}: unknown format tag {doc.get('format')!r}")
    width = _get(doc, "width", "scenario", int)
    height = _get(doc, "height", "scenario", int)
    if width <= 0 or height <= 0:
        raise ScenarioError("scenario: width and height must be positive")

    def mask(text, where):
        if not isinstance(text, str):
            raise ScenarioError(f"{where}: mask must be a run-length string")
        try:
            return rle_decode(text, width, height)
        except ScenarioError as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    annotations = {}
    for i, ob in enumerate(_get(doc, "objects", "scenario", list)):
        where = f"objects[{i}]"
        oid = _get(ob, "id", where, int)
        if oid in annotations:
            raise ScenarioError(f"{where}: duplicate object id {oid}")
        annotations[oid] = (_box_from(_get(ob, "box", where), f"{where}.box"), mask(_get(ob, "mask", where), f"{where}.mask"))
    if "num_objects" in doc and doc["num_objects"] != len(annotations):
        raise ScenarioError(f"scenario: num_objects={doc['num_objects']} but {len(annotations)} objects listed")

    frames = []
    raw_frames = _get(doc, "frames", "scenario", list)
    for t, fr in enumerate(raw_frames):
        where = f"frames[{t}]"
        idx = _get(fr, "index", where, int)
        props = []
        for j, p in enumerate(fr.get("proposals", [])):
            pw = f"{where}.proposals[{j}]"
            try:
                props.append(
                    Proposal(
                        _box_from(_get(p, "box", pw), f"{pw}.box"),
                        float(_get(p, "confidence", pw)),
                        idx,
                        int(_get(p, "id", pw)),
                    )
                )
            except (TypeError, ValueError) as exc:
                if isinstance(exc, ScenarioError):
                    raise
                raise ScenarioError(f"{pw}: {exc}") from None
        flow = None
        if fr.get("flow") is not None:
            try:
                flow = read_flow(base / fr["flow"])
            except OSError as exc:
                raise ScenarioError(f"{where}.flow: {exc}") from None
        gt = None
        if fr.get("gt_masks") is not None:
            gt = {}
            for k, v in fr["gt_masks"].items():
                try:
                    oid = int(k)
                except ValueError:
                    raise ScenarioError(f"{where}.gt_masks: object key {k!r} is not an integer") from None
                gt[oid] = mask(v, f"{where}.gt_masks[{k}]")
        image = None
        if fr.get("image") is not None:
            try:
                image = read_pgm(base / fr["image"])
            except OSError as exc:
                raise ScenarioError(f"{where}.image: {exc}") from None
        frames.append(ScenarioFrame(idx, props, flow, gt, image))
    return ScenarioStream(width, height, annotations, frames).validate()


def _rel(target: Path, base: Path) -> str:
    return Path(os.path.relpath(target, base)).as_posix()


def save_scenario(stream: ScenarioStream, path) -> Path:
    """Write ``stream`` as JSON plus flow (and image) sidecars next to it."""
    stream.validate()
    path = Path(path)
    base = path.parent
    base.mkdir(parents=True, exist_ok=True)
    side = base / f"{path.stem}_flow"
    doc = {
        "format": FORMAT_TAG,
        "version": 1,
        "width": stream.width,
        "height": stream.height,
        "num_objects": stream.num_objects,
        "objects": [
            {"id": o, "box": list(box.as_tuple()), "mask": rle_encode(m)} for o, (box, m) in sorted(stream.annotations.items())
        ],
        "frames": [],
    }
    for fr in stream.frames:
        entry: dict = {
            "index": fr.frame_index,
            "proposals": [
                {"id": p.proposal_id, "box": list(p.box.as_tuple()), "confidence": p.confidence} for p in fr.proposals
            ],
        }
        if fr.flow is not None:
            side.mkdir(exist_ok=True)
            target = side / f"{fr.frame_index:05d}.mhpf"
            write_flow(target, fr.flow)
            entry["flow"] = _rel(target, base)
        if fr.gt_masks is not None:
            entry["gt_masks"] = {str(o): rle_encode(m) for o, m in sorted(fr.gt_masks.items())}
        if fr.image is not None:
            img_dir = base / f"{path.stem}_img"
            img_dir.mkdir(exist_ok=True)
            target = img_dir / f"{fr.frame_index:05d}.pgm"
            write_pgm(target, fr.image)
            entry["image"] = _rel(target, base)
        doc["frames"].append(entry)
    path.write_text(json.dumps(doc, indent=1))
    return path
