"""End-to-end driver: per-object forests, MWIS selection, pruning and merging."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .forest import cap_branches, extend, init_forest
from .model import BBox, HypothesisForest, HypothesisNode, Params, TrackPath, validate_params
from .mwis import enumerate_paths, n_scan_prune, select_hypotheses
from .scenario import ScenarioStream
from .segmentation import make_generator, merge_masks

# observer(frame, object_id, forest, selected_paths) runs right after pruning
Observer = Callable[[int, int, HypothesisForest, list[TrackPath]], None]


@dataclass
class TimingReport:
    frame_seconds: list[float] = field(default_factory=list)
    merge_seconds: float = 0.0
    total_seconds: float = 0.0

    @property
    def per_frame(self) -> float:
        """Mean tracking time per processed frame."""
        if not self.frame_seconds:
            return 0.0
        return float(np.mean(self.frame_seconds))


@dataclass
class PipelineResult:
    labels: list[np.ndarray]
    boxes: list[dict[int, Optional[BBox]]]
    timing: TimingReport
    object_ids: list[int]
    max_tree_leaves: int = 0
    max_paths: int = 0


def _solver_seed(seed: int, frame: int, obj: int) -> int:
    return (seed * 1_000_003 + frame * 7919 + obj * 104_729) % 2_147_483_646


def choose_output(selected: list[TrackPath], forest: HypothesisForest, frame: int) -> Optional[TrackPath]:
    """Path whose head represents the object at ``frame``.

    The path from the annotated root wins while it is still growing;
    otherwise the heaviest growing restart path; otherwise none (missing).
    """
    live = [p for p in selected if p.leaf.frame_index == frame]
    for p in live:
        if p.root is forest.gt_root:
            return p
    if not live:
        return None
    return max(live, key=lambda p: (p.total_weight, -p.root.frame_index, -p.root.proposal.proposal_id))


def run_pipeline(
    stream: ScenarioStream,
    params: Params = Params(),
    generator: str = "flowprop",
    seed: int = 0,
    *,
    noise: float = 0.0,
    radius: int = 0,
    observer: Optional[Observer] = None,
) -> PipelineResult:
    """Track and segment every annotated object through ``stream``.

    Frames are processed in order. For each object the forest is extended,
    capped, solved and N-scan pruned. Frame ``t`` is finally read from the
    decision made ``N`` frames later (the last frame for the tail), falling
    back to the on-line choice, and the per-object masks are merged into one
    label grid per frame.
    """
    validate_params(params)
    if not stream.frames:
        raise ValueError("scenario has no frames")
    stream.validate()
    gt = None
    if generator == "oracle":
        if not stream.has_ground_truth():
            raise ValueError("the oracle generator needs ground-truth masks on every frame")
        gt = stream.gt_by_frame()
    gen = make_generator(generator, gt, noise=noise, seed=seed, radius=radius)

    ids = stream.object_ids
    T = len(stream.frames)
    timing = TimingReport()
    start_all = time.perf_counter()

    forests = {o: init_forest(o, box, mask, params) for o, (box, mask) in stream.annotations.items()}
    # decisions[t][o]: output path chosen on-line at frame t
    decisions: list[dict[int, Optional[TrackPath]]] = [
        {o: TrackPath((forests[o].gt_root,)) for o in ids}
    ]
    max_leaves = 1
    max_paths = 1

    for t in range(1, T):
        tic = time.perf_counter()
        frame = stream.frames[t]
        flow = stream.frames[t - 1].flow
        current: dict[int, Optional[TrackPath]] = {}
        for o in ids:
            others = ()
            if params.cross_object_penalty:
                others = tuple(
                    p.leaf.box for q, p in decisions[t - 1].items() if q != o and p is not None
                )
            forest = forests[o]
            extend(forest, frame.proposals, flow, gen, params, image=frame.image, other_boxes=others)
            cap_branches(forest, params.th_b, params.cap_mode)
            for root in forest.trees:
                max_leaves = max(max_leaves, len(forest.tree_leaves(root)))
            paths = enumerate_paths(forest)
            max_paths = max(max_paths, len(paths))
            selected = select_hypotheses(
                paths,
                seed=_solver_seed(seed, t, o),
                max_iterations=params.pls_iterations,
                exact_limit=params.exact_limit,
            )
            current[o] = choose_output(selected, forest, t)
            n_scan_prune(forest, selected, params.n_scan, frame=t)
            if observer is not None:
                observer(t, o, forest, selected)
        decisions.append(current)
        timing.frame_seconds.append(time.perf_counter() - tic)

    tic = time.perf_counter()
    nodes: list[dict[int, Optional[HypothesisNode]]] = []
    for t in range(T):
        row: dict[int, Optional[HypothesisNode]] = {}
        for o in ids:
            node = None
            for k in (T - 1, min(t + params.n_scan, T - 1), t):
                path = decisions[k][o]
                if path is not None:
                    node = path.node_at(t)
                    if node is not None:
                        break
            row[o] = node
        nodes.append(row)

    h, w = stream.height, stream.width
    labels: list[np.ndarray] = []
    boxes: list[dict[int, Optional[BBox]]] = []
    empty_b = np.zeros((h, w), dtype=np.bool_)
    empty_f = np.zeros((h, w), dtype=np.float32)
    prev = [stream.annotations[o][1] for o in ids]
    for t in range(T):
        if t == 0:
            grid = np.zeros((h, w), dtype=np.uint8)
            for i, o in enumerate(ids):
                grid[prev[i]] = o
            labels.append(grid)
            boxes.append({o: stream.annotations[o][0] for o in ids})
            continue
        masks, probs, bxs = [], [], []
        for o in ids:
            node = nodes[t][o]
            if node is None:
                masks.append(empty_b)
                probs.append(empty_f)
                bxs.append(None)
            else:
                masks.append(node.mask)
                probs.append(node.prob)
                bxs.append(node.box)
        merged = merge_masks(masks, probs, prev, stream.frames[t - 1].flow, bxs, params.lam)
        grid = np.zeros((h, w), dtype=np.uint8)
        for i, o in enumerate(ids):
            grid[merged == i + 1] = o
        labels.append(grid)
        boxes.append({o: bxs[i] for i, o in enumerate(ids)})
        prev = [grid == o for o in ids]
    timing.merge_seconds = time.perf_counter() - tic
    timing.total_seconds = time.perf_counter() - start_all
    return PipelineResult(labels, boxes, timing, ids, max_leaves, max_paths)
