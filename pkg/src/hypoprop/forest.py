"""Building, extending and capping per-object hypothesis trees."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .gating import TrackHistory, gate, predict_candidate
from .geometry import mask_iou, warp_mask
from .model import COAST_PROPOSAL_ID, GT_PROPOSAL_ID, BBox, HypothesisForest, HypothesisNode, Params, Proposal
from .scoring import motion_score, root_score, step_score
from .segmentation import MaskGenerator, generate_mask, threshold_mask


def init_forest(object_id: int, gt_box: BBox, gt_mask: np.ndarray, params: Params) -> HypothesisForest:
    """Forest holding one annotated root at frame 0."""
    gt_mask = np.asarray(gt_mask, dtype=np.bool_)
    if not gt_mask.any():
        raise ValueError(f"object {object_id}: first-frame mask is empty")
    tight = BBox.from_mask(gt_mask)
    eps = 1e-9
    if (
        gt_box.x_min > tight.x_min + eps
        or gt_box.y_min > tight.y_min + eps
        or gt_box.x_max < tight.x_max - eps
        or gt_box.y_max < tight.y_max - eps
    ):
        raise ValueError(f"object {object_id}: box {gt_box.as_tuple()} does not enclose its mask")
    prop = Proposal(gt_box, 1.0, 0, GT_PROPOSAL_ID)
    root = HypothesisNode(prop, gt_mask, root_score(params.p_d))
    return HypothesisForest(object_id=object_id, trees=[root], frame=0, gt_root=root)


def path_history(node: HypothesisNode, n_hist: int) -> TrackHistory:
    boxes = []
    cur: Optional[HypothesisNode] = node
    while cur is not None and len(boxes) < n_hist + 1:
        boxes.append(cur.box)
        cur = cur.parent
    boxes.reverse()
    return TrackHistory.from_boxes(boxes)


def coast_run(node: HypothesisNode) -> int:
    """Number of consecutive coasting nodes ending at ``node``."""
    k = 0
    while node is not None and node.is_coast:
        k += 1
        node = node.parent
    return k


def extend(
    forest: HypothesisForest,
    frame_proposals: Sequence[Proposal],
    flow: np.ndarray,
    mask_gen: MaskGenerator,
    params: Params,
    *,
    image=None,
    other_boxes: Sequence[BBox] = (),
) -> HypothesisForest:
    """Grow the forest by one frame.

    Leaves that sit on the previous frame spawn a child for every proposal
    inside their gate. A proposal gated out by every such leaf starts a new
    tree from a blank prior. Leaves without gated proposals stay as they are.

    With ``params.max_coast > 0`` every active leaf also gets a coasting child
    (no detection, warped mask, step score 0) unless it already ends a run of
    ``max_coast`` coasting nodes; this is the missed-detection hypothesis.
    """
    t = forest.frame + 1
    for p in frame_proposals:
        if p.frame_index != t:
            raise ValueError(f"proposal {p.proposal_id} belongs to frame {p.frame_index}, forest expects {t}")
    h, w = flow.shape[:2]
    active = [n for n in forest.iter_nodes() if n.is_leaf and n.frame_index == t - 1]

    gated: set[int] = set()
    for leaf in active:
        cand = predict_candidate(path_history(leaf, params.n_hist), params.n_hist)
        inside, _ = gate(cand, frame_proposals, params.th_g)
        prior = warp_mask(leaf.mask, flow)
        if params.max_coast and coast_run(leaf) < params.max_coast:
            box = BBox.from_mask(prior) if prior.any() else cand
            HypothesisNode(Proposal(box, 0.0, t, COAST_PROPOSAL_ID), prior, 0.0, parent=leaf)
        if not inside:
            continue
        seen = {leaf.key}
        others = []
        for o in active:
            if not o.is_coast and o.key not in seen:
                seen.add(o.key)
                others.append(o.box)
        others.extend(other_boxes)
        for p in inside:
            gated.add(p.proposal_id)
            z = generate_mask(mask_gen, image, p.box, prior, params, t)
            m = threshold_mask(z, params.th_m)
            s_m = motion_score(p.box, leaf.box, others, params.w_f, params.w_n)
            s_p = mask_iou(m, prior)
            HypothesisNode(p, m, step_score(s_m, s_p, params), parent=leaf, prob=z)

    blank = None
    for p in frame_proposals:
        if p.proposal_id in gated:
            continue
        if blank is None:
            blank = np.zeros((h, w), dtype=np.bool_)
        z = generate_mask(mask_gen, image, p.box, blank, params, t)
        forest.trees.append(HypothesisNode(p, threshold_mask(z, params.th_m), root_score(params.p_d), prob=z))
    forest.frame = t
    return forest


def _detach(node: HypothesisNode, forest: HypothesisForest):
    """Remove ``node`` and every ancestor left without children."""
    while node.parent is not None:
        parent = node.parent
        parent.children.remove(node)
        node.parent = None
        if parent.children:
            return
        node = parent
    forest.trees.remove(node)


def _rank_key(n: HypothesisNode):
    return (-n.cumulative_score, n.frame_index, n.proposal.proposal_id)


def cap_branches(forest: HypothesisForest, th_b: int, mode: str = "leaves") -> HypothesisForest:
    """Keep at most ``th_b`` branches, preferring higher cumulative scores.

    ``mode="leaves"`` caps leaves per tree, ``mode="children"`` caps the
    children of every node. Ties go to the lower ``(frame, proposal_id)``.
    """
    if th_b < 1:
        raise ValueError("th_b must be >= 1")
    if mode == "leaves":
        for root in list(forest.trees):
            leaves = forest.tree_leaves(root)
            if len(leaves) <= th_b:
                continue
            ranked = sorted(leaves, key=_rank_key)
            for leaf in ranked[th_b:]:
                _detach(leaf, forest)
    elif mode == "children":
        for root in list(forest.trees):
            for node in list(root.iter_subtree()):
                if len(node.children) > th_b:
                    ranked = sorted(node.children, key=_rank_key)
                    for child in ranked[th_b:]:
                        child.parent = None
                    node.children = ranked[:th_b]
    else:
        raise ValueError(f"unknown cap mode {mode!r}")
    return forest
