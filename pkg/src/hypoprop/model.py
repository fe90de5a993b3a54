"""Shared domain types and the global parameter set.

Raster types are plain numpy arrays indexed ``[row, col]``:

* mask grid: ``bool`` array of shape ``(height, width)``
* probability grid: float array of the same shape with values in [0, 1]
* flow field: float array of shape ``(height, width, 2)`` holding ``(dx, dy)``

Pixel ``(col, row)`` covers ``[col, col + 1) x [row, row + 1)`` in frame
coordinates, so its centre sits at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate box {coords}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "BBox":
        """Tight box around the set pixels of a mask grid."""
        rows = np.flatnonzero(mask.any(axis=1))
        cols = np.flatnonzero(mask.any(axis=0))
        if rows.size == 0:
            raise ValueError("empty mask has no bounding box")
        return cls(float(cols[0]), float(rows[0]), float(cols[-1] + 1), float(rows[-1] + 1))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class Proposal:
    box: BBox
    confidence: float
    frame_index: int
    proposal_id: int

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")

    @property
    def key(self) -> tuple[int, int]:
        """Identity used for conflicts: ``(frame_index, proposal_id)``."""
        return (self.frame_index, self.proposal_id)


# proposal_id reserved for the annotated first-frame box
GT_PROPOSAL_ID = -1
# proposal_id of a coasting node (track carried through a frame without a detection)
COAST_PROPOSAL_ID = -2


@dataclass(frozen=True)
class Params:
    """Tracker hyper-parameters.

    ``n_scan`` is the N-scan decision delay, ``th_b`` the branch cap and
    ``lam`` the merge margin. ``cap_mode`` selects whether ``th_b`` bounds
    leaves per tree (``"leaves"``) or children per node (``"children"``).
    ``cross_object_penalty`` feeds other objects' previous boxes into the
    competing-track term of the motion score. ``max_coast > 0`` lets a leaf
    with nothing inside its gate continue for up to that many frames on its
    flow-warped mask with a zero step score (off by default).
    """

    th_p: float = 0.05
    th_n: float = 0.6
    th_g: float = 0.3
    th_m: float = 0.3
    w_m: float = 0.3
    w_p: float = 0.7
    w_f: float = 1.0
    w_n: float = -0.4
    n_scan: int = 3
    th_b: int = 50
    lam: float = 0.8
    r: float = 0.15
    p_d: float = 0.9
    n_hist: int = 3
    cap_mode: str = "leaves"
    cross_object_penalty: bool = False
    max_coast: int = 0
    pls_iterations: int = 10_000
    exact_limit: int = 24

    def with_(self, **changes) -> "Params":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate_params(p: Params) -> Params:
    """Return ``p`` unchanged or raise ``ValueError`` naming the first broken rule."""
    for name in ("th_p", "th_n", "th_g", "th_m"):
        v = getattr(p, name)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    if not 0.0 <= p.w_m <= 1.0:
        raise ValueError(f"w_m must lie in [0, 1], got {p.w_m}")
    if abs(p.w_p - (1.0 - p.w_m)) > 1e-9:
        raise ValueError(f"w_p must equal 1-w_m (w_m={p.w_m}, w_p={p.w_p})")
    if not p.w_n <= 0.0 <= p.w_f:
        raise ValueError(f"weights must satisfy w_n <= 0 <= w_f (w_n={p.w_n}, w_f={p.w_f})")
    if not (isinstance(p.n_scan, int) and p.n_scan >= 1):
        raise ValueError(f"n_scan must be a positive integer, got {p.n_scan}")
    if not (isinstance(p.th_b, int) and p.th_b >= 1):
        raise ValueError(f"th_b must be a positive integer, got {p.th_b}")
    if not 0.0 < p.lam <= 1.0:
        raise ValueError(f"lam must lie in (0, 1], got {p.lam}")
    if p.r < 0.0:
        raise ValueError(f"r must be non-negative, got {p.r}")
    if not 0.0 < p.p_d < 1.0:
        raise ValueError(f"p_d must lie in (0, 1) so that ln(1-p_d) is finite, got {p.p_d}")
    if not (isinstance(p.n_hist, int) and p.n_hist >= 1):
        raise ValueError(f"n_hist must be a positive integer, got {p.n_hist}")
    if p.cap_mode not in ("leaves", "children"):
        raise ValueError(f"cap_mode must be 'leaves' or 'children', got {p.cap_mode!r}")
    if not (isinstance(p.max_coast, int) and p.max_coast >= 0):
        raise ValueError(f"max_coast must be a non-negative integer, got {p.max_coast}")
    if p.pls_iterations < 1:
        raise ValueError("pls_iterations must be >= 1")
    if not 0 <= p.exact_limit <= 24:
        raise ValueError("exact_limit must lie in [0, 24]")
    return p


class HypothesisNode:
    """One proposal/mask pairing inside a hypothesis tree."""

    __slots__ = ("proposal", "mask", "prob", "step_score", "cumulative_score", "parent", "children")

    def __init__(
        self,
        proposal: Proposal,
        mask: np.ndarray,
        step_score: float,
        parent: Optional["HypothesisNode"] = None,
        prob: Optional[np.ndarray] = None,
    ):
        self.proposal = proposal
        self.mask = mask
        self.prob = prob if prob is not None else mask.astype(np.float32)
        self.step_score = float(step_score)
        self.parent = parent
        self.children: list[HypothesisNode] = []
        if parent is None:
            self.cumulative_score = self.step_score
        else:
            if proposal.frame_index != parent.frame_index + 1:
                raise ValueError("child must sit exactly one frame after its parent")
            self.cumulative_score = parent.cumulative_score + self.step_score
            parent.children.append(self)

    @property
    def frame_index(self) -> int:
        return self.proposal.frame_index

    @property
    def box(self) -> BBox:
        return self.proposal.box

    @property
    def key(self) -> tuple[int, int]:
        return self.proposal.key

    @property
    def is_root(self) -> bool:
        return self.parent is None

    @property
    def is_coast(self) -> bool:
        return self.proposal.proposal_id == COAST_PROPOSAL_ID

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def path_from_root(self) -> list["HypothesisNode"]:
        out = []
        node: Optional[HypothesisNode] = self
        while node is not None:
            out.append(node)
            node = node.parent
        out.reverse()
        return out

    def iter_subtree(self) -> Iterator["HypothesisNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def __repr__(self):
        return (
            f"HypothesisNode(frame={self.frame_index}, pid={self.proposal.proposal_id}, "
            f"step={self.step_score:.4f}, cum={self.cumulative_score:.4f})"
        )


@dataclass
class HypothesisForest:
    """All hypothesis trees of one object.

    ``frame`` is the last frame the forest has been extended to. ``trees[0]``
    is the annotated root until pruning removes it.
    """

    object_id: int
    trees: list[HypothesisNode] = field(default_factory=list)
    frame: int = 0
    gt_root: Optional[HypothesisNode] = None

    def iter_nodes(self) -> Iterator[HypothesisNode]:
        for root in self.trees:
            yield from root.iter_subtree()

    def leaves(self) -> list[HypothesisNode]:
        return [n for n in self.iter_nodes() if n.is_leaf]

    def tree_leaves(self, root: HypothesisNode) -> list[HypothesisNode]:
        return [n for n in root.iter_subtree() if n.is_leaf]

    def nodes_at(self, frame: int) -> list[HypothesisNode]:
        return [n for n in self.iter_nodes() if n.frame_index == frame]

    def node_count(self) -> int:
        return sum(1 for _ in self.iter_nodes())

    def has_gt_tree(self) -> bool:
        return self.gt_root is not None and any(r is self.gt_root for r in self.trees)


@dataclass(frozen=True)
class TrackPath:
    """Root-to-leaf node sequence; its weight is the leaf's cumulative score."""

    nodes: tuple[HypothesisNode, ...]

    @property
    def total_weight(self) -> float:
        return self.nodes[-1].cumulative_score

    @property
    def root(self) -> HypothesisNode:
        return self.nodes[0]

    @property
    def leaf(self) -> HypothesisNode:
        return self.nodes[-1]

    def keys(self) -> set[tuple[int, int]]:
        """Detection keys on the path; coasting nodes use no detection."""
        return {n.key for n in self.nodes if not n.is_coast}

    def node_at(self, frame: int) -> Optional[HypothesisNode]:
        first = self.nodes[0].frame_index
        i = frame - first
        if 0 <= i < len(self.nodes):
            return self.nodes[i]
        return None
