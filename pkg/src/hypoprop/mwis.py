"""Track-path conflict graphs, MWIS solvers and N-scan pruning."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .model import HypothesisForest, HypothesisNode, TrackPath

EXACT_LIMIT = 24


@dataclass
class ConflictGraph:
    """Undirected graph over track paths; node ``i`` weighs ``weights[i]``."""

    weights: np.ndarray
    edges: list[tuple[int, int]] = field(default_factory=list)
    paths: list[TrackPath] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        n = len(self.weights)
        clean = set()
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on node {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) out of range for {n} nodes")
            clean.add((min(a, b), max(a, b)))
        self.edges = sorted(clean)

    @property
    def n(self) -> int:
        return len(self.weights)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=np.uint8)
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = 1
        return adj

    def adjacency_bits(self) -> np.ndarray:
        bits = np.zeros(self.n, dtype=np.int64)
        for a, b in self.edges:
            bits[a] |= 1 << b
            bits[b] |= 1 << a
        return bits

    def is_independent(self, nodes: Iterable[int]) -> bool:
        s = set(nodes)
        return not any(a in s and b in s for a, b in self.edges)


def set_weight(g: ConflictGraph, nodes: Iterable[int]) -> float:
    """Total weight, summed in increasing index order (bit-stable across solvers)."""
    s = 0.0
    for i in sorted(nodes):
        s += float(g.weights[i])
    return s


def enumerate_paths(forest: HypothesisForest) -> list[TrackPath]:
    """Every root-to-leaf path of every tree, in depth-first order."""
    out = []
    for root in forest.trees:
        stack: list[tuple[HypothesisNode, tuple]] = [(root, (root,))]
        while stack:
            node, prefix = stack.pop()
            if node.is_leaf:
                out.append(TrackPath(prefix))
            else:
                for child in reversed(node.children):
                    stack.append((child, prefix + (child,)))
    return out


def build_conflict_graph(paths: Sequence[TrackPath]) -> ConflictGraph:
    """Connect every pair of paths that use the same proposal in the same frame."""
    by_key: dict[tuple[int, int], list[int]] = {}
    for i, p in enumerate(paths):
        for k in p.keys():
            by_key.setdefault(k, []).append(i)
    edges = set()
    for members in by_key.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                edges.add((members[x], members[y]))
    weights = np.array([p.total_weight for p in paths], dtype=np.float64)
    return ConflictGraph(weights, sorted(edges), list(paths))


def solve_exact(g: ConflictGraph) -> tuple[int, ...]:
    """Maximum-weight independent set by exhaustive enumeration.

    Among optima the lexicographically smallest sorted index tuple is returned.
    """
    if g.n > EXACT_LIMIT:
        raise ValueError(f"exact MWIS is limited to {EXACT_LIMIT} nodes, got {g.n}")
    bits, _ = kernels.mwis_enumerate(g.weights, g.adjacency_bits())
    bits = int(bits)
    return tuple(i for i in range(g.n) if (bits >> i) & 1)


def solve_pls(g: ConflictGraph, seed: int = 0, max_iterations: int = 10_000, penalty_reset: int = 100) -> tuple[int, ...]:
    """Independent set from phased local search; deterministic per seed."""
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    sel = kernels.pls_search(g.weights, g.adjacency(), int(seed), int(max_iterations), int(penalty_reset))
    return tuple(int(i) for i in np.flatnonzero(sel))


def solve_greedy(g: ConflictGraph) -> tuple[int, ...]:
    """Heaviest-first greedy baseline over positive-weight nodes."""
    adj = g.adjacency()
    taken: list[int] = []
    blocked = np.zeros(g.n, dtype=bool)
    for i in sorted(range(g.n), key=lambda i: (-g.weights[i], i)):
        if g.weights[i] <= 0 or blocked[i]:
            continue
        taken.append(i)
        blocked |= adj[i].astype(bool)
    return tuple(sorted(taken))


def solve(g: ConflictGraph, seed: int = 0, max_iterations: int = 10_000, exact_limit: int = EXACT_LIMIT) -> tuple[int, ...]:
    if g.n <= exact_limit:
        return solve_exact(g)
    return solve_pls(g, seed=seed, max_iterations=max_iterations)


def select_hypotheses(paths: Sequence[TrackPath], seed: int = 0, max_iterations: int = 10_000, exact_limit: int = EXACT_LIMIT) -> list[TrackPath]:
    """Best global hypothesis for one object's forest.

    The MWIS over the conflict graph; when every path weighs <= 0 the set
    would be empty, so the single heaviest path is kept instead.
    """
    if not paths:
        return []
    g = build_conflict_graph(paths)
    chosen = solve(g, seed=seed, max_iterations=max_iterations, exact_limit=exact_limit)
    if not chosen:
        best = max(range(g.n), key=lambda i: (g.weights[i], -i))
        chosen = (best,)
    return [paths[i] for i in chosen]


def n_scan_prune(forest: HypothesisForest, selected: Sequence[TrackPath], n: int, frame: int | None = None) -> HypothesisForest:
    """Commit decisions older than ``n`` frames.

    With ``k`` the current frame, every branch leaving a selected path at or
    before frame ``k - n`` is cut, and trees born at or before ``k - n`` that
    carry no selected path are dropped.
    """
    k = forest.frame if frame is None else frame
    cutoff = k - n
    if cutoff < 0:
        return forest
    on_path = {id(node) for p in selected for node in p.nodes}
    sel_roots = {id(p.root) for p in selected}
    keep = []
    for root in forest.trees:
        if root.frame_index > cutoff:
            keep.append(root)
            continue
        if id(root) not in sel_roots:
            continue
        keep.append(root)
        stack = [root]
        while stack:
            node = stack.pop()
            if node.frame_index >= cutoff:
                continue
            kept = []
            for child in node.children:
                if id(child) in on_path:
                    kept.append(child)
                    stack.append(child)
                else:
                    child.parent = None
            node.children = kept
    forest.trees = keep
    return forest


def check_n_scan(forest: HypothesisForest, selected: Sequence[TrackPath], n: int, frame: int | None = None) -> list[HypothesisNode]:
    """Nodes at frames <= k - n that are not on a selected path (should be empty)."""
    k = forest.frame if frame is None else frame
    on_path = {id(node) for p in selected for node in p.nodes}
    return [node for node in forest.iter_nodes() if node.frame_index <= k - n and id(node) not in on_path]


def random_graph(n: int, density: float, rng: np.random.Generator, weight_range=(0.1, 5.0)) -> ConflictGraph:
    """Erdos-Renyi graph with uniform node weights."""
    weights = rng.uniform(*weight_range, size=n)
    edges = [(a, b) for a in range(n) for b in range(a + 1, n) if rng.random() < density]
    return ConflictGraph(weights, edges)


@dataclass
class OracleTrial:
    nodes: int
    density: float
    exact_weight: float
    pls_weight: float
    independent: bool

    @property
    def ok(self) -> bool:
        return self.independent and self.pls_weight == self.exact_weight


def oracle_check(
    max_nodes: int = 16,
    trials: int = 100,
    seed: int = 0,
    densities: Sequence[float] = (0.1, 0.3, 0.6),
    max_iterations: int = 10_000,
) -> list[OracleTrial]:
    """Compare PLS against exhaustive enumeration on seeded random graphs.

    Trial ``i`` draws ``1..max_nodes`` nodes and uses density
    ``densities[i % len(densities)]``.
    """
    if not 1 <= max_nodes <= EXACT_LIMIT:
        raise ValueError(f"node count must lie in [1, {EXACT_LIMIT}]")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(trials):
        n = int(rng.integers(1, max_nodes + 1))
        d = float(densities[i % len(densities)])
        g = random_graph(n, d, rng)
        ex = solve_exact(g)
        pl = solve_pls(g, seed=seed + i, max_iterations=max_iterations)
        out.append(OracleTrial(n, d, set_weight(g, ex), set_weight(g, pl), g.is_independent(pl)))
    return out
