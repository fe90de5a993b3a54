"""Hot numeric kernels.

Each kernel has a numba-compiled path and a pure fallback. Raster kernels keep a
separate vectorised numpy implementation because interpreted pixel loops would be
unusable; the graph kernels share one loop body that is either compiled or run
as plain Python (see :mod:`hypoprop._jit`).
"""

import numpy as np

from ._jit import HAS_NUMBA, jit

# --------------------------------------------------------------------------
# raster kernels
# --------------------------------------------------------------------------


def warp_forward_numpy(mask, flow):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        return out
    d = flow[rows, cols]
    tx = np.floor(cols + d[:, 0].astype(np.float64) + 0.5).astype(np.int64)
    ty = np.floor(rows + d[:, 1].astype(np.float64) + 0.5).astype(np.int64)
    keep = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    out[ty[keep], tx[keep]] = True
    return out


def overlap_counts_numpy(a, b):
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return inter, union


def _warp_forward_loop(mask, flow):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            if mask[y, x]:
                tx = int(np.floor(x + np.float64(flow[y, x, 0]) + 0.5))
                ty = int(np.floor(y + np.float64(flow[y, x, 1]) + 0.5))
                if 0 <= tx < w and 0 <= ty < h:
                    out[ty, tx] = True
    return out


def _overlap_counts_loop(a, b):
    inter = 0
    union = 0
    h, w = a.shape
    for y in range(h):
        for x in range(w):
            p = a[y, x]
            q = b[y, x]
            if p and q:
                inter += 1
            if p or q:
                union += 1
    return inter, union


if HAS_NUMBA:
    warp_forward_numba = jit(_warp_forward_loop)
    overlap_counts_numba = jit(_overlap_counts_loop)
    warp_forward = warp_forward_numba
    overlap_counts = overlap_counts_numba
else:
    warp_forward_numba = None
    overlap_counts_numba = None
    warp_forward = warp_forward_numpy
    overlap_counts = overlap_counts_numpy


# --------------------------------------------------------------------------
# graph kernels (shared body)
# --------------------------------------------------------------------------


@jit
def _masked_weight(in_set, weights):
    # index order; must match mwis.set_weight bit for bit
    s = 0.0
    for i in range(weights.shape[0]):
        if in_set[i]:
            s += weights[i]
    return s


def _mwis_enumerate_py(weights, adj_bits):
    """Depth-first enumeration of every independent set in lexicographic order.

    Returns the bitmask of the first maximum-weight set met, which is the
    lexicographically smallest optimum because preorder over increasing
    indices visits sets in lexicographic order of their sorted index lists.
    """
    n = weights.shape[0]
    best_bits = 0
    best_w = 0.0
    if n == 0:
        return best_bits, best_w
    nxt = np.zeros(n + 1, dtype=np.int64)
    acc = np.zeros(n + 1, dtype=np.float64)
    blocked = np.zeros(n + 1, dtype=np.int64)
    bits = np.zeros(n + 1, dtype=np.int64)
    depth = 0
    while depth >= 0:
        i = nxt[depth]
        blk = blocked[depth]
        while i < n and (blk >> i) & 1:
            i += 1
        if i >= n:
            depth -= 1
            continue
        nxt[depth] = i + 1
        s = acc[depth] + weights[i]
        b = bits[depth] | (np.int64(1) << i)
        if s > best_w:
            best_w = s
            best_bits = b
        depth += 1
        nxt[depth] = i + 1
        acc[depth] = s
        blocked[depth] = blk | adj_bits[i]
        bits[depth] = b
    return best_bits, best_w


@jit
def _rand(state, k):
    # MINSTD; identical sequence compiled or interpreted
    state[0] = (state[0] * 48271) % 2147483647
    return state[0] % k


@jit
def _add_vertex(v, in_set, conflicts, adj):
    in_set[v] = True
    for u in range(adj.shape[0]):
        if adj[v, u]:
            conflicts[u] += 1


@jit
def _remove_vertex(v, in_set, conflicts, adj):
    in_set[v] = False
    for u in range(adj.shape[0]):
        if adj[v, u]:
            conflicts[u] -= 1


@jit
def _pick(cand, ncand, weights, penalty, gain, mode, state):
    # mode 0: uniform, 1: best gain, 2: lowest penalty; ties uniform
    if mode == 0:
        return cand[_rand(state, ncand)]
    best_val = 0.0
    nbest = 0
    for j in range(ncand):
        val = gain[j] if mode == 1 else -float(penalty[cand[j]])
        if nbest == 0 or val > best_val:
            best_val = val
            nbest = 1
        elif val == best_val:
            nbest += 1
    k = _rand(state, nbest)
    for j in range(ncand):
        val = gain[j] if mode == 1 else -float(penalty[cand[j]])
        if val == best_val:
            if k == 0:
                return cand[j]
            k -= 1
    return cand[0]


def _pls_search_py(weights, adj, seed, max_iterations, penalty_reset):
    """Phased local search for a maximum-weight independent set.

    Phases cycle every 50 selections through uniform-random, greedy-by-weight
    (two blocks) and penalty-driven choice. Each selection adds a free vertex
    if one exists, otherwise makes a one-for-one swap (the swapped-out vertex
    becomes tabu), and perturbs when stalled. Only positive-weight vertices
    are considered. Returns the best set seen as a boolean vector.
    """
    n = weights.shape[0]
    in_set = np.zeros(n, dtype=np.bool_)
    best = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return best
    conflicts = np.zeros(n, dtype=np.int64)
    penalty = np.zeros(n, dtype=np.int64)
    cand = np.zeros(n, dtype=np.int64)
    gain = np.zeros(n, dtype=np.float64)
    state = np.zeros(1, dtype=np.int64)
    state[0] = seed % 2147483646 + 1

    npos = 0
    for v in range(n):
        if weights[v] > 0.0:
            npos += 1
    if npos == 0:
        return best

    # greedy-by-weight baseline seeds the incumbent
    order = np.argsort(-weights, kind="mergesort")
    for j in range(n):
        v = order[j]
        if weights[v] > 0.0 and conflicts[v] == 0:
            _add_vertex(v, in_set, conflicts, adj)
    best[:] = in_set
    best_w = _masked_weight(in_set, weights)

    tabu = -1
    stall = 0
    stall_limit = 2 * n + 10
    for it in range(max_iterations):
        block = (it // 50) % 4
        if block == 0:
            mode = 0
        elif block == 3:
            mode = 2
        else:
            mode = 1
        if penalty_reset > 0 and it % penalty_reset == 0:
            penalty[:] = 0

        moved = False
        if stall < stall_limit:
            ncand = 0
            for v in range(n):
                if not in_set[v] and conflicts[v] == 0 and weights[v] > 0.0:
                    cand[ncand] = v
                    gain[ncand] = weights[v]
                    ncand += 1
            if ncand > 0:
                v = _pick(cand, ncand, weights, penalty, gain, mode, state)
                _add_vertex(v, in_set, conflicts, adj)
                moved = True
            else:
                ncand = 0
                for v in range(n):
                    if not in_set[v] and conflicts[v] == 1 and weights[v] > 0.0 and v != tabu:
                        u = -1
                        for x in range(n):
                            if in_set[x] and adj[v, x]:
                                u = x
                                break
                        cand[ncand] = v
                        gain[ncand] = weights[v] - weights[u]
                        ncand += 1
                if ncand > 0:
                    v = _pick(cand, ncand, weights, penalty, gain, mode, state)
                    u = -1
                    for x in range(n):
                        if in_set[x] and adj[v, x]:
                            u = x
                            break
                    _remove_vertex(u, in_set, conflicts, adj)
                    _add_vertex(v, in_set, conflicts, adj)
                    tabu = u
                    moved = True

        if not moved:
            for v in range(n):
                if in_set[v]:
                    penalty[v] += 1
            # random positive vertex outside the set
            k = _rand(state, npos)
            v = -1
            for x in range(n):
                if weights[x] > 0.0:
                    if k == 0:
                        v = x
                        break
                    k -= 1
            if mode == 2:
                for x in range(n):
                    if in_set[x]:
                        _remove_vertex(x, in_set, conflicts, adj)
            else:
                for x in range(n):
                    if in_set[x] and adj[v, x]:
                        _remove_vertex(x, in_set, conflicts, adj)
            if not in_set[v]:
                _add_vertex(v, in_set, conflicts, adj)
            tabu = -1
            stall = 0

        w = _masked_weight(in_set, weights)
        if w > best_w:
            best_w = w
            best[:] = in_set
            stall = 0
        else:
            stall += 1
    return best


if HAS_NUMBA:
    mwis_enumerate_numba = jit(_mwis_enumerate_py)
    pls_search_numba = jit(_pls_search_py)
    mwis_enumerate = mwis_enumerate_numba
    pls_search = pls_search_numba
else:
    mwis_enumerate_numba = None
    pls_search_numba = None
    mwis_enumerate = _mwis_enumerate_py
    pls_search = _pls_search_py

mwis_enumerate_python = _mwis_enumerate_py
pls_search_python = _pls_search_py
