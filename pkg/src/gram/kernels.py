"""Hot numeric kernels with two interchangeable backends.

By default the loop-heavy kernels (all-pairs capped BFS distances and
connected 4-node graphlet enumeration) are compiled with numba's @njit on
first use.  Setting the environment variable ``GRAM_NUMBA=0`` before import
(or running without numba installed) selects pure numpy/python fallbacks.
``python benchmarks/bench_kernels.py`` times both paths side by side.
"""
from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("GRAM_NUMBA", "1").strip().lower()
_WANT_NUMBA = _FLAG not in ("0", "false", "no", "off")

try:
    if _WANT_NUMBA:
        from numba import njit as _njit
    else:
        _njit = None
except ImportError:  # pragma: no cover - depends on install
    _njit = None


def backend() -> str:
    """Name of the active kernel backend: ``"numba"`` or ``"numpy"``."""
    return "numba" if _njit is not None else "numpy"


# ---------------------------------------------------------------------------
# All-pairs shortest path lengths, capped.
#
# Entries hold min(bfs_distance, cap + 1); cap + 1 is the shared bucket for
# "farther than cap or unreachable".  Diagonal is 0.
# ---------------------------------------------------------------------------

def _capped_distances_csr(indptr, indices, n, cap):
    out = np.full((n, n), cap + 1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for src in range(n):
        row = out[src]
        row[src] = 0
        queue[0] = src
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            du = row[u]
            if du >= cap:
                continue
            for k in range(indptr[u], indptr[u + 1]):
                v = indices[k]
                if row[v] > du + 1:
                    row[v] = du + 1
                    queue[tail] = v
                    tail += 1
    return out


def capped_distances_numpy(indptr, indices, n, cap):
    """Fallback: level-synchronous frontier expansion with dense matrices."""
    dist = np.full((n, n), cap + 1, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    if n == 0 or len(indices) == 0:
        return dist
    adj = np.zeros((n, n), dtype=np.uint8)
    src = np.repeat(np.arange(n), np.diff(indptr))
    adj[src, indices] = 1
    reached = np.eye(n, dtype=bool)
    frontier = np.eye(n, dtype=bool)
    for d in range(1, cap + 1):
        frontier = ((frontier.astype(np.uint8) @ adj) > 0) & ~reached
        if not frontier.any():
            break
        dist[frontier] = d
        reached |= frontier
    return dist


if _njit is not None:
    _capped_distances_jit = _njit(cache=True)(_capped_distances_csr)
else:
    _capped_distances_jit = None


def capped_distances(indptr, indices, n, cap):
    """All-pairs capped BFS distances from CSR adjacency (both directions)."""
    indptr = np.ascontiguousarray(indptr, dtype=np.int64)
    indices = np.ascontiguousarray(indices, dtype=np.int64)
    if _capped_distances_jit is not None:
        return _capped_distances_jit(indptr, indices, n, cap)
    return capped_distances_numpy(indptr, indices, n, cap)


# ---------------------------------------------------------------------------
# Per-node orbit counts over the 11 orbits of the 6 connected 4-node
# graphlets.  Orbit indices (position of a node inside the graphlet):
#   0 path end        1 path middle
#   2 star leaf       3 star center
#   4 cycle
#   5 paw tail        6 paw triangle edge   7 paw center
#   8 diamond rim     9 diamond hub
#  10 clique
# A 4-set with e induced edges is connected iff e >= 4, or e == 3 with no
# isolated vertex; the (edge count, within-set degree) pair then fixes the
# orbit of each vertex.
# ---------------------------------------------------------------------------

def _orbit_counts_dense(adj, counts):
    n = adj.shape[0]
    for a in range(n - 3):
        for b in range(a + 1, n - 2):
            eab = adj[a, b]
            for c in range(b + 1, n - 1):
                eac = adj[a, c]
                ebc = adj[b, c]
                e3 = eab + eac + ebc
                for d in range(c + 1, n):
                    ead = adj[a, d]
                    ebd = adj[b, d]
                    ecd = adj[c, d]
                    e = e3 + ead + ebd + ecd
                    if e < 3:
                        continue
                    da = eab + eac + ead
                    db = eab + ebc + ebd
                    dc = eac + ebc + ecd
                    dd = ead + ebd + ecd
                    if e == 3 and (da == 0 or db == 0 or dc == 0 or dd == 0):
                        continue
                    if e == 6:
                        counts[a, 10] += 1
                        counts[b, 10] += 1
                        counts[c, 10] += 1
                        counts[d, 10] += 1
                        continue
                    if e == 5:
                        base = 8
                        off = 1
                        lo = 2
                    elif e == 4:
                        if da == 2 and db == 2 and dc == 2 and dd == 2:
                            counts[a, 4] += 1
                            counts[b, 4] += 1
                            counts[c, 4] += 1
                            counts[d, 4] += 1
                            continue
                        base = 5
                        off = 1
                        lo = 1
                    else:
                        mx = max(max(da, db), max(dc, dd))
                        if mx == 3:
                            base = 2
                            off = 2
                            lo = 1
                        else:
                            base = 0
                            off = 1
                            lo = 1
                    counts[a, base + (da - lo) // off] += 1
                    counts[b, base + (db - lo) // off] += 1
                    counts[c, base + (dc - lo) // off] += 1
                    counts[d, base + (dd - lo) // off] += 1
    return counts


if _njit is not None:
    _orbit_counts_jit = _njit(cache=True)(_orbit_counts_dense)
else:
    _orbit_counts_jit = None


def orbit_counts_esu(adj_sets, n):
    """Fallback enumeration of connected induced 4-sets (ESU), sparse-friendly.

    adj_sets: list of neighbor sets.  Returns (n, 11) int64 counts.
    """
    counts = np.zeros((n, 11), dtype=np.int64)

    def record(q):
        a, b, c, d = q
        sa, sb, sc, sd = adj_sets[a], adj_sets[b], adj_sets[c], adj_sets[d]
        da = (b in sa) + (c in sa) + (d in sa)
        db = (a in sb) + (c in sb) + (d in sb)
        dc = (a in sc) + (b in sc) + (d in sc)
        dd = (a in sd) + (b in sd) + (c in sd)
        e = (da + db + dc + dd) // 2
        degs = (da, db, dc, dd)
        if e == 3:
            star = max(degs) == 3
            orbits = [(2 if deg == 1 else 3) if star else (0 if deg == 1 else 1)
                      for deg in degs]
        elif e == 4:
            if max(degs) == 2:
                orbits = [4, 4, 4, 4]
            else:
                orbits = [5 if deg == 1 else (6 if deg == 2 else 7) for deg in degs]
        elif e == 5:
            orbits = [8 if deg == 2 else 9 for deg in degs]
        else:
            orbits = [10, 10, 10, 10]
        for node, orb in zip(q, orbits):
            counts[node, orb] += 1

    def extend(sub, ext, v):
        if len(sub) == 4:
            record(sub)
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            if len(sub) == 3:
                record(sub + [w])
                continue
            in_sub_nbrs = set()
            for u in sub:
                in_sub_nbrs |= adj_sets[u]
            ext2 = ext | {u for u in adj_sets[w]
                          if u > v and u not in in_sub_nbrs and u not in sub}
            extend(sub + [w], ext2, v)

    for v in range(n):
        extend([v], {u for u in adj_sets[v] if u > v}, v)
    return counts


def orbit_counts_matrix(adj):
    """Per-node graphlet orbit counts from a dense 0/1 adjacency matrix."""
    n = adj.shape[0]
    counts = np.zeros((n, 11), dtype=np.int64)
    if n < 4:
        return counts
    if _orbit_counts_jit is not None:
        adj = np.ascontiguousarray(adj, dtype=np.int64)
        return _orbit_counts_jit(adj, counts)
    adj_sets = [set(np.flatnonzero(adj[i]).tolist()) for i in range(n)]
    return orbit_counts_esu(adj_sets, n)
