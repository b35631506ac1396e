"""Core labeled-graph machinery: representation, tensor encoding, BFS
orderings, frontier computation, shortest paths, and low-level statistics.

Graphs are undirected, without self-loops or multi-edges.  Node labels live
in [0, a), edge labels in [0, b).  All indexing is 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


class GraphError(ValueError):
    """A graph, ordering, or tensor encoding violates an invariant."""


@dataclass(frozen=True)
class LabeledGraph:
    """Undirected graph with integer node and edge labels.

    edges is a sorted tuple of (u, v, label) with u < v, one entry per edge.
    """
    n: int
    node_labels: tuple
    edges: tuple
    a: int
    b: int

    @staticmethod
    def create(n, node_labels, edges, a, b) -> "LabeledGraph":
        """Normalize, validate, and build a graph."""
        labels = tuple(int(x) for x in node_labels)
        norm = []
        for u, v, lab in edges:
            u, v, lab = int(u), int(v), int(lab)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if u > v:
                u, v = v, u
            norm.append((u, v, lab))
        norm.sort()
        g = LabeledGraph(int(n), labels, tuple(norm), int(a), int(b))
        g.validate()
        return g

    def validate(self):
        if self.n < 0 or self.a < 1 or self.b < 1:
            raise GraphError("n must be >= 0 and label alphabets >= 1")
        if len(self.node_labels) != self.n:
            raise GraphError("node_labels length differs from n")
        for lab in self.node_labels:
            if not 0 <= lab < self.a:
                raise GraphError(f"node label {lab} outside [0, {self.a})")
        seen = set()
        for u, v, lab in self.edges:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge ({u}, {v}) endpoint out of range")
            if u > v:
                raise GraphError(f"edge ({u}, {v}) not stored with u < v")
            if (u, v) in seen:
                raise GraphError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
            if not 0 <= lab < self.b:
                raise GraphError(f"edge label {lab} outside [0, {self.b})")

    @property
    def m(self) -> int:
        return len(self.edges)

    def adjacency(self):
        """Neighbor lists (list of sorted int lists)."""
        adj = [[] for _ in range(self.n)]
        for u, v, _ in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return adj

    def adjacency_matrix(self) -> np.ndarray:
        mat = np.zeros((self.n, self.n), dtype=np.uint8)
        for u, v, _ in self.edges:
            mat[u, v] = 1
            mat[v, u] = 1
        return mat

    def csr(self):
        """(indptr, indices) of the symmetric adjacency."""
        deg = np.zeros(self.n + 1, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u + 1] += 1
            deg[v + 1] += 1
        indptr = np.cumsum(deg)
        indices = np.empty(2 * self.m, dtype=np.int64)
        fill = indptr[:-1].copy()
        for u, v, _ in self.edges:
            indices[fill[u]] = v
            fill[u] += 1
            indices[fill[v]] = u
            fill[v] += 1
        return indptr, indices

    def edge_label_map(self) -> dict:
        return {(u, v): lab for u, v, lab in self.edges}

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for u, v, _ in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def is_connected(self) -> bool:
        if self.n <= 1:
            return True
        adj = self.adjacency()
        seen = np.zeros(self.n, dtype=bool)
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    count += 1
                    stack.append(v)
        return count == self.n

    def to_json_obj(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "nodes": list(self.node_labels),
            "edges": [[u, v, lab] for u, v, lab in self.edges],
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "LabeledGraph":
        try:
            a = int(obj["a"])
            b = int(obj["b"])
            nodes = obj["nodes"]
            edges = obj["edges"]
        except (KeyError, TypeError) as exc:
            raise GraphError(f"missing or malformed field: {exc}") from exc
        for e in edges:
            if len(e) != 3:
                raise GraphError(f"edge entry {e} is not [u, v, label]")
            if e[0] >= e[1]:
                raise GraphError(f"edge {e} must satisfy u < v")
        return LabeledGraph.create(len(nodes), nodes, edges, a, b)


@dataclass(frozen=True)
class NodeOrdering:
    """Permutation of {0..n-1}; perm[i] is the original index of the i-th
    generated node."""
    perm: tuple

    @staticmethod
    def create(perm) -> "NodeOrdering":
        perm = tuple(int(x) for x in perm)
        if sorted(perm) != list(range(len(perm))):
            raise GraphError("ordering is not a permutation of 0..n-1")
        return NodeOrdering(perm)

    def __len__(self):
        return len(self.perm)

    def inverse(self) -> np.ndarray:
        inv = np.empty(len(self.perm), dtype=np.int64)
        for pos, orig in enumerate(self.perm):
            inv[orig] = pos
        return inv


@dataclass(frozen=True)
class TensorPair:
    """One-hot node matrix X (n, a) and one-hot-or-zero edge tensor
    A (n, n, b) for a graph under a fixed ordering."""
    x: np.ndarray
    adj: np.ndarray


@dataclass(frozen=True)
class GraphStats:
    degrees: np.ndarray
    clustering: np.ndarray


def to_tensors(g: LabeledGraph, ordering: NodeOrdering) -> TensorPair:
    """Encode (graph, ordering) as the one-hot tensor pair."""
    if len(ordering) != g.n:
        raise GraphError("ordering length differs from node count")
    x = np.zeros((g.n, g.a), dtype=np.float64)
    for pos, orig in enumerate(ordering.perm):
        lab = g.node_labels[orig]
        if not 0 <= lab < g.a:
            raise GraphError(f"node label {lab} outside alphabet")
        x[pos, lab] = 1.0
    adj = np.zeros((g.n, g.n, g.b), dtype=np.float64)
    inv = ordering.inverse()
    for u, v, lab in g.edges:
        i, j = inv[u], inv[v]
        adj[i, j, lab] = 1.0
        adj[j, i, lab] = 1.0
    return TensorPair(x, adj)


def from_tensors(t: TensorPair):
    """Decode a tensor pair into (graph, ordering).

    Node identities are positions in the encoding, so the returned ordering
    is the identity; relabeling by the original permutation recovers the
    encoded (graph, ordering) pair exactly.
    """
    x, adj = t.x, t.adj
    if x.ndim != 2 or adj.ndim != 3:
        raise GraphError("tensor ranks must be 2 and 3")
    n, a = x.shape
    if adj.shape[0] != n or adj.shape[1] != n:
        raise GraphError("edge tensor does not match node count")
    b = adj.shape[2]
    labels = []
    for i in range(n):
        row = x[i]
        hot = np.flatnonzero(row == 1.0)
        if len(hot) != 1 or row.sum() != 1.0:
            raise GraphError(f"row {i} of node matrix is not one-hot")
        labels.append(int(hot[0]))
    if not np.array_equal(adj, adj.transpose(1, 0, 2)):
        raise GraphError("edge tensor is not symmetric")
    edges = []
    for i in range(n):
        if adj[i, i].any():
            raise GraphError(f"edge tensor has nonzero diagonal at {i}")
        for j in range(i + 1, n):
            cell = adj[i, j]
            hot = np.flatnonzero(cell == 1.0)
            if len(hot) == 0 and not cell.any():
                continue
            if len(hot) != 1 or cell.sum() != 1.0:
                raise GraphError(f"edge cell ({i}, {j}) is not one-hot")
            edges.append((i, j, int(hot[0])))
    g = LabeledGraph.create(n, labels, edges, a, b)
    return g, NodeOrdering.create(range(n))


def apply_ordering(g: LabeledGraph, ordering: NodeOrdering) -> LabeledGraph:
    """Relabel nodes so that position i under the ordering becomes node i."""
    if len(ordering) != g.n:
        raise GraphError("ordering length differs from node count")
    inv = ordering.inverse()
    labels = [g.node_labels[orig] for orig in ordering.perm]
    edges = [(int(inv[u]), int(inv[v]), lab) for u, v, lab in g.edges]
    return LabeledGraph.create(g.n, labels, edges, g.a, g.b)


def bfs_ordering(g: LabeledGraph, start: int, rng: np.random.Generator) -> NodeOrdering:
    """Breadth-first visit order from start; each dequeued node appends its
    not-yet-seen neighbors in a uniformly shuffled order drawn from rng.

    Shuffling per parent (rather than pooling a whole level) keeps children
    grouped behind their parents, which is what makes the frontier interval
    sound.  Requires a connected graph.
    """
    if not 0 <= start < g.n:
        raise GraphError(f"start node {start} out of range")
    adj = g.adjacency()
    seen = np.zeros(g.n, dtype=bool)
    seen[start] = True
    perm = [start]
    head = 0
    while head < len(perm):
        u = perm[head]
        head += 1
        fresh = [v for v in adj[u] if not seen[v]]
        if fresh:
            for v in fresh:
                seen[v] = True
            perm.extend(int(x) for x in rng.permutation(fresh))
    if len(perm) != g.n:
        raise GraphError("graph is disconnected; BFS ordering undefined")
    return NodeOrdering.create(perm)


def frontier_nodes(g: LabeledGraph, ordering: NodeOrdering, s: int) -> np.ndarray:
    """Positions that may receive an edge from the node generated at
    position s, assuming ordering is a BFS order of g.

    Returns the contiguous index interval [lo, s-1] where lo is the smallest
    position adjacent to position s-1 (or s-1 itself if none exists).
    Valid for 1 <= s <= n, with s == n describing a hypothetical next node.
    """
    n = g.n
    if not 1 <= s <= n:
        raise GraphError(f"step {s} out of range for {n} nodes")
    inv = ordering.inverse()
    prev_orig = ordering.perm[s - 1]
    lo = s - 1
    for u, v, _ in g.edges:
        if u == prev_orig or v == prev_orig:
            other = v if u == prev_orig else u
            pos = inv[other]
            if pos < lo:
                lo = int(pos)
    return np.arange(lo, s, dtype=np.int64)


def shortest_paths(g: LabeledGraph, cap: int) -> np.ndarray:
    """All-pairs BFS distance matrix with entries min(dist, cap + 1); the
    value cap + 1 is the shared beyond-cap/unreachable bucket."""
    if cap < 1:
        raise GraphError("cap must be >= 1")
    indptr, indices = g.csr()
    return kernels.capped_distances(indptr, indices, g.n, cap)


def graph_statistics(g: LabeledGraph) -> GraphStats:
    """Per-node degree and local clustering coefficient."""
    deg = g.degrees()
    clus = np.zeros(g.n, dtype=np.float64)
    if g.n > 0 and g.m > 0:
        mat = g.adjacency_matrix()
        for v in range(g.n):
            d = deg[v]
            if d < 2:
                continue
            nbrs = np.flatnonzero(mat[v])
            links = int(mat[np.ix_(nbrs, nbrs)].sum()) // 2
            clus[v] = 2.0 * links / (d * (d - 1))
    return GraphStats(deg, clus)
