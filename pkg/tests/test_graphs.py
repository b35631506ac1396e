import numpy as np
import pytest
import scipy.sparse.csgraph as csgraph

from gram import graphs as G
from gram.graphs import GraphError, LabeledGraph, NodeOrdering

from conftest import random_connected_graph


def test_to_tensors_two_node_example():
    g = LabeledGraph.create(2, [0, 1], [(0, 1, 0)], a=2, b=2)
    t = G.to_tensors(g, NodeOrdering.create([0, 1]))
    assert np.array_equal(t.x, [[1, 0], [0, 1]])
    assert np.array_equal(t.adj[0, 1], [1, 0])
    assert np.array_equal(t.adj[1, 0], [1, 0])
    assert not t.adj[0, 0].any() and not t.adj[1, 1].any()


def test_to_tensors_single_node():
    g = LabeledGraph.create(1, [0], [], a=1, b=1)
    t = G.to_tensors(g, NodeOrdering.create([0]))
    assert np.array_equal(t.x, [[1.0]])
    assert not t.adj.any()


def test_round_trip_1000_random_graphs(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 9))
        g = random_connected_graph(rng, n)
        ordering = NodeOrdering.create(rng.permutation(n))
        t = G.to_tensors(g, ordering)
        g2, ord2 = G.from_tensors(t)
        # positions become node ids, so the decoded pair equals the encoded
        # graph relabeled by the ordering, with the identity order
        assert ord2.perm == tuple(range(n))
        assert g2 == G.apply_ordering(g, ordering)
        assert np.array_equal(G.to_tensors(g2, ord2).x, t.x)
        assert np.array_equal(G.to_tensors(g2, ord2).adj, t.adj)


def test_from_tensors_two_node_inverse():
    g = LabeledGraph.create(2, [0, 1], [(0, 1, 0)], a=2, b=2)
    t = G.to_tensors(g, NodeOrdering.create([0, 1]))
    g2, ord2 = G.from_tensors(t)
    assert g2 == g and ord2.perm == (0, 1)


def test_from_tensors_all_zero_adjacency_gives_isolated_nodes():
    x = np.eye(3)
    adj = np.zeros((3, 3, 2))
    g, _ = G.from_tensors(G.TensorPair(x, adj))
    assert g.n == 3 and g.m == 0 and g.node_labels == (0, 1, 2)


def test_from_tensors_rejects_asymmetric():
    x = np.eye(2)
    adj = np.zeros((2, 2, 1))
    adj[0, 1, 0] = 1.0
    with pytest.raises(GraphError, match="symmetric"):
        G.from_tensors(G.TensorPair(x, adj))


def test_from_tensors_rejects_bad_rows_and_diagonal():
    adj = np.zeros((2, 2, 1))
    with pytest.raises(GraphError, match="one-hot"):
        G.from_tensors(G.TensorPair(np.array([[1.0, 1.0], [0.0, 1.0]]), adj))
    adj2 = np.zeros((2, 2, 1))
    adj2[0, 0, 0] = 1.0
    with pytest.raises(GraphError, match="diagonal"):
        G.from_tensors(G.TensorPair(np.eye(2), adj2))


def test_to_tensors_label_out_of_alphabet():
    with pytest.raises(GraphError, match="label"):
        LabeledGraph.create(2, [0, 5], [(0, 1, 0)], a=2, b=1)


def test_graph_invariants_rejected():
    with pytest.raises(GraphError, match="self-loop"):
        LabeledGraph.create(2, [0, 0], [(1, 1, 0)], a=1, b=1)
    with pytest.raises(GraphError, match="duplicate"):
        LabeledGraph.create(2, [0, 0], [(0, 1, 0), (1, 0, 0)], a=1, b=1)
    with pytest.raises(GraphError, match="out of range"):
        LabeledGraph.create(2, [0, 0], [(0, 5, 0)], a=1, b=1)


def test_bfs_path_from_endpoint(rng):
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0), (1, 2, 0), (2, 3, 0)], a=1, b=1)
    ordering = G.bfs_ordering(g, 0, rng)
    assert ordering.perm == (0, 1, 2, 3)


def test_bfs_star_levels(rng):
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0), (0, 2, 0), (0, 3, 0)], a=1, b=1)
    ordering = G.bfs_ordering(g, 0, rng)
    assert ordering.perm[0] == 0
    assert sorted(ordering.perm[1:]) == [1, 2, 3]


def test_bfs_rejects_disconnected(rng):
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0)], a=1, b=1)
    with pytest.raises(GraphError, match="disconnected"):
        G.bfs_ordering(g, 0, rng)


def test_bfs_prefix_connectivity_1000(rng):
    """Every BFS prefix induces a connected subgraph (brute-force check)."""
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        g = random_connected_graph(rng, n)
        ordering = G.bfs_ordering(g, int(rng.integers(n)), rng)
        og = G.apply_ordering(g, ordering)
        for s in range(1, n + 1):
            edges = [(u, v) for u, v, _ in og.edges if v < s]
            seen = {0}
            frontier = [0]
            while frontier:
                u = frontier.pop()
                for x, y in edges:
                    if x == u and y not in seen:
                        seen.add(y)
                        frontier.append(y)
                    elif y == u and x not in seen:
                        seen.add(x)
                        frontier.append(x)
            assert len(seen) == s, f"prefix {s} disconnected"


def test_frontier_path_example():
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0), (1, 2, 0), (2, 3, 0)], a=1, b=1)
    f = G.frontier_nodes(g, NodeOrdering.create([0, 1, 2, 3]), 3)
    assert list(f) == [1, 2]


def test_frontier_star_example():
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0), (0, 2, 0), (0, 3, 0)], a=1, b=1)
    f = G.frontier_nodes(g, NodeOrdering.create([0, 1, 2, 3]), 2)
    assert list(f) == [0, 1]


def test_frontier_is_contiguous_and_sound(rng):
    """No true edge endpoint ever falls outside the frontier, over random
    connected graphs and BFS orderings."""
    for _ in range(300):
        n = int(rng.integers(3, 31))
        g = random_connected_graph(rng, n)
        ordering = G.bfs_ordering(g, int(rng.integers(n)), rng)
        og = G.apply_ordering(g, ordering)
        ident = NodeOrdering.create(range(n))
        for s in range(1, n):
            f = set(G.frontier_nodes(og, ident, s).tolist())
            assert f == set(range(min(f), s))  # contiguous, ends at s-1
            for u, v, _ in og.edges:
                if v == s:
                    assert u in f, f"edge ({u}, {s}) outside frontier {sorted(f)}"


def test_frontier_range_errors():
    g = LabeledGraph.create(3, [0] * 3, [(0, 1, 0), (1, 2, 0)], a=1, b=1)
    ident = NodeOrdering.create(range(3))
    with pytest.raises(GraphError):
        G.frontier_nodes(g, ident, 0)
    with pytest.raises(GraphError):
        G.frontier_nodes(g, ident, 4)


def test_shortest_paths_path_graph():
    g = LabeledGraph.create(4, [0] * 4, [(0, 1, 0), (1, 2, 0), (2, 3, 0)], a=1, b=1)
    d = G.shortest_paths(g, cap=10)
    assert d[0, 3] == 3 and d[3, 0] == 3 and d[0, 0] == 0


def test_shortest_paths_unreachable_bucket():
    g = LabeledGraph.create(2, [0, 0], [], a=1, b=1)
    d = G.shortest_paths(g, cap=5)
    assert d[0, 1] == 6 and d[1, 0] == 6


def test_shortest_paths_vs_floyd_warshall(rng):
    for _ in range(50):
        n = int(rng.integers(2, 25))
        g = random_connected_graph(rng, n)
        cap = int(rng.integers(1, 6))
        d = G.shortest_paths(g, cap)
        assert np.array_equal(d, d.T)
        full = csgraph.floyd_warshall(g.adjacency_matrix(), unweighted=True)
        expected = np.minimum(full, cap + 1).astype(np.int64)
        assert np.array_equal(d, expected)


def test_graph_statistics_triangle_and_path():
    tri = LabeledGraph.create(3, [0] * 3, [(0, 1, 0), (0, 2, 0), (1, 2, 0)], a=1, b=1)
    st = G.graph_statistics(tri)
    assert list(st.degrees) == [2, 2, 2]
    assert np.allclose(st.clustering, 1.0)
    path = LabeledGraph.create(3, [0] * 3, [(0, 1, 0), (1, 2, 0)], a=1, b=1)
    assert np.allclose(G.graph_statistics(path).clustering, 0.0)


def test_graph_statistics_vs_triangle_enumeration(rng):
    for _ in range(40):
        n = int(rng.integers(3, 20))
        g = random_connected_graph(rng, n, extra_edge_prob=0.3)
        st = G.graph_statistics(g)
        mat = g.adjacency_matrix()
        for v in range(n):
            nbrs = [u for u in range(n) if mat[v, u]]
            deg = len(nbrs)
            assert st.degrees[v] == deg
            links = sum(1 for i in range(deg) for j in range(i + 1, deg)
                        if mat[nbrs[i], nbrs[j]])
            expect = 2 * links / (deg * (deg - 1)) if deg >= 2 else 0.0
            assert st.clustering[v] == pytest.approx(expect, abs=1e-12)
