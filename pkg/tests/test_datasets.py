import collections

import numpy as np
import pytest

from gram import datasets as D
from gram.datasets import (CorpusFormatError, CorpusSpec, CorpusSpecError,
                           community_graph, corpus_stats, default_split_counts,
                           generate_corpus, read_corpus, split_corpus,
                           write_corpus)
from gram.graphs import LabeledGraph, shortest_paths

from conftest import random_connected_graph


def test_spec_validation():
    with pytest.raises(CorpusSpecError, match="family"):
        CorpusSpec("tree", 10, 5, 10)
    with pytest.raises(CorpusSpecError, match="count"):
        CorpusSpec("grid", 0, 5, 10)
    with pytest.raises(CorpusSpecError, match="n_min"):
        CorpusSpec("grid", 1, 10, 5)


# -- grid -------------------------------------------------------------------

def test_grid_3x3_label_counts():
    g = generate_corpus(CorpusSpec("grid", 1, 9, 9, seed=0,
                                   params={"min_side": 3, "max_side": 3}))[0]
    hist = collections.Counter(g.node_labels)
    assert hist == {D.GRID_CORNER: 4, D.GRID_EDGE: 4, D.GRID_INSIDE: 1}


def test_grid_3xk_has_four_corners():
    for k in (4, 5, 7):
        g = generate_corpus(CorpusSpec("grid", 1, 3 * k, 3 * k, seed=1,
                                       params={"min_side": 3, "max_side": max(3, k)}))[0]
        assert sum(1 for lab in g.node_labels if lab == D.GRID_CORNER) == 4


def test_grid_labels_match_degree_oracle():
    graphs = generate_corpus(CorpusSpec("grid", 100, 12, 36, seed=3,
                                        params={"min_side": 3, "max_side": 6}))
    for g in graphs:
        deg = g.degrees()
        for v in range(g.n):
            expected = {2: D.GRID_CORNER, 3: D.GRID_EDGE, 4: D.GRID_INSIDE}[int(deg[v])]
            assert g.node_labels[v] == expected


def test_grid_edge_axis_labels_consistent():
    g = generate_corpus(CorpusSpec("grid", 1, 12, 12, seed=5,
                                   params={"min_side": 3, "max_side": 4}))[0]
    # horizontal edges join consecutive ids, vertical edges differ by width
    diffs = {lab: {v - u for u, v, l in g.edges if l == lab} for lab in (0, 1)}
    assert diffs[D.GRID_HORIZONTAL] == {1}
    assert len(diffs[D.GRID_VERTICAL]) == 1 and diffs[D.GRID_VERTICAL] != {1}


def test_grid_infeasible_shape_is_error():
    with pytest.raises(CorpusSpecError, match="feasible"):
        generate_corpus(CorpusSpec("grid", 1, 50, 54, seed=0,
                                   params={"min_side": 7, "max_side": 7}))


# -- lobster ----------------------------------------------------------------

def test_lobster_degenerate_probabilities_give_pure_path():
    graphs = generate_corpus(CorpusSpec("lobster", 5, 10, 30, seed=2,
                                        params={"p1": 0.0, "p2": 0.0}))
    for g in graphs:
        assert all(lab == D.LOBSTER_BACKBONE for lab in g.node_labels)
        deg = sorted(g.degrees())
        assert deg[:2] == [1, 1] and all(d == 2 for d in deg[2:])


def test_lobster_leaves_have_degree_one():
    graphs = generate_corpus(CorpusSpec("lobster", 20, 30, 80, seed=4))
    for g in graphs:
        deg = g.degrees()
        for v, lab in enumerate(g.node_labels):
            if lab == D.LOBSTER_LEAF:
                assert deg[v] == 1


def test_lobster_labels_match_bfs_from_backbone_oracle():
    graphs = generate_corpus(CorpusSpec("lobster", 30, 20, 60, seed=6))
    for g in graphs:
        backbone = [v for v, lab in enumerate(g.node_labels) if lab == D.LOBSTER_BACKBONE]
        assert backbone
        dist = shortest_paths(g, cap=3)
        for v in range(g.n):
            d = min(int(dist[b, v]) for b in backbone)
            assert g.node_labels[v] == d


def test_lobster_edge_labels_touch_leaf_rule():
    graphs = generate_corpus(CorpusSpec("lobster", 10, 20, 60, seed=8))
    for g in graphs:
        for u, v, lab in g.edges:
            touches_leaf = D.LOBSTER_LEAF in (g.node_labels[u], g.node_labels[v])
            assert lab == (1 if touches_leaf else 0)


def test_lobster_is_tree_and_connected():
    for g in generate_corpus(CorpusSpec("lobster", 10, 20, 60, seed=9)):
        assert g.m == g.n - 1 and g.is_connected()


# -- community --------------------------------------------------------------

def test_community_extreme_parameters_give_four_cliques():
    rng = np.random.default_rng(0)
    g = community_graph(rng, k=5, p_in=1.0, p_out=0.0)
    assert not g.is_connected()
    for u, v, lab in g.edges:
        assert g.node_labels[u] == g.node_labels[v] and lab == D.COMM_INTRA
    hist = collections.Counter(g.node_labels)
    assert all(hist[c] == 5 for c in range(4))
    assert g.m == 4 * (5 * 4 // 2)


def test_community_label_histogram_equal_blocks():
    for g in generate_corpus(CorpusSpec("community", 5, 40, 80, seed=3)):
        hist = collections.Counter(g.node_labels)
        assert len(set(hist.values())) == 1 and sum(hist.values()) == g.n
        assert g.is_connected()


def test_community_intra_density_monte_carlo():
    graphs = generate_corpus(CorpusSpec("community", 200, 48, 100, seed=13))
    dens = []
    for g in graphs:
        k = g.n // 4
        intra = sum(1 for u, v, lab in g.edges if lab == D.COMM_INTRA)
        dens.append(intra / (4 * k * (k - 1) / 2))
    assert abs(np.mean(dens) - 0.23) < 0.02


def test_community_edge_labels_match_blocks():
    for g in generate_corpus(CorpusSpec("community", 3, 40, 60, seed=1)):
        for u, v, lab in g.edges:
            same = g.node_labels[u] == g.node_labels[v]
            assert lab == (D.COMM_INTRA if same else D.COMM_INTER)


# -- preferential attachment --------------------------------------------------

def test_ba_edge_count_closed_form():
    for g in generate_corpus(CorpusSpec("ba", 20, 30, 100, seed=2)):
        assert g.m == 6 + 4 * (g.n - 4)
        assert g.is_connected()


def test_ba_hub_fraction_close_to_half():
    for g in generate_corpus(CorpusSpec("ba", 30, 50, 100, seed=4)):
        hubs = sum(1 for lab in g.node_labels if lab == D.BA_HUB)
        # median split with ties to hub: at least half are hubs, and the
        # non-hub side cannot exceed half
        assert hubs >= g.n // 2
        deg = g.degrees()
        med = np.median(deg)
        for v, lab in enumerate(g.node_labels):
            assert lab == (D.BA_HUB if deg[v] >= med else D.BA_EXTERIOR)


def test_ba_heavy_tail():
    graphs = generate_corpus(CorpusSpec("ba", 100, 100, 100, seed=5))
    assert all(g.degrees().max() > 2 * np.median(g.degrees()) for g in graphs)


def test_ba_edge_labels_by_endpoint_classes():
    for g in generate_corpus(CorpusSpec("ba", 5, 30, 60, seed=6)):
        for u, v, lab in g.edges:
            assert lab == g.node_labels[u] + g.node_labels[v]


def test_ba_requires_enough_nodes():
    with pytest.raises(CorpusSpecError, match="m=4"):
        generate_corpus(CorpusSpec("ba", 1, 4, 10, seed=0))


@pytest.mark.parametrize("family", D.FAMILIES)
def test_all_families_connected_and_in_range(family):
    lo, hi = (9, 25) if family != "ba" else (12, 25)
    spec = CorpusSpec(family, 15, lo, hi, seed=17,
                      params={"min_side": 3, "max_side": 5} if family == "grid" else {})
    a, b = D.ALPHABETS[family]
    for g in generate_corpus(spec):
        assert lo <= g.n <= hi
        assert g.is_connected()
        assert (g.a, g.b) == (a, b)
        g.validate()


# -- frontier statistics -------------------------------------------------------

def test_corpus_stats_paper_scale_values():
    grid = generate_corpus(CorpusSpec("grid", 150, 50, 100, seed=7))
    st = corpus_stats(grid, seed=0)
    assert 6.8 <= st["mean_beta"] <= 11.2
    assert 65 <= st["mean_n"] <= 80
    assert 1.3 <= st["mean_alpha"] <= 2.3


# -- splitting / io ------------------------------------------------------------

def test_split_700_into_500_100_100(rng):
    graphs = [random_connected_graph(rng, 5) for _ in range(700)]
    train, test, val = split_corpus(graphs, (500, 100, 100), seed=1)
    assert (len(train), len(test), len(val)) == (500, 100, 100)
    assert default_split_counts(700) == (500, 100, 100)


def test_split_deterministic_and_partition(rng):
    graphs = [random_connected_graph(rng, int(rng.integers(4, 9))) for _ in range(20)]
    s1 = split_corpus(graphs, (14, 3, 3), seed=5)
    s2 = split_corpus(graphs, (14, 3, 3), seed=5)
    assert all([a == b for p1, p2 in zip(s1, s2) for a, b in zip(p1, p2)])
    combined = [g for part in s1 for g in part]
    assert sorted(map(id, combined)) == sorted(map(id, graphs))


def test_split_ratio_mismatch(rng):
    graphs = [random_connected_graph(rng, 5) for _ in range(10)]
    with pytest.raises(CorpusSpecError, match="sum"):
        split_corpus(graphs, (5, 3, 3), seed=0)


def test_corpus_io_round_trip(tmp_path, rng):
    graphs = [random_connected_graph(rng, int(rng.integers(2, 12))) for _ in range(100)]
    path = tmp_path / "c.jsonl"
    write_corpus(path, graphs)
    assert read_corpus(path) == graphs


def test_corpus_io_rejects_self_loop_with_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    good = '{"a":1,"b":1,"nodes":[0,0],"edges":[[0,1,0]]}'
    bad = '{"a":1,"b":1,"nodes":[0,0],"edges":[[1,1,0]]}'
    path.write_text(good + "\n" + bad + "\n")
    with pytest.raises(CorpusFormatError, match="line 2"):
        read_corpus(path)


def test_corpus_io_rejects_unordered_edge(tmp_path):
    path = tmp_path / "b.jsonl"
    path.write_text('{"a":1,"b":1,"nodes":[0,0],"edges":[[1,0,0]]}\n')
    with pytest.raises(CorpusFormatError, match="u < v"):
        read_corpus(path)


def test_corpus_io_rejects_bad_json(tmp_path):
    path = tmp_path / "b.jsonl"
    path.write_text('{"a":1\n')
    with pytest.raises(CorpusFormatError, match="line 1"):
        read_corpus(path)


def test_corpus_io_empty_file_is_empty_corpus(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_corpus(path) == []
