import numpy as np
import pytest

from gram.graphs import LabeledGraph
from gram.model import Model, ModelConfig


def random_connected_graph(rng, n, a=3, b=2, extra_edge_prob=0.15):
    """Random labeled connected graph: a random tree plus extra edges."""
    edges = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = int(rng.integers(0, b))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.random() < extra_edge_prob:
                edges[(u, v)] = int(rng.integers(0, b))
    labels = rng.integers(0, a, size=n)
    return LabeledGraph.create(n, labels, [(u, v, l) for (u, v), l in edges.items()], a, b)


def tiny_model(a=3, b=2, variant="plain", seed=0, **kw):
    kw.setdefault("d_model", 16)
    kw.setdefault("heads", 2)
    kw.setdefault("blocks", 1)
    kw.setdefault("d_ff", 32)
    kw.setdefault("radius", 2)
    kw.setdefault("seed_size", 2)
    return Model(ModelConfig(a=a, b=b, variant=variant, **kw), init_seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
