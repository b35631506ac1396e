"""Autoregressive labeled-graph generation with distance-biased graph
attention, synthetic corpus generators, and graph-kernel MMD evaluation."""

from .graphs import (GraphError, GraphStats, LabeledGraph, NodeOrdering,
                     TensorPair, apply_ordering, bfs_ordering, from_tensors,
                     frontier_nodes, graph_statistics, shortest_paths,
                     to_tensors)
from .model import Model, ModelConfig, OrderedGraph, StepOutput, edge_candidates
from .training import TrainConfig, load_checkpoint, save_checkpoint, teacher_forced_loss, train
from .sampler import SeedBank, build_seed_bank, generate_graph
from .datasets import CorpusSpec, corpus_stats, generate_corpus, read_corpus, split_corpus, write_corpus
from .evaluation import (EvalReport, evaluate_corpora, gk_mmd2, mmd_squared,
                         nspdk_features, nspdk_kernel, orbit_counts,
                         statistic_mmd, uniqueness_novelty)

__version__ = "0.1.0"

__all__ = [
    "GraphError", "GraphStats", "LabeledGraph", "NodeOrdering", "TensorPair",
    "apply_ordering", "bfs_ordering", "from_tensors", "frontier_nodes",
    "graph_statistics", "shortest_paths", "to_tensors",
    "Model", "ModelConfig", "OrderedGraph", "StepOutput", "edge_candidates",
    "TrainConfig", "load_checkpoint", "save_checkpoint", "teacher_forced_loss", "train",
    "SeedBank", "build_seed_bank", "generate_graph",
    "CorpusSpec", "corpus_stats", "generate_corpus", "read_corpus",
    "split_corpus", "write_corpus",
    "EvalReport", "evaluate_corpora", "gk_mmd2", "mmd_squared",
    "nspdk_features", "nspdk_kernel", "orbit_counts", "statistic_mmd",
    "uniqueness_novelty",
]
