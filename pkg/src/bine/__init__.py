"""Bipartite network embedding toolkit.

Learns dense vertex representations of weighted bipartite graphs two
ways: an online optimizer that couples observed-edge reconstruction with
skip-gram training over biased random-walk corpora, and an equivalent
closed-form path that factorizes the assembled relation matrices. Ships
with samplers, walk diagnostics, and link-prediction / top-K evaluation
harnesses, plus a CLI (``bine``) for reproducible runs.
"""

from .estimators import BipartiteEmbedding, BipartiteMFEmbedding, as_bipartite_graph
from .graph import (
    BipartiteGraph,
    GraphFormatError,
    HomogeneousProjection,
    edge_probability,
    load_edge_list,
    project_second_order,
    write_edge_list,
)
from .trainer import DivergenceError, EmbeddingSet, TrainConfig

__version__ = "0.1.0"

__all__ = [
    "BipartiteEmbedding",
    "BipartiteGraph",
    "BipartiteMFEmbedding",
    "DivergenceError",
    "EmbeddingSet",
    "GraphFormatError",
    "HomogeneousProjection",
    "TrainConfig",
    "__version__",
    "as_bipartite_graph",
    "edge_probability",
    "load_edge_list",
    "project_second_order",
    "write_edge_list",
]
