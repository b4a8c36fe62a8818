"""Estimator front end so the embedding algorithms fit into sklearn pipelines.

Both estimators consume a bipartite graph (object, edge-list path, or an
iterable of edge tuples) in ``fit`` and expose the learned matrices as
fitted attributes. ``transform`` maps (u, v) id pairs to concatenated
embedding features, which feeds a downstream classifier directly;
``score_pairs`` returns plain inner products for ranking.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import mf as mf_mod
from .centrality import compute_centrality
from .graph import BipartiteGraph, load_edge_list, project_second_order
from .negatives import (
    FrequencyNegativeSampler,
    LshNegativeSampler,
    build_lsh_index,
)
from .trainer import EmbeddingSet, TrainConfig, init_embeddings, train
from .walks import (
    WalkConfig,
    cooccurrence_counts,
    generate_corpus,
    generate_corpus_two_step,
)

__all__ = ["BipartiteEmbedding", "BipartiteMFEmbedding", "as_bipartite_graph"]


def as_bipartite_graph(data) -> BipartiteGraph:
    """Coerce fit() input into a BipartiteGraph.

    Accepts a ready graph, a path to an edge-list file, or an iterable of
    (u_token, v_token[, weight]) tuples.
    """
    if isinstance(data, BipartiteGraph):
        return data
    if isinstance(data, (str, Path)):
        with open(data, "r", encoding="utf-8") as fh:
            return load_edge_list(fh)
    if isinstance(data, io.TextIOBase):
        return load_edge_list(data)
    try:
        rows = list(data)
    except TypeError:
        raise TypeError(
            "expected a BipartiteGraph, an edge-list path, or an iterable of edges"
        ) from None
    lines = []
    for row in rows:
        parts = [str(x) for x in row]
        lines.append("\t".join(parts))
    return load_edge_list(lines)


class _FittedEmbeddingMixin:
    """Shared read-out surface of a fitted embedding model."""

    def score_pairs(self, pairs) -> np.ndarray:
        """Inner-product affinity for an (n, 2) array of (u_id, v_id) pairs."""
        check_is_fitted(self, "u_embedding_")
        pairs = np.asarray(pairs, dtype=np.int64)
        return np.einsum(
            "nd,nd->n", self.u_embedding_[pairs[:, 0]], self.v_embedding_[pairs[:, 1]]
        )

    def transform(self, pairs) -> np.ndarray:
        """Concatenated [u_embedding, v_embedding] features per (u, v) pair."""
        check_is_fitted(self, "u_embedding_")
        pairs = np.asarray(pairs, dtype=np.int64)
        return np.hstack(
            [self.u_embedding_[pairs[:, 0]], self.v_embedding_[pairs[:, 1]]]
        )

    def _store(self, graph: BipartiteGraph, emb: EmbeddingSet) -> None:
        self.graph_ = graph
        self.embeddings_ = emb
        self.u_embedding_ = emb.u_emb
        self.v_embedding_ = emb.v_emb
        self.u_context_ = emb.u_ctx
        self.v_context_ = emb.v_ctx


class BipartiteEmbedding(_FittedEmbeddingMixin, BaseEstimator):
    """Online joint embedding of a weighted bipartite graph.

    Fitting measures vertex centrality, runs the biased walk generator on
    both one-mode projections, counts windowed co-occurrences, and then
    optimizes the edge-reconstruction and skip-gram objectives jointly by
    stochastic gradient ascent.

    Parameters mirror the training knobs: ``gamma`` weighs the explicit
    edge term (use 1 for link prediction, 0.1 for ranking), ``alpha`` and
    ``beta`` the two skip-gram terms, ``strategy`` picks the negative
    sampler, and ``two_step`` swaps the projection walker for the
    projection-free two-hop walker on large graphs.
    """

    def __init__(
        self,
        dim: int = 128,
        epochs: int = 50,
        learning_rate: float = 0.025,
        alpha: float = 0.01,
        beta: float = 0.01,
        gamma: float = 0.1,
        ns: int = 4,
        window: int = 5,
        batch: int = 4,
        strategy: str = "lsh",
        max_walks: int = 32,
        min_walks: int = 1,
        stop_prob: float = 0.15,
        max_len: int = 100,
        centrality: str = "hits",
        centrality_tol: float = 1e-8,
        centrality_max_iter: int = 100,
        lsh_rows: int = 2,
        lsh_bands: int = 8,
        two_step: bool = False,
        seed: int = 0,
    ):
        self.dim = dim
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.ns = ns
        self.window = window
        self.batch = batch
        self.strategy = strategy
        self.max_walks = max_walks
        self.min_walks = min_walks
        self.stop_prob = stop_prob
        self.max_len = max_len
        self.centrality = centrality
        self.centrality_tol = centrality_tol
        self.centrality_max_iter = centrality_max_iter
        self.lsh_rows = lsh_rows
        self.lsh_bands = lsh_bands
        self.two_step = two_step
        self.seed = seed

    def fit(self, X, y=None):
        graph = as_bipartite_graph(X)
        walk_config = WalkConfig(
            max_walks=self.max_walks,
            min_walks=self.min_walks,
            stop_prob=self.stop_prob,
            max_len=self.max_len,
            seed=self.seed,
        )
        train_config = TrainConfig(
            alpha=self.alpha,
            beta=self.beta,
            gamma=self.gamma,
            lr=self.learning_rate,
            ns=self.ns,
            window=self.window,
            bs=self.batch,
            epochs=self.epochs,
            strategy=self.strategy,
            seed=self.seed,
        )
        cent_u, cent_v = compute_centrality(
            graph,
            method=self.centrality,
            tol=self.centrality_tol,
            max_iter=self.centrality_max_iter,
        )
        if self.two_step:
            corpus_u = generate_corpus_two_step(graph, "U", cent_u, walk_config)
            corpus_v = generate_corpus_two_step(graph, "V", cent_v, walk_config)
        else:
            corpus_u = generate_corpus(
                project_second_order(graph, "U"), cent_u, walk_config
            )
            corpus_v = generate_corpus(
                project_second_order(graph, "V"), cent_v, walk_config
            )
        stats_u = cooccurrence_counts(corpus_u, self.window, graph.u_count)
        stats_v = cooccurrence_counts(corpus_v, self.window, graph.v_count)
        if self.strategy == "lsh":
            sampler_u = LshNegativeSampler(
                build_lsh_index(
                    graph, "U", self.window, self.lsh_rows, self.lsh_bands, self.seed
                )
            )
            sampler_v = LshNegativeSampler(
                build_lsh_index(
                    graph, "V", self.window, self.lsh_rows, self.lsh_bands, self.seed
                )
            )
        else:
            sampler_u = FrequencyNegativeSampler(stats_u)
            sampler_v = FrequencyNegativeSampler(stats_v)
        emb = init_embeddings(graph.u_count, graph.v_count, self.dim, self.seed)
        emb = train(
            graph, (stats_u, stats_v), (sampler_u, sampler_v), train_config, emb
        )
        self._store(graph, emb)
        self.stats_u_ = stats_u
        self.stats_v_ = stats_v
        return self


class BipartiteMFEmbedding(_FittedEmbeddingMixin, BaseEstimator):
    """Closed-form embedding of a weighted bipartite graph.

    Fitting derives the analytic implicit matrices from walk-kernel power
    sums and bucket-miss probabilities, assembles the joint block target,
    and factorizes it by truncated SVD or seeded stochastic descent.
    Dense power sums cap the per-side size; large graphs should use the
    online estimator.
    """

    def __init__(
        self,
        dim: int = 128,
        window: int = 5,
        ns: int = 4,
        alpha_scale: float = 0.01,
        beta_scale: float = 0.01,
        mode: str = "svd",
        learning_rate: float = 0.005,
        reg: float = 0.01,
        epochs: int = 100,
        lsh_rows: int = 2,
        lsh_bands: int = 8,
        seed: int = 0,
    ):
        self.dim = dim
        self.window = window
        self.ns = ns
        self.alpha_scale = alpha_scale
        self.beta_scale = beta_scale
        self.mode = mode
        self.learning_rate = learning_rate
        self.reg = reg
        self.epochs = epochs
        self.lsh_rows = lsh_rows
        self.lsh_bands = lsh_bands
        self.seed = seed

    def fit(self, X, y=None):
        graph = as_bipartite_graph(X)
        matrices = {}
        for side in ("U", "V"):
            projection = project_second_order(graph, side)
            index = build_lsh_index(
                graph, side, self.window, self.lsh_rows, self.lsh_bands, self.seed
            )
            matrices[side] = mf_mod.analytic_implicit_matrix(
                projection, self.window, self.ns, index
            )
        block = mf_mod.assemble_block(
            graph, matrices["U"], matrices["V"], self.alpha_scale, self.beta_scale
        )
        emb = mf_mod.factorize(
            block,
            self.dim,
            mode=self.mode,
            lr=self.learning_rate,
            reg=self.reg,
            epochs=self.epochs,
            seed=self.seed,
        )
        self._store(graph, emb)
        self.block_ = block
        return self
