"""Joint stochastic gradient-ascent training of the embeddings.

One pass over the edge list interleaves two kinds of updates. For each
edge the endpoint embeddings move to raise the log-likelihood of the
observed weighted link (the explicit relation). Each endpoint then acts
as a skip-gram center: sampled co-occurrence contexts from the walk
corpus are pulled closer while sampled negatives are pushed away, through
shared context vectors (the implicit relations). All gradients inside a
single step read pre-update values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, TextIO

import numpy as np

from .graph import BipartiteGraph
from .walks import CorpusStats

__all__ = [
    "DivergenceError",
    "EmbeddingSet",
    "TrainConfig",
    "explicit_step",
    "implicit_step",
    "init_embeddings",
    "log_sigmoid",
    "objective_components",
    "read_embeddings",
    "sigmoid",
    "train",
    "write_embeddings",
]


class DivergenceError(ArithmeticError):
    """Raised when an update produces a non-finite embedding entry."""


def sigmoid(x):
    """Numerically stable logistic function."""
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=np.float64)))


def log_sigmoid(x):
    """log(sigmoid(x)) without overflow for large negative x."""
    return -np.logaddexp(0.0, -np.asarray(x, dtype=np.float64))


@dataclass
class EmbeddingSet:
    """The four trainable matrices: one embedding and one context per side."""

    u_emb: np.ndarray
    v_emb: np.ndarray
    u_ctx: np.ndarray
    v_ctx: np.ndarray

    def __post_init__(self):
        dims = {m.shape[1] for m in (self.u_emb, self.v_emb, self.u_ctx, self.v_ctx)}
        if len(dims) != 1:
            raise ValueError("all four matrices must share one dimension")
        if self.u_emb.shape[0] != self.u_ctx.shape[0]:
            raise ValueError("u_emb and u_ctx must cover the same vertices")
        if self.v_emb.shape[0] != self.v_ctx.shape[0]:
            raise ValueError("v_emb and v_ctx must cover the same vertices")

    @property
    def dim(self) -> int:
        return self.u_emb.shape[1]

    def copy(self) -> "EmbeddingSet":
        return EmbeddingSet(
            self.u_emb.copy(), self.v_emb.copy(), self.u_ctx.copy(), self.v_ctx.copy()
        )


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the joint optimizer.

    ``alpha`` and ``beta`` weigh the two skip-gram terms, ``gamma`` the
    explicit term (1 suits link prediction, 0.1 ranking); ``lr`` is the
    constant learning rate; ``ns`` negatives and ``bs`` context draws are
    consumed per center visit; ``window`` must match the corpus statistics
    fed to :func:`train`.
    """

    alpha: float = 0.01
    beta: float = 0.01
    gamma: float = 0.1
    lr: float = 0.025
    ns: int = 4
    window: int = 5
    bs: int = 4
    epochs: int = 50
    strategy: str = "lsh"
    seed: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if min(self.ns, self.window, self.bs) < 1:
            raise ValueError("ns, window, and bs must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("trade-off weights must be nonnegative")
        if self.strategy not in ("lsh", "freq"):
            raise ValueError("strategy must be 'lsh' or 'freq'")


class NegativeSampler(Protocol):
    def draw(self, center: int, ns: int, rng: np.random.Generator) -> np.ndarray: ...


def init_embeddings(u_count: int, v_count: int, dim: int, seed: int) -> EmbeddingSet:
    """Uniform embeddings in [-0.5/dim, 0.5/dim] and zero context vectors."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    half = 0.5 / dim
    return EmbeddingSet(
        u_emb=rng.uniform(-half, half, size=(u_count, dim)),
        v_emb=rng.uniform(-half, half, size=(v_count, dim)),
        u_ctx=np.zeros((u_count, dim)),
        v_ctx=np.zeros((v_count, dim)),
    )


def explicit_step(
    emb: EmbeddingSet, u_id: int, v_id: int, w_ij: float, gamma: float, lr: float
) -> EmbeddingSet:
    """One ascent step on the weighted-edge log-likelihood.

    Both endpoint vectors move by ``lr * gamma * w_ij * (1 - sigmoid(u.v))``
    times the other pre-update vector. Mutates ``emb`` and returns it.
    """
    u = emb.u_emb[u_id].copy()
    v = emb.v_emb[v_id].copy()
    coef = lr * gamma * w_ij * (1.0 - sigmoid(u @ v))
    emb.u_emb[u_id] += coef * v
    emb.v_emb[v_id] += coef * u
    if not (np.isfinite(emb.u_emb[u_id]).all() and np.isfinite(emb.v_emb[v_id]).all()):
        raise DivergenceError(f"non-finite update at edge ({u_id}, {v_id})")
    return emb


def implicit_step(
    emb: EmbeddingSet,
    side: str,
    center: int,
    context: int,
    negatives: Sequence[int],
    weight: float,
    lr: float,
) -> EmbeddingSet:
    """One negative-sampling skip-gram step for a center vertex.

    The center embedding takes the summed gradient over the positive
    context and every negative; each involved context vector takes its own
    gradient against the pre-update center. Mutates ``emb`` and returns it.
    """
    negatives = np.asarray(negatives, dtype=np.int64)
    if negatives.size == 0:
        raise ValueError("need at least one negative sample")
    if (negatives == context).any():
        raise ValueError("negatives must differ from the context")
    if side == "U":
        vec, ctx = emb.u_emb, emb.u_ctx
    elif side == "V":
        vec, ctx = emb.v_emb, emb.v_ctx
    else:
        raise ValueError("side must be 'U' or 'V'")
    z = np.concatenate(([context], negatives))
    center_vec = vec[center].copy()
    theta = ctx[z]  # fancy indexing copies: pre-update values
    indicator = np.zeros(z.size)
    indicator[0] = 1.0
    g = lr * weight * (indicator - sigmoid(theta @ center_vec))
    vec[center] += theta.T @ g
    np.add.at(ctx, z, g[:, None] * center_vec[None, :])
    if not np.isfinite(vec[center]).all():
        raise DivergenceError(f"non-finite update at center {center} ({side})")
    return emb


def _context_table(stats: CorpusStats) -> list[tuple[np.ndarray, np.ndarray]]:
    m = stats.pair_counts
    table = []
    for i in range(m.shape[0]):
        lo, hi = m.indptr[i], m.indptr[i + 1]
        table.append((m.indices[lo:hi], np.cumsum(m.data[lo:hi], dtype=np.float64)))
    return table


def _draw_context(
    table: list[tuple[np.ndarray, np.ndarray]], center: int, rng: np.random.Generator
) -> int | None:
    cols, cum = table[center]
    if cols.size == 0:
        return None
    idx = np.searchsorted(cum, rng.random() * cum[-1], side="right")
    return int(cols[min(idx, cols.size - 1)])


def train(
    graph: BipartiteGraph,
    stats: tuple[CorpusStats, CorpusStats],
    samplers: tuple[NegativeSampler, NegativeSampler],
    config: TrainConfig,
    emb: EmbeddingSet,
) -> EmbeddingSet:
    """Run the joint optimizer for ``config.epochs`` passes over the edges.

    Each epoch visits the edges in a seeded shuffled order. Per edge, one
    explicit step runs first; then each endpoint serves as a center for
    ``bs`` context draws (proportional to its stored co-occurrence counts)
    with ``ns`` fresh negatives per draw. Centers that never occurred in
    the corpus skip their implicit updates. The whole procedure is
    deterministic in (graph, config, initial embeddings).
    """
    stats_u, stats_v = stats
    if stats_u.window != config.window or stats_v.window != config.window:
        raise ValueError("corpus statistics were built with a different window")
    sampler_u, sampler_v = samplers
    table_u = _context_table(stats_u)
    table_v = _context_table(stats_v)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(2,)))
    edges = list(graph.edges)
    for _ in range(config.epochs):
        order = rng.permutation(len(edges))
        for e in order:
            u_id, v_id, w_ij = edges[e]
            explicit_step(emb, u_id, v_id, w_ij, config.gamma, config.lr)
            for side, center, table, sampler, weight in (
                ("U", u_id, table_u, sampler_u, config.alpha),
                ("V", v_id, table_v, sampler_v, config.beta),
            ):
                for _ in range(config.bs):
                    context = _draw_context(table, center, rng)
                    if context is None:
                        break
                    negs = sampler.draw(center, config.ns, rng)
                    while True:
                        clash = negs == context
                        if not clash.any():
                            break
                        negs[clash] = sampler.draw(center, int(clash.sum()), rng)
                    implicit_step(emb, side, center, context, negs, weight, config.lr)
    return emb


def _implicit_proxy(
    vec: np.ndarray,
    ctx: np.ndarray,
    stats: CorpusStats,
    ns: int,
    rng: np.random.Generator,
    chunk: int = 100_000,
) -> float:
    coo = stats.pair_counts.tocoo()
    total = 0.0
    n = ctx.shape[0]
    for lo in range(0, coo.nnz, chunk):
        rows = coo.row[lo : lo + chunk]
        cols = coo.col[lo : lo + chunk]
        counts = coo.data[lo : lo + chunk].astype(np.float64)
        pos = np.einsum("nd,nd->n", vec[rows], ctx[cols])
        term = log_sigmoid(pos)
        negs = rng.integers(0, n, size=(rows.size, ns))
        while True:
            clash = negs == rows[:, None]
            if not clash.any():
                break
            negs[clash] = rng.integers(0, n, size=int(clash.sum()))
        neg_x = np.einsum("nd,nkd->nk", vec[rows], ctx[negs])
        term = term + log_sigmoid(-neg_x).sum(axis=1)
        total += float(counts @ term)
    return total


def objective_components(
    graph: BipartiteGraph,
    stats: tuple[CorpusStats, CorpusStats],
    emb: EmbeddingSet,
    config: TrainConfig,
) -> tuple[float, float, float]:
    """Evaluate the three optimization terms on a snapshot.

    Returns the explicit divergence term (lower is better) and seeded
    negative-sampling proxies of the two skip-gram log-likelihoods (higher
    is better). Negative draws are fixed by ``config.seed`` so repeated
    calls agree exactly.
    """
    rows = np.fromiter((e[0] for e in graph.edges), dtype=np.int64, count=len(graph.edges))
    cols = np.fromiter((e[1] for e in graph.edges), dtype=np.int64, count=len(graph.edges))
    wts = np.fromiter((e[2] for e in graph.edges), dtype=np.float64, count=len(graph.edges))
    x = np.einsum("nd,nd->n", emb.u_emb[rows], emb.v_emb[cols])
    o1 = -float(wts @ log_sigmoid(x))
    stats_u, stats_v = stats
    rng_u = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(3, 0)))
    rng_v = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(3, 1)))
    o2 = _implicit_proxy(emb.u_emb, emb.u_ctx, stats_u, config.ns, rng_u)
    o3 = _implicit_proxy(emb.v_emb, emb.v_ctx, stats_v, config.ns, rng_v)
    return o1, o2, o3


def write_embeddings(matrix: np.ndarray, tokens: Sequence[str], sink: TextIO) -> None:
    """Write "count dim" then one "token v1 .. vd" line per vertex.

    Values use shortest round-trip decimal form, so reading the file back
    reproduces the float64 matrix exactly.
    """
    count, dim = matrix.shape
    sink.write(f"{count} {dim}\n")
    for token, row in zip(tokens, matrix):
        sink.write(token + " " + " ".join(repr(float(x)) for x in row) + "\n")


def read_embeddings(source: TextIO) -> tuple[list[str], np.ndarray]:
    """Inverse of :func:`write_embeddings`."""
    header = source.readline().split()
    count, dim = int(header[0]), int(header[1])
    tokens: list[str] = []
    matrix = np.empty((count, dim))
    for i in range(count):
        parts = source.readline().split()
        tokens.append(parts[0])
        matrix[i] = [float(p) for p in parts[1 : dim + 1]]
    return tokens, matrix
