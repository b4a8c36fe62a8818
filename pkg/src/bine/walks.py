"""Biased, self-adaptive random-walk corpora and their statistics.

Walks run on a same-side projection. Each vertex starts a number of walks
proportional to its centrality (never fewer than a floor), every step
moves to a neighbor with probability proportional to the connecting
weight, and after the first forced transition each further step carries a
fixed stopping probability, so sequence lengths vary like sentences in a
text corpus. Co-occurrence counting then slides a symmetric window over
every sequence.
"""

from __future__ import annotations

import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .centrality import CentralityScores
from .graph import BipartiteGraph, HomogeneousProjection

__all__ = [
    "Corpus",
    "CorpusStats",
    "WalkConfig",
    "cooccurrence_counts",
    "generate_corpus",
    "generate_corpus_two_step",
    "power_law_slope",
    "write_corpus",
]

_SIDE_KEY = {"U": 0, "V": 1}

# Guard against quadratic memory in the dense co-occurrence accumulator.
_DENSE_COUNT_CAP = 16_000_000


@dataclass(frozen=True)
class WalkConfig:
    """Knobs of the walk generator.

    ``max_walks`` is the budget of a vertex with centrality 1 and
    ``min_walks`` the floor for everyone else; ``stop_prob`` is the
    per-step termination probability after the first transition;
    ``max_len`` caps pathological walks.
    """

    max_walks: int = 32
    min_walks: int = 1
    stop_prob: float = 0.15
    max_len: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.min_walks < 1 or self.max_walks < self.min_walks:
            raise ValueError("need 1 <= min_walks <= max_walks")
        if not 0.0 < self.stop_prob < 1.0:
            raise ValueError("stop_prob must be in (0, 1)")
        if self.max_len < 2:
            raise ValueError("max_len must be >= 2")


@dataclass(frozen=True)
class Corpus:
    """Vertex-id sequences generated for one side."""

    side: str
    sequences: tuple[tuple[int, ...], ...]

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sequences)

    @property
    def n_transitions(self) -> int:
        return sum(len(s) - 1 for s in self.sequences)


def _walk_rng(seed: int, side: str, vertex: int, walk_index: int) -> np.random.Generator:
    # One independent stream per (vertex, walk), so the corpus is identical
    # no matter how walk generation is scheduled.
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_SIDE_KEY[side], vertex, walk_index))
    return np.random.default_rng(ss)


def walk_counts(centrality: CentralityScores, config: WalkConfig) -> np.ndarray:
    """Per-vertex walk budget: max(ceil(score * max_walks), min_walks)."""
    scaled = np.ceil(centrality.scores * config.max_walks).astype(np.int64)
    return np.maximum(scaled, config.min_walks)


def _sample_walk(
    start: int,
    neighbors: list[Sequence[int]],
    cumweights: list[Sequence[float]],
    config: WalkConfig,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    extra = int(rng.geometric(config.stop_prob)) - 1
    length = min(2 + extra, config.max_len)
    draws = rng.random(length - 1).tolist()
    seq = [start]
    cur = start
    for r in draws:
        cum = cumweights[cur]
        idx = bisect_right(cum, r * cum[-1])
        if idx == len(cum):
            idx -= 1
        cur = neighbors[cur][idx]
        seq.append(cur)
    return tuple(seq)


def generate_corpus(
    projection: HomogeneousProjection,
    centrality: CentralityScores,
    config: WalkConfig,
) -> Corpus:
    """Run the biased walk generator on a projection.

    Every vertex with at least one off-diagonal neighbor starts its budget
    of walks (see :func:`walk_counts`). Each walk makes one forced
    transition, then keeps stepping with probability ``1 - stop_prob`` per
    step, moving to neighbor j with probability proportional to the
    projection weight; self-loops are never taken. Sequences are ordered
    by (start vertex, walk index), so a fixed seed gives a byte-identical
    corpus.
    """
    if projection.side != centrality.side:
        raise ValueError("projection and centrality must describe the same side")
    n = projection.n_vertices
    if centrality.scores.shape[0] != n:
        raise ValueError("centrality sized for a different vertex set")
    offdiag = projection.offdiagonal()
    if offdiag.nnz == 0:
        warnings.warn(
            "projection has no off-diagonal weight; corpus is empty",
            RuntimeWarning,
            stacklevel=2,
        )
        return Corpus(side=projection.side, sequences=())

    neighbors: list[Sequence[int]] = []
    cumweights: list[Sequence[float]] = []
    for i in range(n):
        lo, hi = offdiag.indptr[i], offdiag.indptr[i + 1]
        neighbors.append(offdiag.indices[lo:hi].tolist())
        cumweights.append(np.cumsum(offdiag.data[lo:hi]).tolist())

    counts = walk_counts(centrality, config)
    sequences = []
    for v in range(n):
        if not neighbors[v]:
            continue
        for walk_index in range(counts[v]):
            rng = _walk_rng(config.seed, projection.side, v, walk_index)
            sequences.append(_sample_walk(v, neighbors, cumweights, config, rng))
    return Corpus(side=projection.side, sequences=tuple(sequences))


def generate_corpus_two_step(
    graph: BipartiteGraph,
    side: str,
    centrality: CentralityScores,
    config: WalkConfig,
) -> Corpus:
    """Walk generator for large graphs that never builds the projection.

    Each same-side transition is sampled as two hops in the bipartite
    graph (across and back), each proportional to edge weight. This visits
    the projection's neighborhoods without materializing dense projection
    rows; unlike :func:`generate_corpus` a hop pair may return to the
    current vertex.
    """
    if side not in ("U", "V"):
        raise ValueError("side must be 'U' or 'V'")
    if centrality.side != side:
        raise ValueError("centrality side mismatch")
    n = graph.u_count if side == "U" else graph.v_count
    m = graph.v_count if side == "U" else graph.u_count
    out_nbrs: list[Sequence[int]] = []
    out_cum: list[Sequence[float]] = []
    back_nbrs: list[Sequence[int]] = []
    back_cum: list[Sequence[float]] = []
    fwd = graph.u_neighbors if side == "U" else graph.v_neighbors
    bwd = graph.v_neighbors if side == "U" else graph.u_neighbors
    for i in range(n):
        ids, ws = fwd(i)
        out_nbrs.append(ids.tolist())
        out_cum.append(np.cumsum(ws).tolist())
    for j in range(m):
        ids, ws = bwd(j)
        back_nbrs.append(ids.tolist())
        back_cum.append(np.cumsum(ws).tolist())

    counts = walk_counts(centrality, config)
    sequences = []
    for v in range(n):
        if not out_nbrs[v]:
            continue
        for walk_index in range(counts[v]):
            rng = _walk_rng(config.seed, side, v, walk_index)
            extra = int(rng.geometric(config.stop_prob)) - 1
            length = min(2 + extra, config.max_len)
            draws = rng.random(2 * (length - 1)).tolist()
            seq = [v]
            cur = v
            for t in range(length - 1):
                cum = out_cum[cur]
                idx = min(bisect_right(cum, draws[2 * t] * cum[-1]), len(cum) - 1)
                mid = out_nbrs[cur][idx]
                cum = back_cum[mid]
                idx = min(bisect_right(cum, draws[2 * t + 1] * cum[-1]), len(cum) - 1)
                cur = back_nbrs[mid][idx]
                seq.append(cur)
            sequences.append(tuple(seq))
    return Corpus(side=side, sequences=tuple(sequences))


@dataclass(frozen=True)
class CorpusStats:
    """Center-context pair counts of a corpus under a fixed window.

    ``pair_counts[w, c]`` is the number of times c appears within
    ``window`` positions of a visit of w, in either direction.
    ``center_counts[w]`` is the row sum, ``total_pairs`` the grand total,
    and ``occurrences[w]`` the raw number of visits of w.
    """

    side: str
    window: int
    pair_counts: sp.csr_matrix = field(repr=False)
    occurrences: np.ndarray = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.pair_counts.shape[0]

    @property
    def center_counts(self) -> np.ndarray:
        return np.asarray(self.pair_counts.sum(axis=1)).ravel()

    @property
    def total_pairs(self) -> int:
        return int(self.pair_counts.sum())


def cooccurrence_counts(corpus: Corpus, window: int, n_vertices: int | None = None) -> CorpusStats:
    """Count center-context pairs within ``window`` positions.

    Every ordered position pair at distance 1..window inside one sequence
    contributes one count for each endpoint acting as the center, with the
    window truncated at sequence boundaries.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if n_vertices is None:
        n_vertices = 1 + max(
            (max(s) for s in corpus.sequences if s), default=-1
        )
    n = n_vertices
    sentinel = n
    if corpus.sequences:
        # window-many sentinels between sequences so no pair can straddle them
        gap = (sentinel,) * window
        flat = np.fromiter(
            (tok for seq in corpus.sequences for tok in (*seq, *gap)),
            dtype=np.int64,
        )
    else:
        flat = np.empty(0, dtype=np.int64)
    occurrences = np.bincount(flat[flat != sentinel], minlength=n) if flat.size else np.zeros(n, dtype=np.int64)

    use_dense = (n + 1) ** 2 <= _DENSE_COUNT_CAP
    if use_dense:
        forward = np.zeros((n + 1) * (n + 1), dtype=np.int64)
        for r in range(1, window + 1):
            if flat.size <= r:
                break
            a, b = flat[:-r], flat[r:]
            mask = (a != sentinel) & (b != sentinel)
            codes = a[mask] * (n + 1) + b[mask]
            forward += np.bincount(codes, minlength=forward.size)
        fwd = sp.csr_matrix(forward.reshape(n + 1, n + 1)[:n, :n])
    else:
        fwd = sp.csr_matrix((n, n), dtype=np.int64)
        for r in range(1, window + 1):
            if flat.size <= r:
                break
            a, b = flat[:-r], flat[r:]
            mask = (a != sentinel) & (b != sentinel)
            part = sp.coo_matrix(
                (np.ones(mask.sum(), dtype=np.int64), (a[mask], b[mask])),
                shape=(n, n),
            )
            fwd = (fwd + part.tocsr()).tocsr()
    pair_counts = (fwd + fwd.T).tocsr()
    return CorpusStats(
        side=corpus.side,
        window=window,
        pair_counts=pair_counts,
        occurrences=occurrences,
    )


def power_law_slope(frequencies: Sequence[int]) -> float:
    """Log-log slope of the frequency histogram.

    Bins the input frequencies (how many vertices occur f times), then
    fits count-of-frequency against frequency by least squares in log-log
    space. Needs at least three distinct frequency values.
    """
    freqs = np.asarray(frequencies, dtype=np.int64)
    if freqs.size and freqs.min() < 1:
        raise ValueError("frequencies must be positive integers")
    values, counts = np.unique(freqs, return_counts=True)
    if values.size < 3:
        raise ValueError("need at least 3 distinct frequency values")
    slope, _ = np.polyfit(np.log(values), np.log(counts), 1)
    return float(slope)


def write_corpus(corpus: Corpus, tokens: Sequence[str], sink: TextIO) -> None:
    """Dump one sequence per line as space-separated vertex tokens."""
    for seq in corpus.sequences:
        sink.write(" ".join(tokens[i] for i in seq))
        sink.write("\n")
