"""Negative samplers for the skip-gram terms.

The banding sampler shingles every vertex by its multi-hop bipartite
neighborhood, minhashes the shingles into b bands of k rows, and treats
vertices that share no bucket as safe negatives. The closed-form miss
probability of a pair, (1 - J^k)^b with J the exact shingle Jaccard
similarity, also feeds the factorization path. A frequency sampler with
the usual 0.75 exponent is available as the conventional alternative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .graph import BipartiteGraph
from .walks import CorpusStats

__all__ = [
    "FrequencyNegativeSampler",
    "LshIndex",
    "LshNegativeSampler",
    "build_lsh_index",
    "draw_negatives",
    "minhash_signatures",
    "miss_probability",
]

logger = logging.getLogger(__name__)

_MAX_SIGNATURE = 4096
_EMPTY_SIGNATURE = np.uint64(0xFFFFFFFFFFFFFFFF)  # above any mixed hash value

FREQUENCY_EXPONENT = 0.75


@dataclass(frozen=True)
class LshIndex:
    """Minhash banding index over vertex neighborhoods of one side.

    ``shingles[x]`` is the sorted array of vertices (from both sides, in a
    combined id space with V offset by u_count) reachable from x within
    ``window`` bipartite hops, excluding x itself. ``signatures`` holds
    rows_per_band * n_bands minhash values per vertex and ``buckets[band]``
    maps a band signature to the vertex ids hashed there.
    """

    side: str
    window: int
    rows_per_band: int
    n_bands: int
    shingles: tuple[np.ndarray, ...] = field(repr=False)
    signatures: np.ndarray = field(repr=False)
    buckets: tuple[dict[tuple[int, ...], list[int]], ...] = field(repr=False)
    seed: int = 0
    side_offset: int = 0  # where this side's ids start in the combined space

    @property
    def n_vertices(self) -> int:
        return self.signatures.shape[0]

    def band_keys(self, x: int) -> list[tuple[int, ...]]:
        """Band signatures of vertex x, one per band."""
        sig = self.signatures[x]
        k = self.rows_per_band
        return [tuple(sig[b * k : (b + 1) * k]) for b in range(self.n_bands)]

    def colliding(self, x: int) -> set[int]:
        """Vertices sharing at least one bucket with x (x included)."""
        out: set[int] = set()
        for band, key in enumerate(self.band_keys(x)):
            out.update(self.buckets[band][key])
        return out

    def jaccard(self, x: int, y: int) -> float:
        """Exact Jaccard similarity of the stored shingles."""
        a, b = self.shingles[x], self.shingles[y]
        if a.size == 0 and b.size == 0:
            return 0.0
        inter = np.intersect1d(a, b, assume_unique=True).size
        union = a.size + b.size - inter
        return inter / union if union else 0.0


def _hop_neighborhoods(graph: BipartiteGraph, side: str, window: int) -> list[np.ndarray]:
    """Reachable sets within ``window`` bipartite hops, in a combined id space."""
    n_u, n_v = graph.u_count, graph.v_count
    adj = graph.weight_matrix.copy()
    adj.data[:] = 1.0
    # Frontier expansion on the full bipartite adjacency keeps hop counting exact.
    full = sp.bmat([[None, adj], [adj.T, None]], format="csr")
    n = n_u if side == "U" else n_v
    offset = 0 if side == "U" else n_u
    start = sp.identity(n_u + n_v, format="csr")[offset : offset + n].tocsr()
    reached = start.copy()
    frontier = start
    for _ in range(window):
        frontier = (frontier @ full).tocsr()
        frontier.data[:] = 1.0
        reached = (reached + frontier).tocsr()
        reached.data[:] = 1.0
    out = []
    for i in range(n):
        ids = reached.indices[reached.indptr[i] : reached.indptr[i + 1]]
        ids = ids[ids != offset + i]
        out.append(np.sort(ids).astype(np.int64))
    return out


def _mix64(x: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer: a bijective avalanche on 64-bit words
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def minhash_signatures(
    shingles: Sequence[np.ndarray], n_hashes: int, seed: int
) -> np.ndarray:
    """Minhash each shingle set under n_hashes keyed 64-bit hash functions.

    Each row key drives an avalanche-mixed permutation of the element
    space; a plain 2-universal family would bias the minimum on
    structured shingles. Empty sets receive a constant sentinel signature
    above any genuine hash value.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    keys = rng.integers(0, np.iinfo(np.uint64).max, size=n_hashes, dtype=np.uint64)
    sigs = np.full((len(shingles), n_hashes), _EMPTY_SIGNATURE, dtype=np.uint64)
    for i, elems in enumerate(shingles):
        if elems.size == 0:
            continue
        hashed = _mix64(elems[None, :].astype(np.uint64) ^ keys[:, None])
        sigs[i] = hashed.min(axis=1)
    return sigs


def build_lsh_index(
    graph: BipartiteGraph,
    side: str,
    window: int = 5,
    rows_per_band: int = 2,
    n_bands: int = 8,
    seed: int = 0,
) -> LshIndex:
    """Shingle, minhash, and band one side of a bipartite graph.

    Isolated vertices (empty shingles) land in a singleton sentinel bucket
    per band so that every vertex occupies exactly one bucket per band.
    """
    if side not in ("U", "V"):
        raise ValueError("side must be 'U' or 'V'")
    if window < 1:
        raise ValueError("window must be >= 1")
    if rows_per_band < 1 or n_bands < 1:
        raise ValueError("rows_per_band and n_bands must be >= 1")
    if rows_per_band * n_bands > _MAX_SIGNATURE:
        raise ValueError(f"signature length capped at {_MAX_SIGNATURE}")
    shingles = _hop_neighborhoods(graph, side, window)
    signatures = minhash_signatures(shingles, rows_per_band * n_bands, seed)
    buckets: list[dict[tuple[int, ...], list[int]]] = []
    for band in range(n_bands):
        lo = band * rows_per_band
        table: dict[tuple[int, ...], list[int]] = {}
        for x, sig in enumerate(signatures):
            if shingles[x].size == 0:
                key = (-1, x)  # sentinel bucket, never collides
            else:
                key = tuple(sig[lo : lo + rows_per_band])
            table.setdefault(key, []).append(x)
        buckets.append(table)
    return LshIndex(
        side=side,
        window=window,
        rows_per_band=rows_per_band,
        n_bands=n_bands,
        shingles=tuple(shingles),
        signatures=signatures,
        buckets=tuple(buckets),
        seed=seed,
        side_offset=0 if side == "U" else graph.u_count,
    )


def _q_floor(n_vertices: int) -> float:
    return 1.0 / (n_vertices * n_vertices)


def miss_probability(index: LshIndex, x: int, y: int) -> float:
    """Probability that x and y share no bucket, (1 - J^k)^b.

    Uses the exact shingle Jaccard similarity, clamped from below so the
    factorization path never divides by zero for near-identical vertices.
    """
    if x == y:
        raise ValueError("miss probability is defined for distinct vertices")
    j = index.jaccard(x, y)
    q = (1.0 - j ** index.rows_per_band) ** index.n_bands
    return float(min(1.0, max(q, _q_floor(index.n_vertices))))


def miss_probability_matrix(index: LshIndex) -> np.ndarray:
    """Dense pairwise miss probabilities under the same clamping.

    Matches :func:`miss_probability` entrywise; the diagonal is set to the
    clamp floor and should not be consumed.
    """
    n = index.n_vertices
    universe = 0
    for s in index.shingles:
        if s.size:
            universe = max(universe, int(s[-1]) + 1)
    if universe == 0:
        return np.ones((n, n))
    indptr = np.zeros(n + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([s.size for s in index.shingles])
    indices = np.concatenate([s for s in index.shingles if s.size]) if indptr[-1] else np.empty(0, dtype=np.int64)
    data = np.ones(indptr[-1], dtype=np.int64)
    members = sp.csr_matrix((data, indices, indptr), shape=(n, universe))
    inter = np.asarray((members @ members.T).todense(), dtype=np.float64)
    sizes = np.asarray([s.size for s in index.shingles], dtype=np.float64)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        jac = np.where(union > 0, inter / union, 0.0)
    q = (1.0 - jac ** index.rows_per_band) ** index.n_bands
    return np.clip(q, _q_floor(n), 1.0)


class LshNegativeSampler:
    """Uniform draws from the vertices colliding with a center in no band.

    When a center collides with everyone, sampling falls back to the
    whole side minus the center and its same-side shingle members, with a
    logged warning.
    """

    def __init__(self, index: LshIndex):
        self.index = index
        self._pools: dict[int, np.ndarray] = {}
        self._fallback: set[int] = set()

    def _same_side_shingle(self, center: int) -> set[int]:
        ids = self.index.shingles[center]
        offset = self.index.side_offset
        n = self.index.n_vertices
        ids = ids[(ids >= offset) & (ids < offset + n)] - offset
        return set(ids.tolist())

    def _pool(self, center: int) -> np.ndarray:
        cached = self._pools.get(center)
        if cached is not None:
            return cached
        n = self.index.n_vertices
        blocked = self.index.colliding(center)
        blocked.add(center)
        pool = np.array([x for x in range(n) if x not in blocked], dtype=np.int64)
        if pool.size == 0:
            self._fallback.add(center)
            logger.warning(
                "no bucket-disjoint candidates for vertex %d; falling back to "
                "uniform sampling outside its shingle",
                center,
            )
            shingle = self._same_side_shingle(center)
            pool = np.array(
                [x for x in range(n) if x != center and x not in shingle],
                dtype=np.int64,
            )
            if pool.size == 0:
                pool = np.array([x for x in range(n) if x != center], dtype=np.int64)
        self._pools[center] = pool
        return pool

    def used_fallback(self, center: int) -> bool:
        return center in self._fallback

    def draw(self, center: int, ns: int, rng: np.random.Generator) -> np.ndarray:
        pool = self._pool(center)
        if pool.size == 0:
            raise ValueError("single-vertex side has no negative candidates")
        return pool[rng.integers(0, pool.size, size=ns)]


class FrequencyNegativeSampler:
    """Draws proportional to center frequency raised to the 0.75 power."""

    def __init__(self, stats: CorpusStats, exponent: float = FREQUENCY_EXPONENT):
        self.weights = stats.center_counts.astype(np.float64) ** exponent
        self._cum = np.cumsum(self.weights)

    def draw(self, center: int, ns: int, rng: np.random.Generator) -> np.ndarray:
        total = self._cum[-1]
        if total - self.weights[center] <= 0:
            raise ValueError("no vertex other than the center has positive frequency")
        # Rejecting draws of the center is equivalent to renormalizing
        # without it.
        out = np.empty(ns, dtype=np.int64)
        filled = 0
        while filled < ns:
            picks = np.searchsorted(
                self._cum, rng.random(ns - filled) * total, side="right"
            )
            picks = np.minimum(picks, self.weights.size - 1)
            picks = picks[picks != center]
            out[filled : filled + picks.size] = picks
            filled += picks.size
        return out


def draw_negatives(
    strategy: str,
    center: int,
    ns: int,
    context: CorpusStats | LshIndex,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``ns`` negative vertex ids for a center, never the center itself.

    ``strategy="lsh"`` expects an :class:`LshIndex` and samples uniformly
    from the bucket-disjoint pool; ``strategy="freq"`` expects a
    :class:`CorpusStats` and samples proportional to frequency^0.75.
    """
    if ns < 1:
        raise ValueError("ns must be >= 1")
    if strategy == "lsh":
        if not isinstance(context, LshIndex):
            raise TypeError("lsh strategy needs an LshIndex")
        return LshNegativeSampler(context).draw(center, ns, rng)
    if strategy == "freq":
        if not isinstance(context, CorpusStats):
            raise TypeError("freq strategy needs a CorpusStats")
        return FrequencyNegativeSampler(context).draw(center, ns, rng)
    raise ValueError(f"unknown strategy {strategy!r}")
