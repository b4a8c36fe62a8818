"""Closed-form embedding path: factorize the joint relation matrix.

Instead of training online, the skip-gram optimum for every same-side
pair has a closed form: the log of its expected center-context rate under
the walk kernel, discounted by the negative-sampling rate and the pair's
bucket-miss probability, clipped at zero. Those clipped matrices are
assembled with the bipartite weight matrix into one block target whose
low-rank factors yield all four embedding matrices at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import BipartiteGraph, HomogeneousProjection
from .negatives import LshIndex, miss_probability, miss_probability_matrix
from .trainer import EmbeddingSet
from .walks import CorpusStats

__all__ = [
    "BlockMatrix",
    "ImplicitMatrix",
    "TransitionMatrix",
    "analytic_implicit_matrix",
    "assemble_block",
    "empirical_implicit_matrix",
    "factorize",
    "power_sum",
    "sgd_factorize",
    "sgns_factorization_targets",
    "transition_matrix",
    "write_block_matrix",
]

DENSE_VERTEX_CAP = 5000


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic walk kernel of a projection, self-loops excluded."""

    side: str
    matrix: sp.csr_matrix = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        return float(self.degrees.sum())


@dataclass(frozen=True)
class ImplicitMatrix:
    """Sparse clipped same-side target; stored entries are strictly positive."""

    side: str
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class BlockMatrix:
    """Joint target [[W, a*M_U], [b*M_V, free]] with the free block masked.

    Only unmasked nonzero entries are stored; the bottom-right block never
    contributes to any factorization loss.
    """

    u_count: int
    v_count: int
    alpha_scale: float
    beta_scale: float
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u_count + self.v_count, self.v_count + self.u_count)

    @property
    def nnz(self) -> int:
        return self.values.size

    def to_csr(self) -> sp.csr_matrix:
        """The block matrix with masked and absent entries as zeros."""
        return sp.csr_matrix(
            (self.values, (self.rows, self.cols)), shape=self.shape
        )


def transition_matrix(projection: HomogeneousProjection) -> TransitionMatrix:
    """Normalize the off-diagonal projection rows into walk probabilities.

    Matches the kernel of :func:`bine.walks.generate_corpus`: the stored
    diagonal is dropped before normalizing, so entry (i, j) is exactly the
    chance the walk standing at i moves to j. Rows of vertices without
    off-diagonal neighbors stay zero.
    """
    offdiag = projection.offdiagonal()
    degrees = np.asarray(offdiag.sum(axis=1)).ravel()
    inv = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0)
    p = sp.diags(inv) @ offdiag
    return TransitionMatrix(side=projection.side, matrix=p.tocsr(), degrees=degrees)


def power_sum(projection: HomogeneousProjection, window: int) -> np.ndarray:
    """Average of the first ``window`` powers of the walk kernel.

    Every row of the result sums to 1 since each power is row-stochastic.
    Works densely and therefore refuses projections above
    ``DENSE_VERTEX_CAP`` vertices.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n = projection.n_vertices
    if n > DENSE_VERTEX_CAP:
        raise ValueError(
            f"dense power sums are capped at {DENSE_VERTEX_CAP} vertices; "
            "use the corpus-based implicit matrix instead"
        )
    tm = transition_matrix(projection)
    if (tm.degrees <= 0).any():
        bad = int(np.argmin(tm.degrees))
        raise ValueError(f"vertex {bad} has no off-diagonal weight; remove isolated vertices first")
    p = tm.matrix.toarray()
    acc = np.zeros_like(p)
    cur = np.eye(n)
    for _ in range(window):
        cur = cur @ p
        acc += cur
    return acc / window


def analytic_implicit_matrix(
    projection: HomogeneousProjection,
    window: int,
    ns: int,
    index: LshIndex,
) -> ImplicitMatrix:
    """Closed-form implicit matrix from walk-kernel power sums.

    Entry (i, j) is ``log(sum_r (P^r)_ij / (window * ns * q_ij))`` clipped
    at zero, where q is the bucket-miss probability; pairs the kernel
    cannot reach in ``window`` steps are left out entirely.
    """
    if index.side != projection.side:
        raise ValueError("index and projection must describe the same side")
    n = projection.n_vertices
    if index.n_vertices != n:
        raise ValueError("index sized for a different vertex set")
    s = power_sum(projection, window) * window  # sum of powers, not the average
    q = miss_probability_matrix(index)
    with np.errstate(divide="ignore"):
        m = np.log(s / (window * ns * q))
    m[s <= 0] = -np.inf
    m = np.maximum(m, 0.0)
    rows, cols = np.nonzero(m)
    mat = sp.csr_matrix((m[rows, cols], (rows, cols)), shape=(n, n))
    return ImplicitMatrix(side=projection.side, matrix=mat)


def empirical_implicit_matrix(
    stats: CorpusStats, ns: int, index: LshIndex
) -> ImplicitMatrix:
    """Corpus-based implicit matrix, log(#(w,c) / (#(w) * ns * q)) clipped at 0."""
    if stats.total_pairs == 0:
        raise ValueError("corpus statistics are empty")
    if index.side != stats.side:
        raise ValueError("index and statistics must describe the same side")
    n = stats.n_vertices
    coo = stats.pair_counts.tocoo()
    centers = stats.center_counts
    if n <= 2000:
        q = miss_probability_matrix(index)[coo.row, coo.col]
    else:
        q = np.empty(coo.nnz)
        floor = 1.0 / (n * n)
        for i, (r, c) in enumerate(zip(coo.row, coo.col)):
            q[i] = floor if r == c else miss_probability(index, int(r), int(c))
    values = np.log(coo.data / (centers[coo.row] * ns * q))
    values = np.maximum(values, 0.0)
    keep = values > 0
    mat = sp.csr_matrix(
        (values[keep], (coo.row[keep], coo.col[keep])), shape=(n, n)
    )
    return ImplicitMatrix(side=stats.side, matrix=mat)


def assemble_block(
    graph: BipartiteGraph,
    m_u: ImplicitMatrix,
    m_v: ImplicitMatrix,
    alpha_scale: float,
    beta_scale: float,
) -> BlockMatrix:
    """Lay out W, the scaled implicit matrices, and the masked free block."""
    if m_u.n_vertices != graph.u_count or m_v.n_vertices != graph.v_count:
        raise ValueError("implicit matrices do not match the graph dimensions")
    if alpha_scale < 0 or beta_scale < 0:
        raise ValueError("scales must be nonnegative")
    n_u, n_v = graph.u_count, graph.v_count
    w = graph.weight_matrix.tocoo()
    parts_r = [w.row]
    parts_c = [w.col]
    parts_v = [w.data]
    if alpha_scale > 0:
        mu = m_u.matrix.tocoo()
        parts_r.append(mu.row)
        parts_c.append(mu.col + n_v)
        parts_v.append(alpha_scale * mu.data)
    if beta_scale > 0:
        mv = m_v.matrix.tocoo()
        parts_r.append(mv.row + n_u)
        parts_c.append(mv.col)
        parts_v.append(beta_scale * mv.data)
    return BlockMatrix(
        u_count=n_u,
        v_count=n_v,
        alpha_scale=alpha_scale,
        beta_scale=beta_scale,
        rows=np.concatenate(parts_r),
        cols=np.concatenate(parts_c),
        values=np.concatenate(parts_v),
    )


def _truncated_svd(h: sp.csr_matrix, d: int, seed: int):
    min_dim = min(h.shape)
    if d > min_dim:
        raise ValueError(f"rank {d} exceeds the smaller matrix dimension {min_dim}")
    if d == min_dim or min_dim <= 200:
        u, s, vt = np.linalg.svd(h.toarray(), full_matrices=False)
        return u[:, :d], s[:d], vt[:d]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(4,)))
    v0 = rng.standard_normal(min_dim)
    u, s, vt = spla.svds(h, k=d, v0=v0)
    order = np.argsort(s)[::-1]
    return u[:, order], s[order], vt[order]


def sgd_factorize(
    block: BlockMatrix,
    d: int,
    lr: float = 0.005,
    reg: float = 0.01,
    epochs: int = 100,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Stochastic factorization over the stored entries only.

    Minimizes squared reconstruction error plus an L2 penalty on the
    factor rows touched by each entry; masked and absent entries never
    enter the loss. Returns the row factors, column factors, and the
    objective after every epoch.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(6,)))
    n_rows, n_cols = block.shape
    a = rng.normal(scale=0.1 / math.sqrt(d), size=(n_rows, d))
    b = rng.normal(scale=0.1 / math.sqrt(d), size=(n_cols, d))
    rows, cols, vals = block.rows, block.cols, block.values

    def objective() -> float:
        err = vals - np.einsum("nd,nd->n", a[rows], b[cols])
        penalty = (a[rows] ** 2).sum() + (b[cols] ** 2).sum()
        return float((err**2).sum() + reg * penalty)

    losses = []
    for _ in range(epochs):
        for i in rng.permutation(vals.size):
            r, c = rows[i], cols[i]
            ar = a[r].copy()
            bc = b[c]
            e = vals[i] - ar @ bc
            a[r] += lr * (e * bc - reg * ar)
            b[c] += lr * (e * ar - reg * bc)
        losses.append(objective())
        if not np.isfinite(losses[-1]):
            raise ArithmeticError("factorization diverged; lower the learning rate")
    return a, b, losses


def factorize(
    block: BlockMatrix,
    d: int,
    mode: str = "svd",
    lr: float = 0.005,
    reg: float = 0.01,
    epochs: int = 100,
    seed: int = 0,
) -> EmbeddingSet:
    """Factor the block target into the four embedding matrices.

    ``mode="svd"`` takes the rank-d truncated SVD with masked entries as
    zeros and splits sqrt-scaled singular factors; ``mode="sgd"`` runs
    :func:`sgd_factorize`, which skips masked entries entirely. Row
    factors stack the U-side embeddings over the V-side context vectors;
    column factors stack the V-side embeddings over the U-side context
    vectors.
    """
    n_u, n_v = block.u_count, block.v_count
    if mode == "svd":
        u, s, vt = _truncated_svd(block.to_csr(), d, seed)
        a = u * np.sqrt(s)
        b = vt.T * np.sqrt(s)
    elif mode == "sgd":
        a, b, _ = sgd_factorize(block, d, lr=lr, reg=reg, epochs=epochs, seed=seed)
    else:
        raise ValueError("mode must be 'svd' or 'sgd'")
    return EmbeddingSet(
        u_emb=np.ascontiguousarray(a[:n_u]),
        v_emb=np.ascontiguousarray(b[:n_v]),
        u_ctx=np.ascontiguousarray(b[n_v:]),
        v_ctx=np.ascontiguousarray(a[n_u:]),
    )


def sgns_factorization_targets(
    stats: CorpusStats, ns: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diagnostic: the shifted-PMI values a frequency sampler would factor.

    Returns (rows, cols, values) over stored pairs with
    ``log(#(w,c) |D| / (#(w) #(c))) - log(ns)``, for side-by-side reports
    against the bucket-miss targets. Not a training path.
    """
    coo = stats.pair_counts.tocoo()
    centers = stats.center_counts
    total = stats.total_pairs
    values = (
        np.log(coo.data * total / (centers[coo.row] * centers[coo.col]))
        - math.log(ns)
    )
    return coo.row.copy(), coo.col.copy(), values


def write_block_matrix(block: BlockMatrix, sink: TextIO) -> None:
    """Coordinate text dump: "rows cols nnz" header, then "row col value" lines."""
    n_rows, n_cols = block.shape
    sink.write(f"{n_rows} {n_cols} {block.nnz}\n")
    for r, c, v in zip(block.rows, block.cols, block.values):
        sink.write(f"{r} {c} {v!r}\n")
