"""Weighted bipartite graphs and their same-side projections.

A bipartite graph connects two disjoint vertex sets U and V through
weighted edges. This module loads such graphs from edge-list files,
answers basic queries (adjacency, edge probability under the empirical
co-occurrence distribution), and builds the induced one-mode projections
whose entries count weighted shared neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BipartiteGraph",
    "GraphFormatError",
    "HomogeneousProjection",
    "edge_probability",
    "load_edge_list",
    "project_second_order",
    "write_edge_list",
]


class GraphFormatError(ValueError):
    """Raised when an edge-list source cannot be parsed into a valid graph."""


@dataclass(frozen=True)
class BipartiteGraph:
    """Immutable weighted bipartite graph over dense integer vertex ids.

    U-vertices carry ids ``0..u_count-1`` and V-vertices ``0..v_count-1``;
    the two id spaces are independent. ``edges`` stores one entry per
    distinct (u, v) pair with a strictly positive aggregated weight.

    Attributes
    ----------
    u_count, v_count : int
        Number of vertices on each side.
    edges : tuple of (int, int, float)
        Distinct edges as (u_id, v_id, weight), in insertion order.
    u_tokens, v_tokens : tuple of str
        Original labels, indexed by vertex id.
    """

    u_count: int
    v_count: int
    edges: tuple[tuple[int, int, float], ...]
    u_tokens: tuple[str, ...] = ()
    v_tokens: tuple[str, ...] = ()
    _matrix: sp.csr_matrix = field(repr=False, compare=False, default=None)
    _matrix_csc: sp.csc_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.u_count < 0 or self.v_count < 0:
            raise ValueError("vertex counts must be nonnegative")
        if not self.u_tokens:
            object.__setattr__(
                self, "u_tokens", tuple(str(i) for i in range(self.u_count))
            )
        if not self.v_tokens:
            object.__setattr__(
                self, "v_tokens", tuple(str(j) for j in range(self.v_count))
            )
        seen = set()
        for u, v, w in self.edges:
            if not (0 <= u < self.u_count and 0 <= v < self.v_count):
                raise ValueError(f"edge ({u}, {v}) out of range")
            if not math.isfinite(w) or w <= 0:
                raise ValueError(f"edge ({u}, {v}) has invalid weight {w!r}")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        if self._matrix is None:
            rows = np.fromiter((e[0] for e in self.edges), dtype=np.int64, count=len(self.edges))
            cols = np.fromiter((e[1] for e in self.edges), dtype=np.int64, count=len(self.edges))
            vals = np.fromiter((e[2] for e in self.edges), dtype=np.float64, count=len(self.edges))
            mat = sp.csr_matrix(
                (vals, (rows, cols)), shape=(self.u_count, self.v_count)
            )
            object.__setattr__(self, "_matrix", mat)
        if self._matrix_csc is None:
            object.__setattr__(self, "_matrix_csc", self._matrix.tocsc())

    @property
    def weight_matrix(self) -> sp.csr_matrix:
        """The |U| x |V| sparse weight matrix."""
        return self._matrix

    @property
    def volume(self) -> float:
        """Total edge weight, vol(G)."""
        return float(self._matrix.sum())

    def weight(self, u_id: int, v_id: int) -> float:
        """Weight of edge (u_id, v_id), 0.0 if absent."""
        return float(self._matrix[u_id, v_id])

    def u_neighbors(self, u_id: int) -> tuple[np.ndarray, np.ndarray]:
        """V-side neighbor ids and weights of a U-vertex."""
        row = self._matrix.getrow(u_id)
        return row.indices.copy(), row.data.copy()

    def v_neighbors(self, v_id: int) -> tuple[np.ndarray, np.ndarray]:
        """U-side neighbor ids and weights of a V-vertex."""
        m = self._matrix_csc
        lo, hi = m.indptr[v_id], m.indptr[v_id + 1]
        return m.indices[lo:hi].copy(), m.data[lo:hi].copy()

    def subgraph(self, edge_indices: Iterable[int]) -> "BipartiteGraph":
        """Graph over the same vertex sets keeping only the given edges."""
        kept = tuple(self.edges[i] for i in edge_indices)
        return BipartiteGraph(
            self.u_count, self.v_count, kept, self.u_tokens, self.v_tokens
        )


@dataclass(frozen=True)
class HomogeneousProjection:
    """Symmetric same-side network induced by weighted shared neighbors.

    Entry (i, j) is the sum over opposite-side vertices k of
    ``w_ik * w_jk``. The diagonal (i == j) is stored because the defining
    sum is positive for any vertex with an edge, but random walks treat it
    as a self-loop and skip it; :func:`bine.mf.transition_matrix` uses the
    same convention so the two code paths describe the same walk.

    Attributes
    ----------
    side : str
        Which side of the bipartite graph this projects, "U" or "V".
    matrix : scipy.sparse.csr_matrix
        Symmetric nonnegative matrix including the diagonal.
    """

    side: str
    matrix: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        if self.side not in ("U", "V"):
            raise ValueError("side must be 'U' or 'V'")

    @property
    def n_vertices(self) -> int:
        return self.matrix.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        """Row sums including the diagonal."""
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def walk_degrees(self) -> np.ndarray:
        """Row sums excluding the diagonal (the random-walk kernel mass)."""
        return self.degrees - self.matrix.diagonal()

    @property
    def volume(self) -> float:
        """Total weight including the diagonal."""
        return float(self.matrix.sum())

    def offdiagonal(self) -> sp.csr_matrix:
        """The projection with the diagonal removed."""
        out = self.matrix - sp.diags(self.matrix.diagonal())
        out.eliminate_zeros()
        return out.tocsr()


def _parse_line(line: str, lineno: int) -> tuple[str, str, float] | None:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    parts = stripped.split("\t") if "\t" in stripped else stripped.split()
    if len(parts) == 2:
        u_tok, v_tok = parts
        weight = 1.0
    elif len(parts) == 3:
        u_tok, v_tok = parts[0], parts[1]
        try:
            weight = float(parts[2])
        except ValueError:
            raise GraphFormatError(
                f"line {lineno}: cannot parse weight {parts[2]!r}"
            ) from None
    else:
        raise GraphFormatError(
            f"line {lineno}: expected 'u<TAB>v[<TAB>weight]', got {len(parts)} fields"
        )
    if not math.isfinite(weight) or weight < 0:
        raise GraphFormatError(f"line {lineno}: weight must be finite and >= 0")
    return u_tok, v_tok, weight


def load_edge_list(source: TextIO | Iterable[str]) -> BipartiteGraph:
    """Parse a bipartite edge list into a :class:`BipartiteGraph`.

    Each non-blank, non-comment line holds a U-token, a V-token and an
    optional nonnegative weight (default 1.0), separated by tabs or, when
    the line contains no tab, by whitespace. Lines whose first non-blank
    character is ``#`` are comments. Tokens are interned to dense ids in
    first-appearance order; repeated (u, v) lines sum their weights.

    Raises
    ------
    GraphFormatError
        On malformed lines (reported with their line number), invalid
        weights, or an input containing no edges.
    """
    u_ids: dict[str, int] = {}
    v_ids: dict[str, int] = {}
    weights: dict[tuple[int, int], float] = {}
    for lineno, line in enumerate(source, start=1):
        parsed = _parse_line(line, lineno)
        if parsed is None:
            continue
        u_tok, v_tok, w = parsed
        u = u_ids.setdefault(u_tok, len(u_ids))
        v = v_ids.setdefault(v_tok, len(v_ids))
        weights[(u, v)] = weights.get((u, v), 0.0) + w
    if not weights:
        raise GraphFormatError("edge list contains no edges")
    # A zero aggregate is the same as no edge; the vertices stay interned.
    edges = tuple((u, v, w) for (u, v), w in weights.items() if w > 0)
    if not edges:
        raise GraphFormatError("edge list contains no edges with positive weight")
    return BipartiteGraph(
        u_count=len(u_ids),
        v_count=len(v_ids),
        edges=edges,
        u_tokens=tuple(u_ids),
        v_tokens=tuple(v_ids),
    )


def write_edge_list(graph: BipartiteGraph, sink: TextIO) -> None:
    """Write a graph in the tab-separated format accepted by load_edge_list."""
    for u, v, w in graph.edges:
        sink.write(f"{graph.u_tokens[u]}\t{graph.v_tokens[v]}\t{w!r}\n")


def project_second_order(graph: BipartiteGraph, side: str) -> HomogeneousProjection:
    """Build the one-mode projection of ``graph`` onto one side.

    For side "U" the entries are ``sum_k w_ik * w_jk`` over shared V-side
    neighbors k (and symmetrically for side "V"). The diagonal is kept;
    see :class:`HomogeneousProjection` for the self-loop convention.
    """
    if side not in ("U", "V"):
        raise ValueError("side must be 'U' or 'V'")
    if not graph.edges:
        raise ValueError("cannot project an empty graph")
    w = graph.weight_matrix
    mat = (w @ w.T) if side == "U" else (w.T @ w)
    return HomogeneousProjection(side=side, matrix=mat.tocsr())


def edge_probability(graph: BipartiteGraph, u_id: int, v_id: int) -> float:
    """Empirical co-occurrence probability of an existing edge, w_ij / vol(G)."""
    w = graph.weight(u_id, v_id)
    if w == 0.0:
        raise KeyError(f"({u_id}, {v_id}) is not an edge")
    return w / graph.volume
