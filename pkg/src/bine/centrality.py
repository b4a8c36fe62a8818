"""Vertex importance scores that set the per-vertex walk budget.

The walk generator starts more walks from important vertices. Importance
comes either from the hub/authority mutual-reinforcement iteration on the
bipartite weight matrix or from plain weighted degree; either way scores
are rescaled so the most important vertex on each side gets 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .graph import BipartiteGraph

__all__ = ["CentralityScores", "compute_centrality"]


@dataclass(frozen=True)
class CentralityScores:
    """Per-vertex importance in [0, 1] with max 1, for one side."""

    side: str
    scores: np.ndarray

    def __post_init__(self):
        if self.side not in ("U", "V"):
            raise ValueError("side must be 'U' or 'V'")
        scores = np.asarray(self.scores, dtype=np.float64)
        object.__setattr__(self, "scores", scores)
        if scores.size:
            if not np.all(np.isfinite(scores)):
                raise ValueError("scores must be finite")
            if scores.min() < 0 or scores.max() > 1 + 1e-12:
                raise ValueError("scores must lie in [0, 1]")


def _rescale_max(x: np.ndarray) -> np.ndarray:
    top = x.max() if x.size else 0.0
    return x / top if top > 0 else x


def compute_centrality(
    graph: BipartiteGraph,
    method: str = "hits",
    tol: float = 1e-8,
    max_iter: int = 100,
) -> tuple[CentralityScores, CentralityScores]:
    """Score both sides of a bipartite graph.

    ``method="hits"`` runs the alternating hub/authority power iteration
    on the weight matrix, L2-normalizing after each half-step, until the
    max absolute change of both vectors drops below ``tol`` or ``max_iter``
    rounds pass (a warning is issued and the last iterate returned).
    U-vertices receive hub scores and V-vertices authority scores.
    ``method="degree"`` uses the weighted degree. Both are rescaled to a
    per-side maximum of 1; isolated vertices score 0.

    Returns
    -------
    (CentralityScores, CentralityScores)
        Scores for side U and side V.
    """
    if method not in ("hits", "degree"):
        raise ValueError(f"unknown centrality method {method!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    w = graph.weight_matrix
    if method == "degree":
        u_deg = np.asarray(w.sum(axis=1)).ravel()
        v_deg = np.asarray(w.sum(axis=0)).ravel()
        return (
            CentralityScores("U", _rescale_max(u_deg)),
            CentralityScores("V", _rescale_max(v_deg)),
        )

    hubs = np.ones(graph.u_count)
    hubs /= np.linalg.norm(hubs)
    auths = np.zeros(graph.v_count)
    converged = False
    for _ in range(max_iter):
        prev_hubs, prev_auths = hubs, auths
        auths = w.T @ hubs
        norm = np.linalg.norm(auths)
        if norm > 0:
            auths = auths / norm
        hubs = w @ auths
        norm = np.linalg.norm(hubs)
        if norm > 0:
            hubs = hubs / norm
        delta = max(
            np.max(np.abs(hubs - prev_hubs)), np.max(np.abs(auths - prev_auths))
        )
        if delta < tol:
            converged = True
            break
    if not converged:
        warnings.warn(
            f"hub/authority iteration did not converge within {max_iter} "
            "iterations; returning the last iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    return (
        CentralityScores("U", _rescale_max(hubs)),
        CentralityScores("V", _rescale_max(auths)),
    )
