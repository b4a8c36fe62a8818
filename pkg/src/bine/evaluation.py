"""Train/test splitting, link-prediction scoring, and top-K ranking metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import BipartiteGraph
from .trainer import EmbeddingSet, log_sigmoid, sigmoid

__all__ = [
    "EvalReport",
    "LogisticScorer",
    "SplitSpec",
    "binary_auc",
    "build_lp_instances",
    "fit_logistic",
    "pair_features",
    "split_edges",
    "topk_metrics",
]

Edge = tuple[int, int, float]


@dataclass(frozen=True)
class SplitSpec:
    """How to partition edges into train/test folds."""

    train_fraction: float = 0.6
    folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be >= 1")


@dataclass(frozen=True)
class EvalReport:
    """Metric values of one evaluation run plus the config that produced it."""

    task: str
    fold: int
    config: dict
    metrics: dict[str, float]

    def __post_init__(self):
        for name, value in self.metrics.items():
            if not -1e-12 <= value <= 1 + 1e-12:
                raise ValueError(f"metric {name} = {value} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "fold": self.fold,
                "config": self.config,
                "metrics": self.metrics,
            },
            sort_keys=True,
        )


def split_edges(
    graph: BipartiteGraph, spec: SplitSpec, fold: int
) -> tuple[BipartiteGraph, tuple[Edge, ...]]:
    """Seeded per-fold edge partition.

    The first ``train_fraction`` of a fold-specific permutation becomes
    the training graph (same vertex sets, ids unchanged even if a vertex
    loses all its edges); the rest is returned as held-out test edges.
    """
    if not 0 <= fold < spec.folds:
        raise ValueError(f"fold must be in [0, {spec.folds})")
    m = len(graph.edges)
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=spec.seed, spawn_key=(5, fold))
    )
    perm = rng.permutation(m)
    n_train = int(spec.train_fraction * m)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    train = graph.subgraph(train_idx.tolist())
    test = tuple(graph.edges[i] for i in test_idx)
    return train, test


def build_lp_instances(
    graph: BipartiteGraph, edges: tuple[Edge, ...], seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Labeled pairs for link prediction: the given edges plus matched non-edges.

    Negatives are uniform (u, v) pairs absent from the full graph, drawn
    without duplicates until they match the positives in number.

    Returns
    -------
    pairs : (2n, 2) int array of (u_id, v_id)
    labels : (2n,) int array, 1 for the given edges then 0 for sampled pairs
    """
    n_pos = len(edges)
    n_cells = graph.u_count * graph.v_count
    if n_cells - len(graph.edges) < n_pos:
        raise ValueError("graph does not contain enough non-edges")
    existing = {(u, v) for u, v, _ in graph.edges}
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(8,)))
    negatives: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    while len(negatives) < n_pos:
        u = int(rng.integers(0, graph.u_count))
        v = int(rng.integers(0, graph.v_count))
        if (u, v) in existing or (u, v) in chosen:
            continue
        chosen.add((u, v))
        negatives.append((u, v))
    pairs = np.array(
        [(u, v) for u, v, _ in edges] + negatives, dtype=np.int64
    )
    labels = np.concatenate(
        [np.ones(n_pos, dtype=np.int64), np.zeros(n_pos, dtype=np.int64)]
    )
    return pairs, labels


def pair_features(emb: EmbeddingSet, pairs: np.ndarray) -> np.ndarray:
    """Concatenated [u_embedding, v_embedding] rows for (u, v) id pairs."""
    return np.hstack([emb.u_emb[pairs[:, 0]], emb.v_emb[pairs[:, 1]]])


@dataclass
class LogisticScorer:
    """Fitted logistic model; scores are probabilities of the positive class."""

    weights: np.ndarray
    bias: float

    def scores(self, features: np.ndarray) -> np.ndarray:
        return sigmoid(features @ self.weights + self.bias)


def _logistic_loss_grad(
    w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray, float]:
    z = x @ w + b
    p = sigmoid(z)
    # Mean cross-entropy, written through log-sigmoid for stability.
    loss = -float(np.mean(y * log_sigmoid(z) + (1 - y) * log_sigmoid(-z)))
    loss += l2 * float(w @ w)
    grad_w = x.T @ (p - y) / x.shape[0] + 2.0 * l2 * w
    grad_b = float(np.mean(p - y))
    return loss, grad_w, grad_b


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    l2: float = 0.0,
    lr: float = 0.5,
    epochs: int = 500,
    seed: int = 0,
) -> LogisticScorer:
    """Full-batch gradient descent on L2-penalized mean logistic loss.

    The bias is left unpenalized. Deterministic: weights start at zero, so
    the seed only matters to callers that shuffle inputs themselves.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError("features must be finite")
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be 0/1")
    if y.min() == y.max():
        raise ValueError("both classes must be present")
    del seed  # reserved; the zero start is already deterministic
    w = np.zeros(x.shape[1])
    b = 0.0
    for _ in range(epochs):
        loss, grad_w, grad_b = _logistic_loss_grad(w, b, x, y, l2)
        if not np.isfinite(loss):
            raise ArithmeticError("logistic fit diverged")
        w -= lr * grad_w
        b -= lr * grad_b
    return LogisticScorer(weights=w, bias=b)


def binary_auc(scores, labels) -> tuple[float, float]:
    """Areas under the ROC curve and the precision-recall curve.

    ROC uses the pairwise rank statistic with ties counted half. PR is the
    average-precision form: precision integrated over recall increments at
    every distinct score threshold, descending.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")

    # Average ranks with ties sharing their midpoint.
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size, dtype=np.float64)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    auc_roc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    # Step integration of precision over recall at distinct thresholds.
    desc = np.argsort(-s, kind="stable")
    s_desc, y_desc = s[desc], y[desc]
    tp = np.cumsum(y_desc == 1)
    fp = np.cumsum(y_desc == 0)
    last_of_threshold = np.nonzero(
        np.append(s_desc[1:] != s_desc[:-1], True)
    )[0]
    auc_pr = 0.0
    prev_recall = 0.0
    for idx in last_of_threshold:
        recall = tp[idx] / n_pos
        precision = tp[idx] / (tp[idx] + fp[idx])
        auc_pr += (recall - prev_recall) * precision
        prev_recall = recall
    return float(auc_roc), float(auc_pr)


def _user_metrics(
    ranked_items: np.ndarray, relevant: set[int], k: int
) -> tuple[float, float, float, float]:
    top = ranked_items[:k]
    hits = np.fromiter((int(i) in relevant for i in top), dtype=bool, count=top.size)
    n_hits = int(hits.sum())
    precision = n_hits / k
    recall = n_hits / len(relevant)
    f1 = 0.0 if n_hits == 0 else 2 * precision * recall / (precision + recall)
    denom = 1.0 / np.log2(np.arange(2, top.size + 2))
    dcg = float(denom[hits].sum())
    ideal = float(denom[: min(k, len(relevant))].sum())
    ndcg = dcg / ideal if ideal > 0 else 0.0
    ap = 0.0
    seen = 0
    for rank, hit in enumerate(hits, start=1):
        if hit:
            seen += 1
            ap += seen / rank
    ap /= min(k, len(relevant))
    rr = 0.0
    hit_ranks = np.nonzero(hits)[0]
    if hit_ranks.size:
        rr = 1.0 / (int(hit_ranks[0]) + 1)
    return f1, ndcg, ap, rr


def topk_metrics(
    emb: EmbeddingSet,
    train_graph: BipartiteGraph,
    test_edges: tuple[Edge, ...],
    k: int = 10,
    fold: int = 0,
    config: dict | None = None,
    candidates: str = "non-train",
) -> EvalReport:
    """Inner-product top-K recommendation metrics, averaged over users.

    For every user holding at least one test edge, candidate items are
    those not linked to the user in the training graph (restricted to
    items occurring in some test edge when ``candidates="test-pool"``).
    Items are ranked by descending inner product with ties broken by
    ascending item id, then F1, NDCG with binary gains, average precision,
    and reciprocal rank are computed at depth ``k`` and macro-averaged.
    """
    if candidates not in ("non-train", "test-pool"):
        raise ValueError("candidates must be 'non-train' or 'test-pool'")
    by_user: dict[int, set[int]] = {}
    for u, v, _ in test_edges:
        by_user.setdefault(u, set()).add(v)
    if not by_user:
        raise ValueError("no test edges to evaluate")
    train_items: dict[int, set[int]] = {u: set() for u in by_user}
    for u, v, _ in train_graph.edges:
        if u in train_items:
            train_items[u].add(v)
    pool = None
    if candidates == "test-pool":
        pool = {v for _, v, _ in test_edges}
    n_items = train_graph.v_count
    sums = np.zeros(4)
    for u in sorted(by_user):
        banned = train_items[u]
        if pool is None:
            cand = np.array([v for v in range(n_items) if v not in banned], dtype=np.int64)
        else:
            cand = np.array(sorted(pool - banned), dtype=np.int64)
        if cand.size == 0:
            raise ValueError(f"user {u} has no candidate items")
        scores = emb.v_emb[cand] @ emb.u_emb[u]
        order = np.lexsort((cand, -scores))
        sums += _user_metrics(cand[order], by_user[u], k)
    means = sums / len(by_user)
    return EvalReport(
        task="recommendation",
        fold=fold,
        config=dict(config or {}),
        metrics={
            f"f1@{k}": float(means[0]),
            f"ndcg@{k}": float(means[1]),
            f"map@{k}": float(means[2]),
            f"mrr@{k}": float(means[3]),
        },
    )
