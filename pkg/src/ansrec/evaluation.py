"""Full-ranking top-K evaluation and prediction-overlap comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RankedList:
    """Top-K items for one user, best first, training items excluded."""

    user_id: int
    items: np.ndarray


@dataclass
class MetricReport:
    """Macro-averaged metrics per K, plus the hit sets behind them.

    ``hits[k]`` lists the (user, item) test interactions recovered in that
    user's top-k, sorted, so reports can be compared across runs.
    """

    ks: tuple[int, ...]
    metrics: dict[int, dict[str, float]]
    n_users_evaluated: int
    hits: dict[int, list[tuple[int, int]]]
    config: dict = field(default_factory=dict)
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "metrics": {str(k): dict(sorted(v.items())) for k, v in
                        sorted(self.metrics.items())},
            "n_users_evaluated": self.n_users_evaluated,
            "hits": {str(k): [list(pair) for pair in v] for k, v in
                     sorted(self.hits.items())},
            "config": self.config,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            ks=tuple(d["ks"]),
            metrics={int(k): v for k, v in d["metrics"].items()},
            n_users_evaluated=d["n_users_evaluated"],
            hits={int(k): [tuple(p) for p in v] for k, v in d["hits"].items()},
            config=d.get("config", {}),
            seed=d.get("seed", 0),
        )


def _ranked_order(scores: np.ndarray, exclude: np.ndarray) -> np.ndarray:
    """Descending score order over the non-excluded items, ties to lowest id."""
    scores = scores.astype(np.float64, copy=True)
    scores[exclude] = -np.inf
    order = np.argsort(-scores, kind="stable")
    n_keep = len(scores) - int(len(exclude))
    return order[:n_keep]


def rank_topk(params, user: int, k: int, exclusions: np.ndarray) -> RankedList:
    """Top-k of all items minus ``exclusions`` by inner-product score.

    A k beyond the candidate pool returns the whole pool, still ordered.
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    exclusions = np.asarray(exclusions, dtype=np.int64)
    scores = params.item_emb @ params.user_emb[user]
    order = _ranked_order(scores, exclusions)
    return RankedList(user_id=user, items=order[:k])


def metrics_at_k(ranked_items: np.ndarray, test_items: set[int],
                 k: int) -> tuple[float, float, float]:
    """(hit, recall, ndcg) for one user at one cutoff.

    Relevance is binary; discounted gain at 1-based rank r is 1/log2(r + 1)
    and the ideal normalizer assumes min(k, |test|) leading hits.
    """
    if not test_items:
        raise ValueError("empty test set for user")
    top = ranked_items[:k]
    ranks = np.flatnonzero(np.isin(top, list(test_items))) + 1
    hit = 1.0 if len(ranks) else 0.0
    recall = len(ranks) / len(test_items)
    dcg = float(np.sum(1.0 / np.log2(ranks + 1.0)))
    ideal = np.arange(1, min(k, len(test_items)) + 1)
    idcg = float(np.sum(1.0 / np.log2(ideal + 1.0)))
    return hit, recall, dcg / idcg


def per(hits_x: set, hits_y: set) -> float:
    """Fraction of x's correct predictions that y misses: |x - y| / |x|."""
    if not hits_x:
        raise ValueError("reference hit set is empty")
    return len(set(hits_x) - set(hits_y)) / len(hits_x)


def evaluate_model(params, train_set, eval_set, ks=(10, 15, 20),
                   config: dict | None = None, seed: int = 0) -> MetricReport:
    """Macro-averaged full-ranking metrics of ``eval_set`` users.

    Rankings exclude each user's training items. Users with no eval
    interactions are skipped entirely.
    """
    ks = tuple(sorted(int(k) for k in ks))
    if not ks or ks[0] < 1:
        raise ValueError(f"bad cutoff list {ks}")
    eval_items: dict[int, set[int]] = {}
    for u, i, _ in eval_set.interactions:
        eval_items.setdefault(int(u), set()).add(int(i))
    users = sorted(eval_items)
    sums = {k: np.zeros(3) for k in ks}
    hits: dict[int, list[tuple[int, int]]] = {k: [] for k in ks}
    k_max = ks[-1]
    for u in users:
        scores = params.item_emb @ params.user_emb[u]
        order = _ranked_order(scores, train_set.user_items[u])
        top = order[:k_max]
        tests = eval_items[u]
        for k in ks:
            h, r, n = metrics_at_k(top, tests, k)
            sums[k] += (h, r, n)
            hits[k].extend((u, int(i)) for i in top[:k] if int(i) in tests)
    n_users = len(users)
    metrics = {
        k: {"hit": float(s[0] / n_users), "recall": float(s[1] / n_users),
            "ndcg": float(s[2] / n_users)}
        for k, s in sums.items()
    } if n_users else {k: {"hit": 0.0, "recall": 0.0, "ndcg": 0.0} for k in ks}
    return MetricReport(
        ks=ks, metrics=metrics, n_users_evaluated=n_users,
        hits={k: sorted(v) for k, v in hits.items()},
        config=config or {}, seed=seed,
    )
