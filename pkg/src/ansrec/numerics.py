"""Small shared numeric helpers."""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    arr = np.asarray(x, dtype=np.float64)
    scalar = arr.ndim == 0
    if scalar:
        arr = arr.reshape(1)
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    return float(out[0]) if scalar else out


def softplus(x):
    """log(1 + exp(x)) without overflow for large |x|."""
    arr = np.asarray(x, dtype=np.float64)
    out = np.maximum(arr, 0.0) + np.log1p(np.exp(-np.abs(arr)))
    return float(out) if out.ndim == 0 else out


def dot_scores(u, v):
    """Row-wise inner products: (B, d) x (B, d) -> (B,)."""
    return np.einsum("bd,bd->b", u, v)


def candidate_scores(u, vecs):
    """Scores of per-row candidate vectors: (B, d) x (B, M, d) -> (B, M)."""
    return np.einsum("bd,bmd->bm", u, vecs)


def argmax_lowest_id(values, ids):
    """Row-wise argmax position; exact score ties resolve to the smallest id."""
    best = values.max(axis=1, keepdims=True)
    masked = np.where(values == best, ids, np.iinfo(np.int64).max)
    return masked.argmin(axis=1)
