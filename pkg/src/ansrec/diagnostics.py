"""Training-time probes: score histograms, candidate score range, overlap.

Diagnostics draw from their own labeled random stream, so switching them on
or off never changes what the training loop sees.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import dot_scores


@dataclass
class ScoreHistogram:
    """Binned scores of sampled unobserved pairs at one checkpoint.

    ``marker`` is a fixed reference score (the epoch-0 80th percentile when
    tracking training drift); ``frac_below`` is the share of this sample
    strictly under it.
    """

    epoch: int
    edges: np.ndarray
    counts: np.ndarray
    marker: float
    frac_below: float
    n_samples: int


@dataclass
class OverlapStat:
    """How often the augmented sampler's base pick matches plain hardest-pick."""

    per_epoch: dict[int, float]
    overall: float
    events: int
    matches: int


def sample_unobserved_pairs(train_set, n: int, rng: np.random.Generator):
    """Uniform (user, unobserved item) pairs, with replacement across pairs."""
    if n < 1:
        raise ValueError(f"sample count must be positive, got {n}")
    keys = train_set.pair_keys()
    n_items = np.int64(train_set.n_items)
    users = np.empty(n, dtype=np.int64)
    items = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        want = n - filled
        u = rng.integers(0, train_set.n_users, size=2 * want)
        i = rng.integers(0, train_set.n_items, size=2 * want)
        cand = u * n_items + i
        pos = np.searchsorted(keys, cand)
        pos = np.minimum(pos, len(keys) - 1)
        ok = keys[pos] != cand
        take = min(int(ok.sum()), want)
        users[filled:filled + take] = u[ok][:take]
        items[filled:filled + take] = i[ok][:take]
        filled += take
    return users, items


def empirical_percentile(values: np.ndarray, q: float) -> float:
    """Smallest value with at least ceil(q * n) samples at or below it."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"percentile fraction must be in (0, 1], got {q}")
    values = np.asarray(values, dtype=np.float64)
    k = max(1, math.ceil(q * len(values)))
    return float(np.partition(values, k - 1)[k - 1])


def score_histogram(params, users: np.ndarray, items: np.ndarray, n_bins: int,
                    marker: float | None = None, epoch: int = 0) -> ScoreHistogram:
    """Histogram the scores of given pairs; bins span the observed range.

    When ``marker`` is None it becomes this sample's 80th percentile, which
    is the convention for an epoch-0 baseline.
    """
    if n_bins < 1:
        raise ValueError(f"need at least one bin, got {n_bins}")
    scores = dot_scores(params.user_emb[users], params.item_emb[items])
    counts, edges = np.histogram(scores, bins=n_bins)
    if marker is None:
        marker = empirical_percentile(scores, 0.8)
    frac = float(np.mean(scores < marker))
    return ScoreHistogram(epoch=epoch, edges=edges, counts=counts,
                          marker=float(marker), frac_below=frac,
                          n_samples=len(scores))


def minmax_curve(per_epoch_min: np.ndarray, per_epoch_max: np.ndarray):
    """Min-max normalize both curves against the whole run's extremes."""
    lo = np.asarray(per_epoch_min, dtype=np.float64)
    hi = np.asarray(per_epoch_max, dtype=np.float64)
    if lo.shape != hi.shape or lo.ndim != 1 or len(lo) == 0:
        raise ValueError("per-epoch min and max must be equal-length 1-d arrays")
    if np.any(lo > hi):
        raise ValueError("per-epoch min exceeds max")
    run_lo = lo.min()
    run_hi = hi.max()
    span = run_hi - run_lo
    if span == 0.0:
        return np.zeros_like(lo), np.zeros_like(hi)
    return (lo - run_lo) / span, (hi - run_lo) / span


class DiagnosticsCollector:
    """Accumulates per-step probes while a run trains.

    The runner calls ``note_step`` after every training step and
    ``checkpoint`` at configured epochs (0 means before any training).
    """

    def __init__(self, checkpoints=(0, 30, 50), n_pairs: int = 100_000,
                 n_bins: int = 50):
        self.checkpoint_epochs = tuple(sorted(set(int(e) for e in checkpoints)))
        self.n_pairs = int(n_pairs)
        self.n_bins = int(n_bins)
        self.histograms: list[ScoreHistogram] = []
        self.marker: float | None = None
        self.epoch_min: dict[int, float] = {}
        self.epoch_max: dict[int, float] = {}
        self.overlap_events: dict[int, list[int]] = {}

    def note_step(self, epoch: int, cand_scores: np.ndarray,
                  base_items: np.ndarray | None = None,
                  dns_items: np.ndarray | None = None) -> None:
        lo = float(cand_scores.min())
        hi = float(cand_scores.max())
        self.epoch_min[epoch] = min(self.epoch_min.get(epoch, lo), lo)
        self.epoch_max[epoch] = max(self.epoch_max.get(epoch, hi), hi)
        if base_items is not None and dns_items is not None:
            cell = self.overlap_events.setdefault(epoch, [0, 0])
            cell[0] += len(base_items)
            cell[1] += int(np.sum(base_items == dns_items))

    def checkpoint(self, epoch: int, params, train_set, rng) -> ScoreHistogram | None:
        if epoch not in self.checkpoint_epochs:
            return None
        users, items = sample_unobserved_pairs(train_set, self.n_pairs, rng)
        hist = score_histogram(params, users, items, self.n_bins,
                               marker=self.marker, epoch=epoch)
        if self.marker is None:
            self.marker = hist.marker
        self.histograms.append(hist)
        return hist

    def minmax(self):
        epochs = sorted(self.epoch_min)
        lo = np.array([self.epoch_min[e] for e in epochs])
        hi = np.array([self.epoch_max[e] for e in epochs])
        norm_lo, norm_hi = minmax_curve(lo, hi)
        return epochs, norm_lo, norm_hi

    def overlap(self) -> OverlapStat | None:
        if not self.overlap_events:
            return None
        per_epoch = {e: m / ev for e, (ev, m) in sorted(self.overlap_events.items())
                     if ev > 0}
        events = sum(ev for ev, _ in self.overlap_events.values())
        matches = sum(m for _, m in self.overlap_events.values())
        return OverlapStat(per_epoch=per_epoch,
                           overall=matches / events if events else 0.0,
                           events=events, matches=matches)


def write_histogram_csv(path: str, histograms: list[ScoreHistogram]) -> None:
    """Rows: epoch, bin_lo, bin_hi, count; one block per checkpoint."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "bin_lo", "bin_hi", "count"])
        for h in histograms:
            for b in range(len(h.counts)):
                writer.writerow([h.epoch, repr(float(h.edges[b])),
                                 repr(float(h.edges[b + 1])), int(h.counts[b])])


def write_minmax_csv(path: str, epochs, norm_lo, norm_hi) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "min_norm", "max_norm"])
        for e, lo, hi in zip(epochs, norm_lo, norm_hi):
            writer.writerow([e, repr(float(lo)), repr(float(hi))])


def write_overlap_csv(path: str, stat: OverlapStat) -> None:
    """Per-epoch rows plus a whole-run row labeled epoch -1."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "fraction"])
        for e, frac in stat.per_epoch.items():
            writer.writerow([e, repr(float(frac))])
        writer.writerow([-1, repr(float(stat.overall))])
