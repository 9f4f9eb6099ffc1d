"""Interaction ingestion, dense ID remapping, and train/validation/test splits."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .rng import rng_stream


@dataclass(frozen=True)
class RawInteraction:
    """One parsed log line before remapping."""

    user_key: str
    item_key: str
    timestamp: int = 0


@dataclass
class InteractionSet:
    """De-duplicated (user, item, timestamp) triples over dense integer ids.

    ``interactions`` is an (N, 3) int64 array with columns user_id, item_id,
    timestamp. Ingestion guarantees both id spaces are dense (every index
    appears at least once); members of a ``Splits`` share the parent's id
    space and may leave some indices unused.
    """

    n_users: int
    n_items: int
    interactions: np.ndarray
    has_timestamps: bool = True
    user_keys: list[str] | None = None
    item_keys: list[str] | None = None
    _user_items: list[np.ndarray] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.interactions = np.asarray(self.interactions, dtype=np.int64).reshape(-1, 3)
        if self.n_users < 1 or self.n_items < 1:
            raise ValueError("interaction set needs at least one user and one item")
        if len(self.interactions) == 0:
            raise ValueError("interaction set is empty")
        u, i = self.interactions[:, 0], self.interactions[:, 1]
        if u.min() < 0 or u.max() >= self.n_users or i.min() < 0 or i.max() >= self.n_items:
            raise ValueError("interaction ids out of range")

    def __len__(self) -> int:
        return len(self.interactions)

    @property
    def user_items(self) -> list[np.ndarray]:
        """Sorted array of item ids per user (empty array when none)."""
        if self._user_items is None:
            buckets: list[list[int]] = [[] for _ in range(self.n_users)]
            for u, i in self.interactions[:, :2]:
                buckets[u].append(i)
            self._user_items = [np.array(sorted(b), dtype=np.int64) for b in buckets]
        return self._user_items

    def pair_keys(self) -> np.ndarray:
        """Sorted (user * n_items + item) keys, for fast membership tests."""
        keys = self.interactions[:, 0] * np.int64(self.n_items) + self.interactions[:, 1]
        return np.sort(keys)


@dataclass
class Splits:
    """Train/validation/test partition sharing a single id remapping."""

    train: InteractionSet
    validation: InteractionSet | None
    test: InteractionSet
    protocol: str
    seed: int


def _parse_line(line: str, lineno: int, has_timestamp: bool) -> RawInteraction:
    parts = line.split()
    want = 3 if has_timestamp else 2
    if len(parts) < want:
        raise ValueError(f"line {lineno}: expected {want} fields, got {len(parts)}")
    ts = 0
    if has_timestamp:
        try:
            ts = int(parts[2])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad timestamp {parts[2]!r}") from exc
    return RawInteraction(user_key=parts[0], item_key=parts[1], timestamp=ts)


def ingest_interactions(path: str, has_timestamp: bool = True,
                        map_dir: str | None = None) -> InteractionSet:
    """Read a whitespace-separated interaction log into an InteractionSet.

    Lines look like ``user_key item_key [timestamp]``; blank lines and lines
    starting with ``#`` are skipped. Duplicate (user, item) pairs collapse to
    the earliest timestamp. Keys are remapped to dense ids in order of first
    appearance. When ``map_dir`` is given the two remap tables are written
    there as ``users.map`` and ``items.map``.
    """
    user_ids: dict[str, int] = {}
    item_ids: dict[str, int] = {}
    earliest: dict[tuple[int, int], int] = {}
    order: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            rec = _parse_line(line, lineno, has_timestamp)
            u = user_ids.setdefault(rec.user_key, len(user_ids))
            i = item_ids.setdefault(rec.item_key, len(item_ids))
            key = (u, i)
            if key in earliest:
                earliest[key] = min(earliest[key], rec.timestamp)
            else:
                earliest[key] = rec.timestamp
                order.append(key)
    if not order:
        raise ValueError(f"{path}: no interactions found")
    rows = np.array([(u, i, earliest[(u, i)]) for u, i in order], dtype=np.int64)
    iset = InteractionSet(
        n_users=len(user_ids),
        n_items=len(item_ids),
        interactions=rows,
        has_timestamps=has_timestamp,
        user_keys=list(user_ids),
        item_keys=list(item_ids),
    )
    if map_dir is not None:
        write_remap_tables(iset, map_dir)
    return iset


def write_remap_tables(iset: InteractionSet, out_dir: str) -> None:
    """Persist id -> original key tables next to other run outputs."""
    os.makedirs(out_dir, exist_ok=True)
    for name, keys in (("users.map", iset.user_keys), ("items.map", iset.item_keys)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            for idx, key in enumerate(keys or []):
                fh.write(f"{idx}\t{key}\n")


def read_remap_table(path: str) -> dict[int, str]:
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            idx, key = line.rstrip("\n").split("\t")
            table[int(idx)] = key
    return table


def _subset(parent: InteractionSet, rows: np.ndarray) -> InteractionSet:
    return InteractionSet(
        n_users=parent.n_users,
        n_items=parent.n_items,
        interactions=rows.copy(),
        has_timestamps=parent.has_timestamps,
        user_keys=parent.user_keys,
        item_keys=parent.item_keys,
    )


def _drop_cold_start(train_rows: np.ndarray, eval_rows: np.ndarray) -> np.ndarray:
    """Drop eval rows whose user or item never occurs in train."""
    if len(eval_rows) == 0:
        return eval_rows
    users = np.unique(train_rows[:, 0])
    items = np.unique(train_rows[:, 1])
    keep = np.isin(eval_rows[:, 0], users) & np.isin(eval_rows[:, 1], items)
    return eval_rows[keep]


def split_by_timestamp(iset: InteractionSet, cutoff: int, val_fraction: float = 0.1,
                       seed: int = 0) -> Splits:
    """Chronological split: t <= cutoff trains, t > cutoff tests.

    Validation is a uniform random ``val_fraction`` of the pre-cutoff rows.
    Post-cutoff rows whose user or item never appears in train are dropped
    (cold-start exclusion); the same rule is applied to validation so that
    every evaluated id has a trained embedding.
    """
    if not iset.has_timestamps:
        raise ValueError("timestamp split requires timestamped interactions")
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in [0, 1), got {val_fraction}")
    ts = iset.interactions[:, 2]
    if cutoff < ts.min() or cutoff >= ts.max():
        raise ValueError(
            f"degenerate split: cutoff {cutoff} outside observed range "
            f"[{ts.min()}, {ts.max()}]"
        )
    pre = iset.interactions[ts <= cutoff]
    post = iset.interactions[ts > cutoff]
    n_val = int(len(pre) * val_fraction)
    rng = rng_stream(seed, "split")
    val_idx = np.sort(rng.choice(len(pre), size=n_val, replace=False))
    val_mask = np.zeros(len(pre), dtype=bool)
    val_mask[val_idx] = True
    train_rows = pre[~val_mask]
    if len(train_rows) == 0:
        raise ValueError("degenerate split: no training interactions left")
    val_rows = _drop_cold_start(train_rows, pre[val_mask])
    test_rows = _drop_cold_start(train_rows, post)
    if len(test_rows) == 0:
        raise ValueError("degenerate split: test set empty after cold-start drop")
    return Splits(
        train=_subset(iset, train_rows),
        validation=_subset(iset, val_rows) if len(val_rows) else None,
        test=_subset(iset, test_rows),
        protocol="timestamp_cut",
        seed=seed,
    )


def split_random(iset: InteractionSet, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> Splits:
    """Per-user random split into (train, validation, test) by ``ratios``.

    Users with fewer than 3 interactions contribute everything to train.
    Others keep at least one row in each part, so every such user stays
    evaluable. Items that end up only in validation/test are dropped from
    those parts (cold-start exclusion).
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negatives summing to 1, got {ratios}")
    rng = rng_stream(seed, "split")
    by_user: list[list[int]] = [[] for _ in range(iset.n_users)]
    for row, (u, _, _) in enumerate(iset.interactions):
        by_user[u].append(row)
    train_parts, val_parts, test_parts = [], [], []
    for u in range(iset.n_users):
        rows = np.array(by_user[u], dtype=np.int64)
        n = len(rows)
        if n == 0:
            continue
        if n < 3:
            train_parts.append(rows)
            continue
        n_test = min(max(1, int(n * ratios[2])), n - 1)
        n_val = min(max(1, int(n * ratios[1])), n - 1 - n_test)
        perm = rng.permutation(n)
        test_parts.append(rows[perm[:n_test]])
        val_parts.append(rows[perm[n_test:n_test + n_val]])
        train_parts.append(rows[perm[n_test + n_val:]])
    train_rows = iset.interactions[np.sort(np.concatenate(train_parts))]
    val_rows = iset.interactions[np.sort(np.concatenate(val_parts))] if val_parts else \
        np.empty((0, 3), dtype=np.int64)
    test_rows = iset.interactions[np.sort(np.concatenate(test_parts))] if test_parts else \
        np.empty((0, 3), dtype=np.int64)
    val_rows = _drop_cold_start(train_rows, val_rows)
    test_rows = _drop_cold_start(train_rows, test_rows)
    return Splits(
        train=_subset(iset, train_rows),
        validation=_subset(iset, val_rows) if len(val_rows) else None,
        test=_subset(iset, test_rows) if len(test_rows) else None,
        protocol="random",
        seed=seed,
    )
