"""Synthetic latent-factor interaction data for tests and demos."""

from __future__ import annotations

import argparse

import numpy as np

from .dataset import InteractionSet
from .rng import rng_stream


def make_latent_factor_dataset(n_users: int = 200, n_items: int = 500,
                               rank: int = 8, per_user: int = 20,
                               seed: int = 0, temperature: float = 0.25,
                               popularity: float = 1.5) -> InteractionSet:
    """Interactions sampled from a low-rank ground-truth preference matrix.

    Each user draws ``per_user`` distinct items with probability proportional
    to exp(preference / temperature); small temperatures concentrate picks on
    the user's true top items. The first latent dimension carries a shared
    popularity component (constant user loading, non-negative item loading)
    scaled by ``popularity``, which skews interaction counts the way real
    feedback data is skewed; the ground truth stays exactly rank ``rank``.
    Timestamps count up in draw order so the set also works with the
    chronological split.
    """
    if per_user > n_items:
        raise ValueError("per_user cannot exceed n_items")
    rng = rng_stream(seed, "synthetic")
    u_true = rng.normal(size=(n_users, rank)) / np.sqrt(rank)
    v_true = rng.normal(size=(n_items, rank)) / np.sqrt(rank)
    if popularity > 0.0:
        u_true[:, 0] = popularity
        v_true[:, 0] = np.abs(v_true[:, 0])
    pref = u_true @ v_true.T
    rows = np.empty((n_users * per_user, 3), dtype=np.int64)
    ts = 0
    for u in range(n_users):
        logits = pref[u] / temperature
        p = np.exp(logits - logits.max())
        p /= p.sum()
        items = rng.choice(n_items, size=per_user, replace=False, p=p)
        for i in items:
            rows[ts] = (u, i, ts)
            ts += 1
    return InteractionSet(
        n_users=n_users, n_items=n_items, interactions=rows, has_timestamps=True,
        user_keys=[f"u{k}" for k in range(n_users)],
        item_keys=[f"i{k}" for k in range(n_items)],
    )


def write_interaction_file(iset: InteractionSet, path: str) -> None:
    """Dump to the whitespace format the ingest command reads."""
    users = iset.user_keys or [str(k) for k in range(iset.n_users)]
    items = iset.item_keys or [str(k) for k in range(iset.n_items)]
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, t in iset.interactions:
            fh.write(f"{users[u]} {items[i]} {t}\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="generate a synthetic latent-factor interaction file")
    parser.add_argument("--out", required=True)
    parser.add_argument("--users", type=int, default=200)
    parser.add_argument("--items", type=int, default=500)
    parser.add_argument("--rank", type=int, default=8)
    parser.add_argument("--per-user", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--temperature", type=float, default=0.25)
    parser.add_argument("--popularity", type=float, default=1.5)
    args = parser.parse_args(argv)
    iset = make_latent_factor_dataset(args.users, args.items, args.rank,
                                      args.per_user, args.seed, args.temperature,
                                      args.popularity)
    write_interaction_file(iset, args.out)
    print(f"wrote {len(iset)} interactions "
          f"({iset.n_users} users x {iset.n_items} items) to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
