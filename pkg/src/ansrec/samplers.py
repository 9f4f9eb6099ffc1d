"""Negative samplers: uniform, hardest-candidate, augmented, and hard-factor.

Two-pass samplers redraw their candidate sets for every (user, positive)
pair on every step. All randomness comes in through explicit generators so
a run is reproducible from its root seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ans
from .numerics import argmax_lowest_id, candidate_scores

SAMPLER_KINDS = ("rns", "dns", "ans", "hns")


@dataclass(frozen=True)
class CandidateSet:
    """First-pass negatives for one (user, positive) pair."""

    user_id: int
    pos_item_id: int
    item_ids: np.ndarray

    @property
    def m(self) -> int:
        return len(self.item_ids)


@dataclass(frozen=True)
class SamplerOutput:
    """Final negative for one pair, plus any candidate-set losses.

    ``neg_vector`` is None for samplers whose negative is a real item row;
    the augmented and hard-factor samplers supply a synthetic vector while
    ``neg_item`` still names the backing item. Auxiliary losses are zero
    unless the augmented pipeline produced them.
    """

    provenance: str
    neg_item: int
    neg_vector: np.ndarray | None = None
    aux_contrastive: float = 0.0
    aux_disentangle: float = 0.0


def _unobserved_mask(train_set, user_id: int) -> np.ndarray:
    mask = np.ones(train_set.n_items, dtype=bool)
    mask[train_set.user_items[user_id]] = False
    return mask


def draw_candidates(user_id: int, train_set, m: int, rng: np.random.Generator,
                    pos_item_id: int = -1) -> CandidateSet:
    """Uniform draw of ``m`` distinct unobserved items for one user."""
    pool = np.flatnonzero(_unobserved_mask(train_set, user_id))
    if m < 1:
        raise ValueError(f"candidate count must be positive, got {m}")
    if m > len(pool):
        raise ValueError(
            f"user {user_id} has only {len(pool)} unobserved items, wanted {m}")
    ids = rng.choice(pool, size=m, replace=False)
    return CandidateSet(user_id=user_id, pos_item_id=pos_item_id,
                        item_ids=np.asarray(ids, dtype=np.int64))


def rns_select(pool: np.ndarray, rng: np.random.Generator) -> SamplerOutput:
    """Uniform pick from an explicit pool of unobserved item ids."""
    pool = np.asarray(pool, dtype=np.int64)
    if len(pool) == 0:
        raise ValueError("empty negative pool")
    return SamplerOutput(provenance="rns", neg_item=int(pool[rng.integers(len(pool))]))


def dns_select(u_vec: np.ndarray, candidates: CandidateSet, params) -> SamplerOutput:
    """Highest-scoring candidate; exact ties resolve to the lowest item id."""
    ids = candidates.item_ids[None, :]
    scores = candidate_scores(u_vec[None, :], params.item_emb[ids])
    pos = argmax_lowest_id(scores, ids)[0]
    return SamplerOutput(provenance="dns", neg_item=int(candidates.item_ids[pos]))


def ans_sample(user: int, pos_item: int, candidates: CandidateSet, params,
               epsilon: float, rng: np.random.Generator, noise_high: float = 0.1,
               mag_clamp: float = 1e-8) -> SamplerOutput:
    """Run the augment-and-select pipeline for one pair."""
    noise = rng.uniform(0.0, noise_high,
                        size=(candidates.m, params.d))
    augmented = ans.augment_candidates(user, pos_item, candidates.item_ids, params,
                                       noise, epsilon, mag_clamp)
    winner = ans.select_final(params.user_emb[user], augmented, epsilon)
    factors = [ans.disentangle(params.item_emb[i],
                               ans.compute_gate(params.user_emb[user],
                                                params.item_emb[i], params))
               for i in candidates.item_ids]
    pos_f = [ans.positive_factors(params.item_emb[pos_item], f.gate) for f in factors]
    return SamplerOutput(
        provenance="ans",
        neg_item=winner.base_item,
        neg_vector=winner.aug_vec,
        aux_contrastive=ans.contrastive_loss(params.user_emb[user], factors),
        aux_disentangle=ans.disentanglement_loss(pos_f, factors),
    )


def hns_select(user: int, train_set, params, rng: np.random.Generator) -> SamplerOutput:
    """Uniform draw whose hard factor becomes the negative vector."""
    pool = np.flatnonzero(_unobserved_mask(train_set, user))
    base = rns_select(pool, rng).neg_item
    hard = ans.hns_transform(params.item_emb[base], params.user_emb[user], params)
    return SamplerOutput(provenance="hns", neg_item=base, neg_vector=hard)


@dataclass
class DrawSet:
    """Everything random a training step consumes, drawn up front.

    Replaying a DrawSet against a ParamStore is deterministic, which is what
    the gradient checks and the bitwise reduction tests lean on.
    """

    kind: str
    neg_ids: np.ndarray | None = None     # (B,) for rns / hns
    cand_ids: np.ndarray | None = None    # (B, M) for dns / ans
    noise: np.ndarray | None = None       # (B, M, d) for ans


def draw_for_step(kind: str, train_set, users: np.ndarray, m: int,
                  rng_cand: np.random.Generator,
                  rng_noise: np.random.Generator | None = None,
                  noise_high: float = 0.1, d: int | None = None) -> DrawSet:
    """First-pass draws for one batch; noise comes from its own stream."""
    if kind not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler kind {kind!r}")
    b = len(users)
    if kind in ("rns", "hns"):
        neg = np.empty(b, dtype=np.int64)
        for row, u in enumerate(users):
            pool = np.flatnonzero(_unobserved_mask(train_set, int(u)))
            if len(pool) == 0:
                raise ValueError(f"user {u} has no unobserved items")
            neg[row] = pool[rng_cand.integers(len(pool))]
        return DrawSet(kind=kind, neg_ids=neg)
    cand = np.empty((b, m), dtype=np.int64)
    for row, u in enumerate(users):
        cand[row] = draw_candidates(int(u), train_set, m, rng_cand).item_ids
    noise = None
    if kind == "ans":
        if rng_noise is None or d is None:
            raise ValueError("ans draws need a noise stream and the embedding dim")
        noise = rng_noise.uniform(0.0, noise_high, size=(b, m, d))
    return DrawSet(kind=kind, cand_ids=cand, noise=noise)


@dataclass
class SamplerBatchResult:
    """Vectorized sampler stage output for one batch."""

    kind: str
    neg_items: np.ndarray                 # (B,) backing item ids
    neg_vecs: np.ndarray                  # (B, d) negative vectors fed to the loss
    aux_contrastive: np.ndarray           # (B,)
    aux_disentangle: np.ndarray           # (B,)
    extras: object = None                 # AnsBatch / HnsBatch when applicable


def run_sampler(params, users: np.ndarray, pos_items: np.ndarray, draws: DrawSet,
                *, epsilon: float, mag_clamp: float = 1e-8) -> SamplerBatchResult:
    """Turn fixed draws into negative vectors under the current parameters."""
    b = len(users)
    zeros = np.zeros(b)
    if draws.kind == "rns":
        return SamplerBatchResult(
            kind="rns", neg_items=draws.neg_ids,
            neg_vecs=params.item_emb[draws.neg_ids],
            aux_contrastive=zeros, aux_disentangle=zeros)
    if draws.kind == "dns":
        u = params.user_emb[users]
        scores = candidate_scores(u, params.item_emb[draws.cand_ids])
        pos = argmax_lowest_id(scores, draws.cand_ids)
        neg_items = draws.cand_ids[np.arange(b), pos]
        return SamplerBatchResult(
            kind="dns", neg_items=neg_items, neg_vecs=params.item_emb[neg_items],
            aux_contrastive=zeros, aux_disentangle=zeros)
    if draws.kind == "hns":
        ex = ans.hns_forward_batch(params, users, draws.neg_ids)
        return SamplerBatchResult(
            kind="hns", neg_items=draws.neg_ids, neg_vecs=ex.neg_vecs,
            aux_contrastive=zeros, aux_disentangle=zeros, extras=ex)
    if draws.kind == "ans":
        ex = ans.forward_batch(params, users, pos_items, draws.cand_ids,
                               draws.noise, epsilon, mag_clamp)
        return SamplerBatchResult(
            kind="ans", neg_items=ex.base_items, neg_vecs=ex.neg_vecs,
            aux_contrastive=ex.aux_contrastive, aux_disentangle=ex.aux_disentangle,
            extras=ex)
    raise ValueError(f"unknown sampler kind {draws.kind!r}")
