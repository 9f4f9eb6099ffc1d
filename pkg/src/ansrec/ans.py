"""Disentangle-augment-select pipeline for synthetic hard negatives.

Each candidate negative is split by a learned sigmoid gate into a hard part
(dimensions the user plausibly likes) and an easy part. The easy part is
nudged toward the paired positive item by bounded uniform noise: the sign
pattern of (positive residue - easy part) fixes the direction, a learned
margin caps the L2 norm. The candidate whose augmented score plus weighted
score gain is largest becomes the training negative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import argmax_lowest_id, candidate_scores, sigmoid

# |x| beyond this, float64 sigmoid saturates to exactly 0 or 1; clipping the
# argument keeps the margin strictly inside (0, 1) at a sub-1e-15 cost.
SIGMOID_SAT = 36.0
# shrink applied when capping the noise norm, so the capped norm stays at or
# under the margin after float rounding
NORM_SAFETY = 1.0 - 1e-12


@dataclass(frozen=True)
class FactorPair:
    """Gate and the hard/easy decomposition of one negative embedding."""

    gate: np.ndarray
    hard: np.ndarray
    easy: np.ndarray


@dataclass(frozen=True)
class PositiveFactors:
    """The positive embedding split by the same gate as its negative."""

    p_prime: np.ndarray
    p_dprime: np.ndarray


@dataclass(frozen=True)
class AugmentedNegative:
    """One candidate after augmentation, with selection bookkeeping."""

    base_item: int
    aug_vec: np.ndarray
    direction: np.ndarray
    delta: np.ndarray
    margin: float
    score_before: float
    score_after: float
    gain: float


def compute_gate(u_vec: np.ndarray, n_vec: np.ndarray, params) -> np.ndarray:
    """Per-dimension hardness weights in (0, 1) for one candidate."""
    return sigmoid((params.w_item @ n_vec) * (params.w_user @ u_vec))


def disentangle(n_vec: np.ndarray, gate: np.ndarray) -> FactorPair:
    hard = n_vec * gate
    return FactorPair(gate=gate, hard=hard, easy=n_vec - hard)


def positive_factors(p_vec: np.ndarray, gate: np.ndarray) -> PositiveFactors:
    p_prime = p_vec * gate
    return PositiveFactors(p_prime=p_prime, p_dprime=p_vec - p_prime)


def contrastive_loss(u_vec: np.ndarray, factors: list[FactorPair]) -> float:
    """Mean easy-minus-hard score separation over the candidate set."""
    if not factors:
        raise ValueError("empty candidate set")
    vals = [float(u_vec @ f.easy) - float(u_vec @ f.hard) for f in factors]
    return float(np.mean(vals))


def disentanglement_loss(pos: list[PositiveFactors], factors: list[FactorPair]) -> float:
    """Mean hard-alignment plus easy-orthogonality penalty over candidates."""
    if len(pos) != len(factors) or not factors:
        raise ValueError("positive factors and candidates must align, one per candidate")
    vals = [float(np.sum((pf.p_prime - f.hard) ** 2)) + float(pf.p_dprime @ f.easy)
            for pf, f in zip(pos, factors)]
    return float(np.mean(vals))


def augment_direction(p_dprime: np.ndarray, easy: np.ndarray) -> np.ndarray:
    """Signs of the easy-part residue; exact zeros stay zero."""
    return np.sign(p_dprime - easy)


def _regulated_margin(mag_sim, mag_clamp: float):
    """sigmoid(1 / similarity), with the denominator kept away from zero.

    The clamp preserves sign; an exact zero counts as positive, so a vanishing
    similarity yields a margin that saturates toward 1.
    """
    mag_sim = np.asarray(mag_sim, dtype=np.float64)
    den = np.where(np.abs(mag_sim) >= mag_clamp, mag_sim,
                   np.where(mag_sim >= 0.0, mag_clamp, -mag_clamp))
    arg = np.clip(1.0 / den, -SIGMOID_SAT, SIGMOID_SAT)
    return sigmoid(arg), den


def augment_magnitude(hard: np.ndarray, p_prime: np.ndarray, params,
                      rng: np.random.Generator, noise_high: float = 0.1,
                      mag_clamp: float = 1e-8) -> tuple[np.ndarray, float]:
    """Draw bounded noise for one candidate; returns (delta, margin).

    Noise is elementwise Uniform[0, noise_high]; when its L2 norm exceeds the
    margin it is rescaled onto the margin sphere (with a tiny safety shrink so
    the inequality survives rounding).
    """
    mag_sim = float(params.w_mag @ (hard * p_prime))
    margin, _ = _regulated_margin(mag_sim, mag_clamp)
    margin = float(margin)
    delta = rng.uniform(0.0, noise_high, size=hard.shape)
    norm = float(np.linalg.norm(delta))
    if norm > margin:
        delta = delta * (margin / norm * NORM_SAFETY)
    return delta, margin


def augment(factors: FactorPair, delta: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Recompose the candidate with its easy part shifted by delta * direction."""
    return (factors.easy + delta * direction) + factors.hard


def select_final(u_vec: np.ndarray, augmented: list[AugmentedNegative],
                 epsilon: float) -> AugmentedNegative:
    """Pick argmax of (augmented score + epsilon * gain), ties to lowest id."""
    if not augmented:
        raise ValueError("empty candidate set")
    vals = [a.score_after + epsilon * a.gain for a in augmented]
    best = max(vals)
    winner = min(a.base_item for a, v in zip(augmented, vals) if v == best)
    for a, v in zip(augmented, vals):
        if v == best and a.base_item == winner:
            return a
    raise AssertionError("unreachable")


def hns_transform(n_vec: np.ndarray, u_vec: np.ndarray, params) -> np.ndarray:
    """Hard factor of a uniformly drawn negative; the easy part is discarded."""
    return n_vec * compute_gate(u_vec, n_vec, params)


@dataclass
class AnsBatch:
    """Primal values of one vectorized pipeline pass, kept for the backward
    pass and for diagnostics. Shapes use B rows and M candidates."""

    cand_ids: np.ndarray      # (B, M) int64
    noise: np.ndarray         # (B, M, d) raw uniform draws
    alpha: np.ndarray         # (B, M, d) item transform outputs
    beta: np.ndarray          # (B, d) user transform outputs
    gate: np.ndarray          # (B, M, d)
    aux_contrastive: np.ndarray   # (B,)
    aux_disentangle: np.ndarray   # (B,)
    direction: np.ndarray     # (B, M, d) in {-1, 0, +1}
    mag_sim: np.ndarray       # (B, M) magnitude-head similarity
    clamped_den: np.ndarray   # (B, M) denominator after the sign-preserving clamp
    margin: np.ndarray        # (B, M) in (0, 1)
    noise_norm: np.ndarray    # (B, M)
    rescale: np.ndarray       # (B, M) bool, True where the norm cap fired
    delta: np.ndarray         # (B, M, d) noise after capping
    s_before: np.ndarray      # (B, M)
    s_after: np.ndarray       # (B, M)
    gain: np.ndarray          # (B, M)
    winner_pos: np.ndarray    # (B,) positions into the candidate axis
    base_items: np.ndarray    # (B,) item ids backing the winners
    dns_items: np.ndarray     # (B,) what plain hardest-candidate selection picks
    neg_vecs: np.ndarray      # (B, d) winning augmented vectors


def forward_batch(params, users: np.ndarray, pos_items: np.ndarray,
                  cand_ids: np.ndarray, noise: np.ndarray, epsilon: float,
                  mag_clamp: float = 1e-8) -> AnsBatch:
    """Vectorized pipeline over a batch; one synthetic negative per row."""
    u = params.user_emb[users]
    p = params.item_emb[pos_items]
    n = params.item_emb[cand_ids]
    alpha = n @ params.w_item.T
    beta = u @ params.w_user.T
    gate = sigmoid(alpha * beta[:, None, :])
    hard = n * gate
    easy = n - hard
    p_b = p[:, None, :]
    p_prime = p_b * gate
    p_dprime = p_b - p_prime

    aux_c = (candidate_scores(u, easy) - candidate_scores(u, hard)).mean(axis=1)
    aux_d = (np.sum((p_prime - hard) ** 2, axis=2)
             + np.einsum("bmd,bmd->bm", p_dprime, easy)).mean(axis=1)

    direction = np.sign(p_dprime - easy)
    mag_sim = np.einsum("bmd,d->bm", hard * p_prime, params.w_mag)
    margin, den = _regulated_margin(mag_sim, mag_clamp)
    noise_norm = np.linalg.norm(noise, axis=2)
    rescale = noise_norm > margin
    scale = np.ones_like(noise_norm)
    scale[rescale] = margin[rescale] / noise_norm[rescale] * NORM_SAFETY
    delta = noise * scale[:, :, None]
    # adding the shift to the whole embedding keeps the zero-noise case
    # bit-identical to the unaugmented candidate
    aug = n + delta * direction

    s_before = candidate_scores(u, n)
    s_after = candidate_scores(u, aug)
    gain = s_after - s_before
    winner_pos = argmax_lowest_id(s_after + epsilon * gain, cand_ids)
    dns_pos = argmax_lowest_id(s_before, cand_ids)
    rows = np.arange(len(users))
    return AnsBatch(
        cand_ids=cand_ids, noise=noise, alpha=alpha, beta=beta, gate=gate,
        aux_contrastive=aux_c, aux_disentangle=aux_d, direction=direction,
        mag_sim=mag_sim, clamped_den=den, margin=margin, noise_norm=noise_norm,
        rescale=rescale, delta=delta, s_before=s_before, s_after=s_after,
        gain=gain, winner_pos=winner_pos, base_items=cand_ids[rows, winner_pos],
        dns_items=cand_ids[rows, dns_pos], neg_vecs=aug[rows, winner_pos],
    )


@dataclass
class HnsBatch:
    """Gate primals for the hard-factor-only ablation (single candidate)."""

    cand_ids: np.ndarray   # (B, 1)
    alpha: np.ndarray      # (B, 1, d)
    beta: np.ndarray       # (B, d)
    gate: np.ndarray       # (B, 1, d)
    neg_vecs: np.ndarray   # (B, d) hard factors


def hns_forward_batch(params, users: np.ndarray, neg_ids: np.ndarray) -> HnsBatch:
    u = params.user_emb[users]
    cand_ids = np.asarray(neg_ids, dtype=np.int64).reshape(-1, 1)
    n = params.item_emb[cand_ids]
    alpha = n @ params.w_item.T
    beta = u @ params.w_user.T
    gate = sigmoid(alpha * beta[:, None, :])
    return HnsBatch(cand_ids=cand_ids, alpha=alpha, beta=beta, gate=gate,
                    neg_vecs=(n * gate)[:, 0, :])


def augment_candidates(user: int, pos_item: int, cand_ids: np.ndarray, params,
                       noise: np.ndarray, epsilon: float,
                       mag_clamp: float = 1e-8) -> list[AugmentedNegative]:
    """Per-pair view of the pipeline built on the batch implementation."""
    cand_ids = np.asarray(cand_ids, dtype=np.int64)
    ex = forward_batch(params, np.array([user]), np.array([pos_item]),
                       cand_ids[None, :], noise[None, :, :], epsilon, mag_clamp)
    out = []
    for j in range(cand_ids.shape[0]):
        out.append(AugmentedNegative(
            base_item=int(ex.cand_ids[0, j]),
            aug_vec=params.item_emb[cand_ids[j]] + ex.delta[0, j] * ex.direction[0, j],
            direction=ex.direction[0, j],
            delta=ex.delta[0, j],
            margin=float(ex.margin[0, j]),
            score_before=float(ex.s_before[0, j]),
            score_after=float(ex.s_after[0, j]),
            gain=float(ex.gain[0, j]),
        ))
    return out
