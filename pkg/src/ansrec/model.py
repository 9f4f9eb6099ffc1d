"""Parameters, objectives, exact gradients, Adam, and checkpoint IO.

The trainable state is a pair of embedding tables (users, items) plus three
gate-network weights: an item transform, a user transform, and a magnitude
head. The joint objective is a batch mean of pairwise ranking losses with
optional contrastive/disentanglement terms and L2 weight decay scoped to the
parameters the batch actually touched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import ans, samplers
from .numerics import dot_scores, sigmoid, softplus
from .rng import rng_stream

ARRAY_FIELDS = ("user_emb", "item_emb", "w_item", "w_user", "w_mag")
GATE_FIELDS = ("w_item", "w_user", "w_mag")
CHECKPOINT_VERSION = 1


@dataclass
class ParamStore:
    """All trainable arrays, float64 throughout.

    ``w_mag`` is the single row of the magnitude head, stored as a flat
    (d,) vector.
    """

    user_emb: np.ndarray
    item_emb: np.ndarray
    w_item: np.ndarray
    w_user: np.ndarray
    w_mag: np.ndarray

    @property
    def d(self) -> int:
        return self.user_emb.shape[1]

    @property
    def n_users(self) -> int:
        return self.user_emb.shape[0]

    @property
    def n_items(self) -> int:
        return self.item_emb.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in ARRAY_FIELDS}

    def copy(self) -> "ParamStore":
        return ParamStore(**{k: v.copy() for k, v in self.arrays().items()})

    def check_finite(self) -> None:
        for name, arr in self.arrays().items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite values in {name}")


def init_params(n_users: int, n_items: int, d: int, seed: int = 0) -> ParamStore:
    """Xavier-uniform init; the fan pair is treated as (d, d) for every array.

    The bound is sqrt(6 / (d + d)); embedding rows use the same convention
    as the square transforms so a single bound covers everything.
    """
    if n_users < 1 or n_items < 1:
        raise ValueError("need at least one user and one item")
    if d < 1:
        raise ValueError(f"embedding dim must be positive, got {d}")
    bound = np.sqrt(6.0 / (2.0 * d))
    rng = rng_stream(seed, "init")
    draw = lambda *shape: rng.uniform(-bound, bound, size=shape)
    return ParamStore(
        user_emb=draw(n_users, d),
        item_emb=draw(n_items, d),
        w_item=draw(d, d),
        w_user=draw(d, d),
        w_mag=draw(d),
    )


def score(u_vec: np.ndarray, i_vec: np.ndarray) -> float:
    """Inner-product preference score for one (user, item) pair."""
    u_vec = np.asarray(u_vec, dtype=np.float64)
    i_vec = np.asarray(i_vec, dtype=np.float64)
    if u_vec.shape != i_vec.shape or u_vec.ndim != 1:
        raise ValueError(f"shape mismatch: {u_vec.shape} vs {i_vec.shape}")
    return float(u_vec @ i_vec)


def bpr_loss(s_pos: float, s_neg: float) -> float:
    """Pairwise ranking loss, evaluated in the stable softplus form."""
    return float(softplus(s_neg - s_pos))


@dataclass(frozen=True)
class LossBreakdown:
    bpr: float
    contrastive: float
    disentangle: float
    l2: float
    total: float
    gamma: float
    l2_reg: float


def _l2_gate_fields(kind: str, freeze_gates: bool) -> tuple[str, ...]:
    # weight decay covers only the transforms the sampler actually ran
    if freeze_gates:
        return ()
    if kind == "ans":
        return GATE_FIELDS
    if kind == "hns":
        return ("w_item", "w_user")
    return ()


def joint_loss(params: ParamStore, users: np.ndarray, pos_items: np.ndarray,
               result: samplers.SamplerBatchResult, gamma: float, l2_reg: float,
               freeze_gates: bool = False) -> LossBreakdown:
    """Batch-mean joint objective.

    total = mean BPR + gamma * (mean contrastive + mean disentangle)
          + l2_reg * l2, where l2 averages the touched embedding norms over
    the batch and adds the active gate transforms once.
    """
    b = len(users)
    if b == 0:
        return LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, gamma, l2_reg)
    u = params.user_emb[users]
    p = params.item_emb[pos_items]
    s_pos = dot_scores(u, p)
    s_neg = dot_scores(u, result.neg_vecs)
    bpr = float(np.mean(softplus(s_neg - s_pos)))
    c_loss = float(np.mean(result.aux_contrastive))
    d_loss = float(np.mean(result.aux_disentangle))
    neg_emb = params.item_emb[result.neg_items]
    l2 = float(np.mean(np.sum(u * u, axis=1) + np.sum(p * p, axis=1)
                       + np.sum(neg_emb * neg_emb, axis=1)))
    for name in _l2_gate_fields(result.kind, freeze_gates):
        arr = getattr(params, name)
        l2 += float(np.sum(arr * arr))
    total = bpr + gamma * (c_loss + d_loss) + l2_reg * l2
    for label, val in (("bpr", bpr), ("contrastive", c_loss),
                       ("disentangle", d_loss), ("l2", l2), ("total", total)):
        if not np.isfinite(val):
            raise FloatingPointError(f"non-finite loss component: {label}")
    return LossBreakdown(bpr, c_loss, d_loss, l2, total, gamma, l2_reg)


def loss_value(params: ParamStore, users: np.ndarray, pos_items: np.ndarray,
               draws: samplers.DrawSet, *, gamma: float, l2_reg: float,
               epsilon: float, mag_clamp: float = 1e-8,
               freeze_gates: bool = False) -> float:
    """Total objective recomputed from fixed draws; the finite-difference view."""
    result = samplers.run_sampler(params, users, pos_items, draws,
                                  epsilon=epsilon, mag_clamp=mag_clamp)
    return joint_loss(params, users, pos_items, result, gamma, l2_reg,
                      freeze_gates=freeze_gates).total


def _gate_backward(params: ParamStore, grads: dict, u: np.ndarray, n: np.ndarray,
                   alpha: np.ndarray, beta: np.ndarray, gate: np.ndarray,
                   dgate: np.ndarray, cand_ids: np.ndarray) -> np.ndarray:
    """Push a gradient on the gate output back onto transforms and embeddings.

    Returns the per-row user gradient; item contributions are scattered
    directly. Shapes: u/beta (B, d); n/alpha/gate/dgate (B, M, d);
    cand_ids (B, M).
    """
    dz = dgate * gate * (1.0 - gate)
    grads["w_item"] += np.einsum("bmr,br,bmc->rc", dz, beta, n)
    grads["w_user"] += np.einsum("bmr,bmr,bc->rc", dz, alpha, u)
    np.add.at(grads["item_emb"], cand_ids, (dz * beta[:, None, :]) @ params.w_item)
    return (dz * alpha).sum(axis=1) @ params.w_user


def backward(params: ParamStore, users: np.ndarray, pos_items: np.ndarray,
             draws: samplers.DrawSet, *, gamma: float, l2_reg: float,
             epsilon: float, mag_clamp: float = 1e-8,
             freeze_gates: bool = False) -> dict[str, np.ndarray]:
    """Exact gradient of the joint objective with respect to every array.

    Gradient boundaries: the winning-candidate index, the sign direction,
    and the raw noise draws are constants. The margin head does receive
    gradient, but only on rows where the noise norm cap was active; there
    the noise is a fixed unit vector scaled by the learned margin.
    """
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
    b = len(users)
    if b == 0:
        return grads
    result = samplers.run_sampler(params, users, pos_items, draws,
                                  epsilon=epsilon, mag_clamp=mag_clamp)
    u = params.user_emb[users]
    p = params.item_emb[pos_items]
    s_pos = dot_scores(u, p)
    s_neg = dot_scores(u, result.neg_vecs)
    q = sigmoid(s_neg - s_pos)
    inv_b = 1.0 / b
    coef = (q * inv_b)[:, None]

    du = coef * (result.neg_vecs - p)
    dp = -coef * u
    du += (2.0 * l2_reg * inv_b) * u
    dp += (2.0 * l2_reg * inv_b) * p
    np.add.at(grads["item_emb"], result.neg_items,
              (2.0 * l2_reg * inv_b) * params.item_emb[result.neg_items])

    kind = result.kind
    if kind in ("rns", "dns"):
        np.add.at(grads["item_emb"], result.neg_items, coef * u)
    elif kind == "hns":
        ex = result.extras
        n = params.item_emb[ex.cand_ids]
        np.add.at(grads["item_emb"], ex.cand_ids, (coef * u)[:, None, :] * ex.gate)
        dgate = (coef * u)[:, None, :] * n
        du += _gate_backward(params, grads, u, n, ex.alpha, ex.beta, ex.gate,
                             dgate, ex.cand_ids)
    elif kind == "ans":
        ex = result.extras
        m_cands = ex.cand_ids.shape[1]
        n = params.item_emb[ex.cand_ids]
        gate = ex.gate
        rows_all = np.arange(b)
        np.add.at(grads["item_emb"], ex.base_items, coef * u)
        dgate = np.zeros_like(gate)

        # margin path: active only where the noise norm was capped
        act = np.flatnonzero(ex.rescale[rows_all, ex.winner_pos])
        if act.size:
            jw = ex.winner_pos[act]
            noise_w = ex.noise[act, jw]
            unit = noise_w / ex.noise_norm[act, jw][:, None] * ans.NORM_SAFETY
            t = np.sum(u[act] * unit * ex.direction[act, jw], axis=1)
            marg = ex.margin[act, jw]
            c_den = ex.clamped_den[act, jw]
            live = (np.abs(ex.mag_sim[act, jw]) >= mag_clamp) \
                & (np.abs(1.0 / c_den) < ans.SIGMOID_SAT)
            mu = np.where(live, marg * (1.0 - marg) * (-1.0 / (c_den * c_den)), 0.0)
            kappa = (q[act] * t * mu * inv_b)[:, None]
            hard_w = n[act, jw] * gate[act, jw]
            pp_w = p[act] * gate[act, jw]
            grads["w_mag"] += (kappa * (hard_w * pp_w)).sum(axis=0)
            dhard = kappa * (params.w_mag * pp_w)
            dpp = kappa * (params.w_mag * hard_w)
            np.add.at(grads["item_emb"], ex.base_items[act], dhard * gate[act, jw])
            dp[act] += dpp * gate[act, jw]
            np.add.at(dgate, (act, jw), dhard * n[act, jw] + dpp * p[act])

        if gamma != 0.0:
            cg = gamma * inv_b / m_cands
            u_b = u[:, None, :]
            p_b = p[:, None, :]
            du += cg * (n - 2.0 * n * gate).sum(axis=1)
            dn_aux = cg * (u_b * (1.0 - 2.0 * gate)
                           - 2.0 * (p_b - n) * gate ** 2 + p_b * (1.0 - gate) ** 2)
            dp += cg * (2.0 * (p_b - n) * gate ** 2 + n * (1.0 - gate) ** 2).sum(axis=1)
            dgate += cg * (-2.0 * u_b * n + 2.0 * (p_b - n) ** 2 * gate
                           - 2.0 * p_b * n * (1.0 - gate))
            np.add.at(grads["item_emb"], ex.cand_ids, dn_aux)

        if np.any(dgate):
            du += _gate_backward(params, grads, u, n, ex.alpha, ex.beta, gate,
                                 dgate, ex.cand_ids)
    else:
        raise ValueError(f"unknown sampler kind {kind!r}")

    for name in _l2_gate_fields(kind, freeze_gates):
        grads[name] += (2.0 * l2_reg) * getattr(params, name)

    np.add.at(grads["user_emb"], users, du)
    np.add.at(grads["item_emb"], pos_items, dp)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name}")
    return grads


@dataclass
class OptimizerState:
    """Adam accumulators congruent with ParamStore, plus hyperparameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            m={k: a.copy() for k, a in self.m.items()},
            v={k: a.copy() for k, a in self.v.items()},
            step=self.step, lr=self.lr, beta1=self.beta1, beta2=self.beta2,
            eps_adam=self.eps_adam,
        )


def init_optimizer(params: ParamStore, lr: float = 0.001) -> OptimizerState:
    if lr < 0:
        raise ValueError(f"lr must be non-negative, got {lr}")
    zeros = lambda: {k: np.zeros_like(a) for k, a in params.arrays().items()}
    return OptimizerState(m=zeros(), v=zeros(), step=0, lr=lr)


def adam_step(params: ParamStore, grads: dict[str, np.ndarray],
              state: OptimizerState, frozen: tuple[str, ...] = ()) -> None:
    """One in-place Adam update; ``frozen`` arrays are left untouched."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name in ARRAY_FIELDS:
        if name in frozen:
            continue
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        update = state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps_adam)
        arr = getattr(params, name)
        arr -= update
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite parameters in {name} after update")


def save_checkpoint(path: str, params: ParamStore, state: OptimizerState,
                    meta: dict | None = None) -> None:
    """Bit-exact dump of parameters, optimizer state, and run position."""
    payload = {name: arr for name, arr in params.arrays().items()}
    for name in ARRAY_FIELDS:
        payload[f"m_{name}"] = state.m[name]
        payload[f"v_{name}"] = state.v[name]
    header = {
        "version": CHECKPOINT_VERSION,
        "step": state.step,
        "lr": state.lr,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps_adam": state.eps_adam,
        "meta": meta or {},
    }
    payload["header"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(),
                                      dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path: str) -> tuple[ParamStore, OptimizerState, dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        params = ParamStore(**{name: data[name].copy() for name in ARRAY_FIELDS})
        state = OptimizerState(
            m={name: data[f"m_{name}"].copy() for name in ARRAY_FIELDS},
            v={name: data[f"v_{name}"].copy() for name in ARRAY_FIELDS},
            step=int(header["step"]),
            lr=float(header["lr"]),
            beta1=float(header["beta1"]),
            beta2=float(header["beta2"]),
            eps_adam=float(header["eps_adam"]),
        )
    return params, state, header["meta"]
