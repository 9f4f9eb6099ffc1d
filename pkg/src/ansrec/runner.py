"""Experiment driver: training loop, early stopping, reports, comparisons."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import model, samplers
from .config import RunConfig
from .dataset import Splits, ingest_interactions, split_by_timestamp, split_random
from .diagnostics import DiagnosticsCollector
from .evaluation import MetricReport, evaluate_model, per
from .rng import rng_stream

SELECTION_K = 20  # validation NDCG cutoff used for early stopping


@dataclass
class RunRecord:
    """What one run produced: config echo, history, and the test report."""

    config: dict
    seed: int
    epochs: list[dict]
    best_epoch: int
    best_val_ndcg: float
    test_report: MetricReport
    checkpoint_path: str | None = None
    wall_seconds: float = 0.0

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_val_ndcg": self.best_val_ndcg,
            "test_report": self.test_report.to_dict(),
            "checkpoint_path": self.checkpoint_path,
            "wall_seconds": self.wall_seconds,
        }


def load_splits(cfg: RunConfig) -> Splits:
    if cfg.data_path is None:
        raise ValueError("config has no data_path; pass splits explicitly instead")
    iset = ingest_interactions(cfg.data_path, has_timestamp=cfg.has_timestamp)
    if cfg.protocol == "timestamp_cut":
        return split_by_timestamp(iset, cfg.cutoff, cfg.val_fraction, cfg.seed)
    return split_random(iset, cfg.ratios, cfg.seed)


class Trainer:
    """Single-writer training loop over one split set.

    Every random draw comes from a stream labeled by (seed, purpose, epoch,
    step), so epochs can be driven one at a time without hidden state and
    two trainers with the same seed consume identical randomness.
    """

    def __init__(self, cfg: RunConfig, splits: Splits):
        if len(splits.train) == 0:
            raise ValueError("empty training split")
        self.cfg = cfg
        self.splits = splits
        self.params = model.init_params(splits.train.n_users, splits.train.n_items,
                                        cfg.d, cfg.seed)
        self.state = model.init_optimizer(self.params, cfg.lr)
        self.train_pairs = splits.train.interactions[:, :2].copy()
        self.frozen = model.GATE_FIELDS if cfg.freeze_gates else ()

    def train_epoch(self, epoch: int, collector: DiagnosticsCollector | None = None) -> dict:
        """One pass over shuffled training pairs; returns mean loss parts."""
        cfg = self.cfg
        perm = rng_stream(cfg.seed, "shuffle", epoch).permutation(len(self.train_pairs))
        totals = np.zeros(4)
        n_seen = 0
        for step, start in enumerate(range(0, len(perm), cfg.batch_size)):
            rows = self.train_pairs[perm[start:start + cfg.batch_size]]
            users, pos_items = rows[:, 0], rows[:, 1]
            draws = samplers.draw_for_step(
                cfg.sampler, self.splits.train, users, cfg.M,
                rng_cand=rng_stream(cfg.seed, "candidates", epoch, step),
                rng_noise=rng_stream(cfg.seed, "noise", epoch, step),
                noise_high=cfg.noise_high, d=cfg.d)
            result = samplers.run_sampler(self.params, users, pos_items, draws,
                                          epsilon=cfg.epsilon, mag_clamp=cfg.mag_clamp)
            breakdown = model.joint_loss(self.params, users, pos_items, result,
                                         cfg.gamma, cfg.l2_reg,
                                         freeze_gates=cfg.freeze_gates)
            grads = model.backward(self.params, users, pos_items, draws,
                                   gamma=cfg.gamma, l2_reg=cfg.l2_reg,
                                   epsilon=cfg.epsilon, mag_clamp=cfg.mag_clamp,
                                   freeze_gates=cfg.freeze_gates)
            model.adam_step(self.params, grads, self.state, frozen=self.frozen)
            b = len(users)
            totals += b * np.array([breakdown.total, breakdown.bpr,
                                    breakdown.contrastive, breakdown.disentangle])
            n_seen += b
            if collector is not None:
                ex = result.extras
                if result.kind == "ans":
                    collector.note_step(epoch, ex.s_before, ex.base_items, ex.dns_items)
                elif result.kind == "dns":
                    scores = self._candidate_scores(users, draws.cand_ids)
                    collector.note_step(epoch, scores)
                else:
                    scores = self._candidate_scores(users, result.neg_items[:, None])
                    collector.note_step(epoch, scores)
        mean = totals / max(n_seen, 1)
        return {"epoch": epoch, "loss": float(mean[0]), "bpr": float(mean[1]),
                "contrastive": float(mean[2]), "disentangle": float(mean[3])}

    def _candidate_scores(self, users, cand_ids):
        u = self.params.user_emb[users]
        return np.einsum("bd,bmd->bm", u, self.params.item_emb[cand_ids])

    def validation_ndcg(self) -> float:
        if self.splits.validation is None:
            raise ValueError("no validation split; cannot early-stop")
        report = evaluate_model(self.params, self.splits.train,
                                self.splits.validation, ks=(SELECTION_K,))
        return report.metrics[SELECTION_K]["ndcg"]

    def test_report(self, config_echo: dict | None = None) -> MetricReport:
        if self.splits.test is None:
            raise ValueError("no test split to evaluate")
        return evaluate_model(self.params, self.splits.train, self.splits.test,
                              ks=self.cfg.eval_ks, config=config_echo or {},
                              seed=self.cfg.seed)


def run_experiment(cfg: RunConfig, splits: Splits | None = None,
                   collector: DiagnosticsCollector | None = None) -> RunRecord:
    """Train with early stopping on validation NDCG@20; evaluate the best.

    The returned record is deterministic for a fixed config and seed, apart
    from its wall-clock fields. ``patience`` counts evaluations since the
    last improvement, so patience 0 stops after exactly one epoch.
    """
    t0 = time.monotonic()
    if splits is None:
        splits = load_splits(cfg)
    trainer = Trainer(cfg, splits)
    if collector is not None:
        collector.checkpoint(0, trainer.params, splits.train,
                             rng_stream(cfg.seed, "diag", 0))
    # without a validation split there is nothing to stop on: train to
    # max_epochs and keep the final parameters
    track = splits.validation is not None
    history: list[dict] = []
    best_val = -np.inf
    best_epoch = 0
    best_params = trainer.params.copy()
    best_state = trainer.state.copy()
    bad = 0
    for epoch in range(1, cfg.max_epochs + 1):
        t_epoch = time.monotonic()
        stats = trainer.train_epoch(epoch, collector)
        val = trainer.validation_ndcg() if track else 0.0
        stats["val_ndcg"] = val
        stats["seconds"] = time.monotonic() - t_epoch
        history.append(stats)
        if collector is not None:
            collector.checkpoint(epoch, trainer.params, splits.train,
                                 rng_stream(cfg.seed, "diag", epoch))
        if not track:
            best_epoch = epoch
            continue
        if val > best_val:
            best_val = val
            best_epoch = epoch
            best_params = trainer.params.copy()
            best_state = trainer.state.copy()
            bad = 0
        else:
            bad += 1
        if bad >= cfg.patience:
            break
    if track:
        trainer.params = best_params
        trainer.state = best_state
    config_echo = cfg.to_dict()
    report = trainer.test_report(config_echo)
    checkpoint_path = None
    if cfg.out_dir is not None:
        os.makedirs(cfg.out_dir, exist_ok=True)
        checkpoint_path = os.path.join(cfg.out_dir, "checkpoint.npz")
        model.save_checkpoint(checkpoint_path, trainer.params, trainer.state,
                              meta={"seed": cfg.seed, "best_epoch": best_epoch})
    return RunRecord(
        config=config_echo, seed=cfg.seed, epochs=history, best_epoch=best_epoch,
        best_val_ndcg=float(best_val) if np.isfinite(best_val) else 0.0,
        test_report=report, checkpoint_path=checkpoint_path,
        wall_seconds=time.monotonic() - t0,
    )


def emit_report(report: MetricReport, path: str, fmt: str = "json") -> None:
    """Serialize a metric report; floats keep their exact repr either way."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "metric", "value"])
            for k in report.ks:
                for name in sorted(report.metrics[k]):
                    writer.writerow([k, name, repr(report.metrics[k][name])])
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(path: str) -> MetricReport:
    with open(path, "r", encoding="utf-8") as fh:
        return MetricReport.from_dict(json.load(fh))


def compare_runs(reports: list[MetricReport], labels: list[str] | None = None,
                 k: int = SELECTION_K) -> dict:
    """Pairwise prediction-overlap matrix at one K, plus metric deltas.

    ``per_matrix[i][j]`` is the fraction of run i's correct predictions that
    run j misses; the diagonal is zero by construction.
    """
    if len(reports) < 2:
        raise ValueError("need at least two reports to compare")
    labels = labels or [f"run{i}" for i in range(len(reports))]
    if len(labels) != len(reports):
        raise ValueError("one label per report")
    hit_sets = [set(map(tuple, r.hits.get(k, []))) for r in reports]
    n = len(reports)
    matrix = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                matrix[i][j] = per(hit_sets[i], hit_sets[j])
    deltas = {}
    base = reports[0].metrics.get(k, {})
    for idx, rep in enumerate(reports):
        deltas[labels[idx]] = {
            name: rep.metrics.get(k, {}).get(name, 0.0) - base.get(name, 0.0)
            for name in sorted(base)
        }
    return {"k": k, "labels": labels, "per_matrix": matrix, "metric_deltas": deltas}
