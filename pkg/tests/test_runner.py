"""Config validation, the training loop, experiment records, and reports."""

import ast
import csv
import json

import numpy as np
import pytest

from ansrec.config import RunConfig
from ansrec.dataset import Splits, split_random
from ansrec.evaluation import MetricReport, evaluate_model
from ansrec.model import load_checkpoint
from ansrec.runner import (SELECTION_K, Trainer, compare_runs, emit_report,
                           load_report, run_experiment)
from ansrec.synthetic import make_latent_factor_dataset


def _splits(seed=0, n_users=30, n_items=40):
    iset = make_latent_factor_dataset(n_users=n_users, n_items=n_items, rank=4,
                                      per_user=6, seed=seed, temperature=0.1)
    return split_random(iset, seed=seed)


def _cfg(**over):
    base = dict(sampler="ans", d=8, M=4, batch_size=64, lr=0.01, l2_reg=1e-4,
                gamma=0.1, epsilon=0.5, noise_high=0.1, protocol="random",
                max_epochs=4, patience=2, seed=0)
    base.update(over)
    return RunConfig(**base)


class TestRunConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.d, cfg.lr, cfg.batch_size) == (64, 0.001, 2048)
        assert cfg.l2_reg == 1e-4 and cfg.patience == 10
        assert cfg.eval_ks == (10, 15, 20)
        assert cfg.sampler == "ans" and cfg.M == 8
        assert cfg.epsilon == 0.5 and cfg.gamma == 0.1 and cfg.noise_high == 0.1

    @pytest.mark.parametrize("bad", [
        dict(sampler="nope"), dict(protocol="nope"), dict(M=0),
        dict(epsilon=1.5), dict(epsilon=-0.1), dict(gamma=-1.0),
        dict(noise_high=-0.1), dict(mag_clamp=0.0), dict(d=0), dict(lr=-1.0),
        dict(batch_size=0), dict(l2_reg=-1.0), dict(max_epochs=0),
        dict(patience=-1), dict(eval_ks=()), dict(eval_ks=(0,)),
        dict(val_fraction=1.0), dict(diag_pairs=0), dict(diag_bins=0),
    ])
    def test_rejects_bad_values(self, bad):
        with pytest.raises(ValueError, match="bad config"):
            RunConfig(**bad)

    def test_timestamp_protocol_needs_cutoff_with_data(self):
        with pytest.raises(ValueError, match="cutoff"):
            RunConfig(protocol="timestamp_cut", data_path="x.tsv")
        RunConfig(protocol="timestamp_cut", data_path="x.tsv", cutoff=5)
        RunConfig(protocol="timestamp_cut")  # explicit splits come later

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            RunConfig.from_dict({"learning_rate": 0.1})

    def test_file_round_trip(self, tmp_path):
        cfg = _cfg(eval_ks=(5, 20), ratios=(0.7, 0.2, 0.1))
        path = str(tmp_path / "cfg.json")
        cfg.save(path)
        assert RunConfig.from_file(path) == cfg


class TestTrainer:
    def test_two_trainers_march_in_lockstep(self):
        splits = _splits()
        a = Trainer(_cfg(), splits)
        b = Trainer(_cfg(), splits)
        stats_a = a.train_epoch(1)
        stats_b = b.train_epoch(1)
        assert stats_a == stats_b
        for name, arr in a.params.arrays().items():
            np.testing.assert_array_equal(arr, getattr(b.params, name))

    def test_seed_changes_trajectory(self):
        splits = _splits()
        a = Trainer(_cfg(seed=0), splits)
        b = Trainer(_cfg(seed=1), splits)
        a.train_epoch(1)
        b.train_epoch(1)
        assert not np.array_equal(a.params.user_emb, b.params.user_emb)

    def test_epoch_stats_fields(self):
        trainer = Trainer(_cfg(), _splits())
        stats = trainer.train_epoch(1)
        assert set(stats) == {"epoch", "loss", "bpr", "contrastive",
                              "disentangle"}
        assert stats["epoch"] == 1 and np.isfinite(stats["loss"])

    def test_frozen_gates_stay_at_init(self):
        splits = _splits()
        trainer = Trainer(_cfg(freeze_gates=True), splits)
        before = trainer.params.w_item.copy()
        trainer.train_epoch(1)
        np.testing.assert_array_equal(trainer.params.w_item, before)

    def test_empty_train_split_rejected(self):
        splits = _splits()
        hollow = Splits(train=splits.train, validation=None, test=None,
                        protocol="random", seed=0)
        hollow.train.interactions = hollow.train.interactions[:0]
        with pytest.raises(ValueError, match="empty"):
            Trainer(_cfg(), hollow)

    def test_eval_without_split_rejected(self):
        splits = _splits()
        bare = Splits(train=splits.train, validation=None, test=None,
                      protocol="random", seed=0)
        trainer = Trainer(_cfg(), bare)
        with pytest.raises(ValueError, match="validation"):
            trainer.validation_ndcg()
        with pytest.raises(ValueError, match="test"):
            trainer.test_report()


class TestRunExperiment:
    def test_patience_zero_stops_after_one_epoch(self):
        record = run_experiment(_cfg(patience=0, max_epochs=10), _splits())
        assert len(record.epochs) == 1
        assert record.best_epoch == 1

    def test_identical_runs_produce_identical_records(self):
        a = run_experiment(_cfg(max_epochs=3), _splits())
        b = run_experiment(_cfg(max_epochs=3), _splits())
        assert json.dumps(a.test_report.to_dict(), sort_keys=True) == \
            json.dumps(b.test_report.to_dict(), sort_keys=True)
        assert a.best_epoch == b.best_epoch
        assert a.best_val_ndcg == b.best_val_ndcg
        hist_a = [{k: v for k, v in e.items() if k != "seconds"}

                  for e in a.epochs]
        hist_b = [{k: v for k, v in e.items() if k != "seconds"}
                  for e in b.epochs]
        assert hist_a == hist_b

    def test_no_validation_trains_to_the_end(self):
        splits = _splits()
        bare = Splits(train=splits.train, validation=None, test=splits.test,
                      protocol="random", seed=0)
        record = run_experiment(_cfg(max_epochs=3, patience=0), bare)
        assert len(record.epochs) == 3
        assert record.best_epoch == 3
        assert record.best_val_ndcg == 0.0

    def test_best_params_are_restored_and_checkpointed(self, tmp_path):
        splits = _splits()
        cfg = _cfg(max_epochs=5, patience=1, out_dir=str(tmp_path))
        record = run_experiment(cfg, splits)
        params, state, meta = load_checkpoint(record.checkpoint_path)
        assert meta == {"seed": 0, "best_epoch": record.best_epoch}
        restored = evaluate_model(params, splits.train, splits.validation,
                                  ks=(SELECTION_K,))
        assert restored.metrics[SELECTION_K]["ndcg"] == record.best_val_ndcg

    def test_training_beats_the_untrained_model(self):
        splits = _splits(seed=3)
        cfg = _cfg(sampler="rns", gamma=0.0, max_epochs=8, patience=8, seed=3)
        record = run_experiment(cfg, splits)
        baseline = Trainer(cfg, splits).validation_ndcg()
        assert record.best_val_ndcg > baseline

    def test_epoch_history_carries_validation_curve(self):
        record = run_experiment(_cfg(max_epochs=3, patience=3), _splits())
        assert all("val_ndcg" in e and "seconds" in e for e in record.epochs)
        assert record.best_val_ndcg == max(e["val_ndcg"] for e in record.epochs)
        assert record.config["sampler"] == "ans"
        assert record.wall_seconds > 0.0


def _report(hits20, metrics20, seed=0):
    return MetricReport(ks=(20,), metrics={20: metrics20},
                        n_users_evaluated=3,
                        hits={20: sorted(hits20)}, seed=seed)


class TestEmitAndCompare:
    def test_json_round_trip(self, tmp_path):
        report = _report([(0, 1), (2, 5)],
                         {"hit": 0.5, "ndcg": 0.25, "recall": 0.125})
        path = str(tmp_path / "r.json")
        emit_report(report, path, fmt="json")
        assert load_report(path).to_dict() == report.to_dict()

    def test_csv_rows_are_exact(self, tmp_path):
        report = _report([], {"hit": 0.5, "ndcg": 0.25, "recall": 0.125})
        path = tmp_path / "r.csv"
        emit_report(report, str(path), fmt="csv")
        assert path.read_bytes().decode() == (
            "k,metric,value\r\n"
            "20,hit,0.5\r\n"
            "20,ndcg,0.25\r\n"
            "20,recall,0.125\r\n")

    def test_csv_values_match_json_exactly(self, tmp_path):
        splits = _splits()
        record = run_experiment(_cfg(max_epochs=2, patience=2), splits)
        jpath, cpath = str(tmp_path / "r.json"), str(tmp_path / "r.csv")
        emit_report(record.test_report, jpath, fmt="json")
        emit_report(record.test_report, cpath, fmt="csv")
        loaded = load_report(jpath)
        with open(cpath, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            k, name = int(row["k"]), row["metric"]
            assert ast.literal_eval(row["value"]) == loaded.metrics[k][name]

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            emit_report(_report([], {"hit": 0.0}), str(tmp_path / "r.x"),
                        fmt="yaml")

    def test_compare_matrix_and_deltas(self):
        r0 = _report([(0, 1), (0, 2), (1, 3)], {"ndcg": 0.30})
        r1 = _report([(0, 1)], {"ndcg": 0.20})
        out = compare_runs([r0, r1], labels=["a", "b"], k=20)
        assert out["per_matrix"][0][0] == 0.0 and out["per_matrix"][1][1] == 0.0
        assert out["per_matrix"][0][1] == pytest.approx(2.0 / 3.0)
        assert out["per_matrix"][1][0] == 0.0
        assert out["metric_deltas"]["a"]["ndcg"] == 0.0
        assert out["metric_deltas"]["b"]["ndcg"] == pytest.approx(-0.10)

    def test_disjoint_hit_sets(self):
        r0 = _report([(0, 1)], {"ndcg": 0.1})
        r1 = _report([(5, 6)], {"ndcg": 0.1})
        out = compare_runs([r0, r1], k=20)
        assert out["per_matrix"][0][1] == 1.0
        assert out["per_matrix"][1][0] == 1.0
        assert out["labels"] == ["run0", "run1"]

    def test_compare_errors(self):
        r = _report([(0, 1)], {"ndcg": 0.1})
        with pytest.raises(ValueError, match="two reports"):
            compare_runs([r])
        with pytest.raises(ValueError, match="label"):
            compare_runs([r, r], labels=["only-one"])
