"""Implicit-feedback recommender training with augmented negative sampling.

The package trains inner-product embedding models with a pairwise ranking
objective and one of four negative samplers: uniform (rns), hardest
candidate (dns), augmented synthetic negatives (ans), and a hard-factor
ablation (hns). It ships full-ranking evaluation, prediction-overlap
comparison, training diagnostics, and a deterministic experiment runner.
"""

from .ans import (AugmentedNegative, FactorPair, PositiveFactors, augment,
                  augment_direction, augment_magnitude, compute_gate,
                  contrastive_loss, disentangle, disentanglement_loss,
                  hns_transform, positive_factors, select_final)
from .config import RunConfig
from .dataset import (InteractionSet, RawInteraction, Splits,
                      ingest_interactions, split_by_timestamp, split_random)
from .evaluation import (MetricReport, RankedList, evaluate_model,
                         metrics_at_k, per, rank_topk)
from .model import (LossBreakdown, OptimizerState, ParamStore, adam_step,
                    backward, bpr_loss, init_optimizer, init_params,
                    joint_loss, load_checkpoint, save_checkpoint, score)
from .runner import RunRecord, Trainer, compare_runs, emit_report, run_experiment
from .samplers import (CandidateSet, SamplerOutput, ans_sample, draw_candidates,
                       dns_select, hns_select, rns_select)

# ansrec.synthetic is deliberately not imported here so that
# `python -m ansrec.synthetic` runs without a double-import warning

__version__ = "0.1.0"
