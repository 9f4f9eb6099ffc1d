"""Command-line front end: ingest, train, evaluate, diagnose, compare."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import model
from .config import RunConfig
from .dataset import ingest_interactions
from .diagnostics import (DiagnosticsCollector, write_histogram_csv,
                          write_minmax_csv, write_overlap_csv)
from .evaluation import evaluate_model
from .runner import (compare_runs, emit_report, load_report, load_splits,
                     run_experiment)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "sampler", None) is not None:
        overrides["sampler"] = args.sampler
    if getattr(args, "out", None) is not None:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = RunConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def _write_reports(record, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    emit_report(record.test_report, os.path.join(out_dir, "report.json"), "json")
    emit_report(record.test_report, os.path.join(out_dir, "report.csv"), "csv")
    with open(os.path.join(out_dir, "run_record.json"), "w", encoding="utf-8") as fh:
        json.dump(record.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_ingest(args) -> int:
    out_dir = args.out
    os.makedirs(out_dir, exist_ok=True)
    iset = ingest_interactions(args.input, has_timestamp=not args.no_timestamp,
                               map_dir=out_dir)
    with open(os.path.join(out_dir, "interactions.tsv"), "w", encoding="utf-8") as fh:
        for u, i, t in iset.interactions:
            fh.write(f"{u}\t{i}\t{t}\n")
    print(f"{len(iset)} interactions, {iset.n_users} users, {iset.n_items} items")
    print(f"remap tables and normalized interactions written to {out_dir}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_config(args)
    record = run_experiment(cfg)
    out_dir = cfg.out_dir or "."
    _write_reports(record, out_dir)
    for k in cfg.eval_ks:
        m = record.test_report.metrics[k]
        print(f"test K={k}: hit={m['hit']:.4f} recall={m['recall']:.4f} "
              f"ndcg={m['ndcg']:.4f}")
    print(f"best epoch {record.best_epoch}, reports in {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_config(args)
    params, _, _ = model.load_checkpoint(args.checkpoint)
    splits = load_splits(cfg)
    if splits.test is None:
        raise ValueError("no test split to evaluate")
    report = evaluate_model(params, splits.train, splits.test, ks=cfg.eval_ks,
                            config=cfg.to_dict(), seed=cfg.seed)
    out_dir = cfg.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    emit_report(report, os.path.join(out_dir, "report.json"), "json")
    emit_report(report, os.path.join(out_dir, "report.csv"), "csv")
    for k in cfg.eval_ks:
        m = report.metrics[k]
        print(f"test K={k}: hit={m['hit']:.4f} recall={m['recall']:.4f} "
              f"ndcg={m['ndcg']:.4f}")
    return 0


def _plot_diagnostics(collector: DiagnosticsCollector, out_dir: str) -> None:
    # imported lazily so headless training never needs a plotting backend
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if collector.histograms:
        fig, axes = plt.subplots(1, len(collector.histograms),
                                 figsize=(4 * len(collector.histograms), 3),
                                 squeeze=False)
        for ax, hist in zip(axes[0], collector.histograms):
            centers = (hist.edges[:-1] + hist.edges[1:]) / 2.0
            ax.bar(centers, hist.counts, width=np.diff(hist.edges), align="center")
            ax.axvline(hist.marker, color="red", linestyle="--", linewidth=1)
            ax.set_title(f"epoch {hist.epoch} (below: {hist.frac_below:.3f})")
            ax.set_xlabel("score")
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "score_histogram.svg"))
        plt.close(fig)
    if collector.epoch_min:
        epochs, lo, hi = collector.minmax()
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(epochs, lo, label="min")
        ax.plot(epochs, hi, label="max")
        ax.set_xlabel("epoch")
        ax.set_ylabel("normalized candidate score")
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, "candidate_minmax.svg"))
        plt.close(fig)


def cmd_diagnose(args) -> int:
    cfg = _load_config(args)
    collector = DiagnosticsCollector(checkpoints=cfg.diag_epochs,
                                     n_pairs=cfg.diag_pairs, n_bins=cfg.diag_bins)
    record = run_experiment(cfg, collector=collector)
    out_dir = cfg.out_dir or "."
    _write_reports(record, out_dir)
    write_histogram_csv(os.path.join(out_dir, "score_histogram.csv"),
                        collector.histograms)
    epochs, lo, hi = collector.minmax()
    write_minmax_csv(os.path.join(out_dir, "candidate_minmax.csv"), epochs, lo, hi)
    stat = collector.overlap()
    if stat is not None:
        write_overlap_csv(os.path.join(out_dir, "overlap.csv"), stat)
        print(f"overlap with hardest-candidate picks: {stat.overall:.4f}")
    for hist in collector.histograms:
        print(f"epoch {hist.epoch}: fraction below marker = {hist.frac_below:.4f}")
    if args.plot:
        _plot_diagnostics(collector, out_dir)
    print(f"diagnostics written to {out_dir}")
    return 0


def cmd_compare(args) -> int:
    reports = [load_report(p) for p in args.reports]
    labels = [os.path.splitext(os.path.basename(p))[0] for p in args.reports]
    result = compare_runs(reports, labels, k=args.k)
    width = max(len(l) for l in labels)
    print(f"prediction-overlap matrix at K={args.k} (row hits missed by column):")
    print(" " * (width + 2) + "  ".join(f"{l:>{width}}" for l in labels))
    for i, row in enumerate(result["per_matrix"]):
        cells = "  ".join(f"{v:>{width}.4f}" for v in row)
        print(f"{labels[i]:>{width}}  {cells}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"comparison written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ansrec",
                                     description="negative-sampling training engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a raw interaction log")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_ingest)

    for name, func, extra in (("train", cmd_train, ()),
                              ("evaluate", cmd_evaluate, ("checkpoint",)),
                              ("diagnose", cmd_diagnose, ("plot",))):
        p = sub.add_parser(name, help=f"{name} a configured run")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--sampler", choices=("rns", "dns", "ans", "hns"))
        p.add_argument("--out")
        if "checkpoint" in extra:
            p.add_argument("--checkpoint", required=True)
        if "plot" in extra:
            p.add_argument("--plot", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("compare", help="pairwise prediction overlap of reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
