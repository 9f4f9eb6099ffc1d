"""Run configuration: defaults, validation, and JSON round-trip."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

SAMPLERS = ("rns", "dns", "ans", "hns")
PROTOCOLS = ("timestamp_cut", "random")


@dataclass
class RunConfig:
    """Everything a run needs besides the interaction data itself.

    Defaults follow the common protocol for this model family: 64-dim
    embeddings, Adam at 0.001, batches of 2048, weight decay 1e-4, and
    early stopping on validation NDCG@20 with patience 10.
    """

    # data
    data_path: str | None = None
    has_timestamp: bool = True
    protocol: str = "timestamp_cut"
    cutoff: int | None = None
    val_fraction: float = 0.1
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    # sampler and objective
    sampler: str = "ans"
    M: int = 8
    epsilon: float = 0.5
    gamma: float = 0.1
    noise_high: float = 0.1
    mag_clamp: float = 1e-8
    freeze_gates: bool = False
    # optimization
    d: int = 64
    lr: float = 0.001
    batch_size: int = 2048
    l2_reg: float = 1e-4
    max_epochs: int = 200
    patience: int = 10
    # evaluation and bookkeeping
    eval_ks: tuple[int, ...] = (10, 15, 20)
    seed: int = 0
    out_dir: str | None = None
    diag_epochs: tuple[int, ...] = (0, 30, 50)
    diag_pairs: int = 100_000
    diag_bins: int = 50

    def __post_init__(self):
        self.ratios = tuple(self.ratios)
        self.eval_ks = tuple(int(k) for k in self.eval_ks)
        self.diag_epochs = tuple(int(e) for e in self.diag_epochs)
        self.validate()

    def validate(self) -> None:
        checks = [
            (self.sampler in SAMPLERS, f"sampler must be one of {SAMPLERS}"),
            (self.protocol in PROTOCOLS, f"protocol must be one of {PROTOCOLS}"),
            (self.M >= 1, "M must be at least 1"),
            (0.0 <= self.epsilon <= 1.0, "epsilon must be in [0, 1]"),
            (self.gamma >= 0.0, "gamma must be non-negative"),
            (self.noise_high >= 0.0, "noise_high must be non-negative"),
            (self.mag_clamp > 0.0, "mag_clamp must be positive"),
            (self.d >= 1, "d must be at least 1"),
            (self.lr >= 0.0, "lr must be non-negative"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.l2_reg >= 0.0, "l2_reg must be non-negative"),
            (self.max_epochs >= 1, "max_epochs must be at least 1"),
            (self.patience >= 0, "patience must be non-negative"),
            (len(self.eval_ks) > 0 and min(self.eval_ks) >= 1, "eval_ks must be positive"),
            (0.0 <= self.val_fraction < 1.0, "val_fraction must be in [0, 1)"),
            (self.diag_pairs >= 1, "diag_pairs must be positive"),
            (self.diag_bins >= 1, "diag_bins must be positive"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"bad config: {msg}")
        if self.protocol == "timestamp_cut" and self.data_path is not None \
                and self.cutoff is None:
            raise ValueError("bad config: timestamp_cut protocol needs a cutoff")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratios"] = list(self.ratios)
        d["eval_ks"] = list(self.eval_ks)
        d["diag_epochs"] = list(self.diag_epochs)
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
