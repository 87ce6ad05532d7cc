"""Evaluation of generated batches against a rule and its training set:
quantization distance, binarization, rule accuracy, memorization ratio,
nearest-training Hamming statistics, and the four-state classification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .encoding import grid_linf
from .rules import RuleSpec, verify_batch


class StateLabel(IntEnum):
    INVALID_QUANT = 0
    INVALID_RULE = 1
    VALID_NOVEL = 2
    VALID_MEMORIZED = 3


STATE_NAMES = ("invalid_quant", "invalid_rule", "valid_novel", "valid_memorized")


@dataclass(frozen=True)
class QuantConfig:
    """L-inf thresholds below which a sample counts as on-grid.

    Both must sit below half the minimum symbol spacing, otherwise binarization
    and validity would disagree.
    """

    eps_strict: float = 0.01
    eps_loose: float = 0.1

    def __post_init__(self):
        if not (0 < self.eps_strict <= self.eps_loose):
            raise ValueError("need 0 < eps_strict <= eps_loose")

    @classmethod
    def for_rule(cls, rule: RuleSpec) -> "QuantConfig":
        if rule.is_binary:
            return cls()
        return cls(eps_strict=0.01, eps_loose=0.15)


def linf_distance(x: np.ndarray, rule: RuleSpec) -> np.ndarray:
    """Max per-coordinate distance to the symbol grid; +inf flags non-finite rows."""
    return grid_linf(x, rule)


def binarize(x: np.ndarray, rule: RuleSpec,
             q: QuantConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Snap to the nearest symbols and report loose/strict on-grid validity.

    Sign ties at exactly 0 resolve to +1. Returns (samples, valid_loose,
    valid_strict).
    """
    from .encoding import decode

    samples, _ = decode(x, rule)
    dist = grid_linf(x, rule)
    return samples, dist <= q.eps_loose, dist <= q.eps_strict


def rule_accuracy(batch: np.ndarray, rule: RuleSpec) -> Tuple[float, float]:
    """(sample accuracy, constraint-level accuracy) of a discrete batch."""
    sample_ok, cons_ok = verify_batch(rule, batch)
    return float(sample_ok.mean()), float(cons_ok.mean())


def memorization_ratio(batch: np.ndarray, dataset: Dataset,
                       positional: bool = False) -> Tuple[float, float]:
    """Fractions of full samples and of groups exactly matching the training set.

    Group matching is position-agnostic by default; pass positional=True to
    require the pattern to have occurred at the same group position.
    """
    sample_hits = dataset.contains_samples(batch)
    group_hits = dataset.group_hits(batch, positional=positional)
    return float(sample_hits.mean()), float(group_hits.mean())


def nearest_hamming_distances(batch: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Per-sample Hamming distance to the nearest training sample (vectorized)."""
    batch = np.asarray(batch, dtype=np.int64)
    train = dataset.samples
    if dataset.rule.is_binary:
        # agreement count via inner product on +-1 entries
        agree = batch.astype(np.float64) @ train.astype(np.float64).T
        d = (dataset.rule.D - agree) / 2.0
        return d.min(axis=1)
    best = np.full(len(batch), np.inf)
    chunk = max(1, 10_000_000 // max(len(batch) * dataset.rule.D, 1))
    for i in range(0, len(train), chunk):
        diff = (batch[:, None, :] != train[None, i:i + chunk, :]).sum(axis=2)
        best = np.minimum(best, diff.min(axis=1))
    return best


def nearest_hamming(batch: np.ndarray, dataset: Dataset,
                    subset: str = "all",
                    sample_valid_mask: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Distance statistics to the nearest training member over a requested subset.

    subset is one of 'all', 'valid', 'valid_novel'. Empty subsets yield NaN
    statistics with defined=False rather than an error.
    """
    d = nearest_hamming_distances(batch, dataset)
    if subset == "all":
        mask = np.ones(len(d), dtype=bool)
    else:
        if sample_valid_mask is None:
            sample_valid_mask, _ = verify_batch(dataset.rule, batch)
        if subset == "valid":
            mask = sample_valid_mask
        elif subset == "valid_novel":
            mask = sample_valid_mask & (d > 0)
        else:
            raise ValueError(f"unknown subset {subset!r}")
    if not mask.any():
        return {"mean": math.nan, "median": math.nan, "min": math.nan,
                "max": math.nan, "count": 0, "defined": False}
    sel = d[mask]
    return {"mean": float(sel.mean()), "median": float(np.median(sel)),
            "min": float(sel.min()), "max": float(sel.max()),
            "count": int(mask.sum()), "defined": True}


def classify_states(raw_batch: np.ndarray, rule: RuleSpec, dataset: Dataset,
                    q: QuantConfig) -> np.ndarray:
    """Assign each raw generation exactly one of the four states.

    Precedence: off-grid beyond eps_loose (or non-finite) > rule-violating >
    memorized > novel.
    """
    samples, valid_loose, _ = binarize(raw_batch, rule, q)
    rule_ok, _ = verify_batch(rule, samples)
    mem = dataset.contains_samples(samples)
    labels = np.full(len(samples), StateLabel.VALID_NOVEL, dtype=np.int64)
    labels[mem] = StateLabel.VALID_MEMORIZED
    labels[~rule_ok] = StateLabel.INVALID_RULE
    labels[~valid_loose] = StateLabel.INVALID_QUANT
    return labels


@dataclass
class EvalSnapshot:
    """All evaluation quantities for one checkpoint of one run."""

    step: int
    sample_acc: float
    group_acc: float
    sample_mem: float
    group_mem: float
    invalid_frac: float
    invalid_frac_strict: float
    nan_frac: float
    state_labels: np.ndarray
    hamming_all: float
    hamming_valid: float
    hamming_valid_novel: float
    extra: Dict[str, float] = field(default_factory=dict)

    CSV_COLUMNS = ("step", "sample_acc", "group_acc", "sample_mem", "group_mem",
                   "invalid_frac", "invalid_frac_strict", "nan_frac",
                   "n_invalid_quant", "n_invalid_rule", "n_valid_novel", "n_valid_memorized",
                   "hamming_all", "hamming_valid", "hamming_valid_novel")

    def state_counts(self) -> np.ndarray:
        return np.bincount(self.state_labels, minlength=4)

    def to_csv_row(self) -> str:
        counts = self.state_counts()
        vals = [self.step, self.sample_acc, self.group_acc, self.sample_mem, self.group_mem,
                self.invalid_frac, self.invalid_frac_strict, self.nan_frac,
                counts[0], counts[1], counts[2], counts[3],
                self.hamming_all, self.hamming_valid, self.hamming_valid_novel]
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in vals)


def build_snapshot(step: int, raw_batch: np.ndarray, rule: RuleSpec, dataset: Dataset,
                   q: Optional[QuantConfig] = None,
                   positional_groups: bool = False) -> EvalSnapshot:
    """Evaluate one raw generation batch into an EvalSnapshot.

    Accuracy and memorization are computed on the binarized batch with
    non-finite generations excluded from the numerators (they count as invalid
    and are reported in nan_frac).
    """
    q = q or QuantConfig.for_rule(rule)
    raw_batch = np.asarray(raw_batch, dtype=np.float64)
    B = len(raw_batch)
    finite = np.isfinite(raw_batch).all(axis=1)
    samples, valid_loose, valid_strict = binarize(raw_batch, rule, q)
    rule_ok, cons_ok = verify_batch(rule, samples)
    mem = dataset.contains_samples(samples)
    rule_ok = rule_ok & finite
    mem = mem & finite
    cons_ok = cons_ok & finite[:, None]

    labels = np.full(B, StateLabel.VALID_NOVEL, dtype=np.int64)
    labels[mem] = StateLabel.VALID_MEMORIZED
    labels[~rule_ok] = StateLabel.INVALID_RULE
    labels[~valid_loose] = StateLabel.INVALID_QUANT

    group_hits = dataset.group_hits(samples, positional=positional_groups)
    group_hits = group_hits & finite[:, None]

    h_all = nearest_hamming(samples, dataset, "all")
    h_valid = nearest_hamming(samples, dataset, "valid", sample_valid_mask=rule_ok)
    h_novel = nearest_hamming(samples, dataset, "valid_novel", sample_valid_mask=rule_ok)

    return EvalSnapshot(
        step=step,
        sample_acc=float(rule_ok.mean()),
        group_acc=float(cons_ok.mean()),
        sample_mem=float(mem.mean()),
        group_mem=float(group_hits.mean()),
        invalid_frac=float((~valid_loose).mean()),
        invalid_frac_strict=float((~valid_strict).mean()),
        nan_frac=float((~finite).mean()),
        state_labels=labels,
        hamming_all=h_all["mean"],
        hamming_valid=h_valid["mean"],
        hamming_valid_novel=h_novel["mean"],
    )


def snapshots_to_csv(snapshots: Sequence[EvalSnapshot]) -> str:
    lines = [",".join(EvalSnapshot.CSV_COLUMNS)]
    lines += [s.to_csv_row() for s in snapshots]
    return "\n".join(lines) + "\n"


def raster_to_csv(snapshots: Sequence[EvalSnapshot]) -> str:
    """Checkpoint-by-seed state matrix; row = checkpoint, first column = step."""
    lines = ["step," + ",".join(f"seed{i}" for i in range(len(snapshots[0].state_labels)))]
    for s in snapshots:
        lines.append(f"{s.step}," + ",".join(str(int(v)) for v in s.state_labels))
    return "\n".join(lines) + "\n"
