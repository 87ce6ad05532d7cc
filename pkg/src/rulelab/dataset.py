"""Finite training sets of unique rule-valid samples, with exact-match indices
for sample- and group-level memorization lookups, analytic and Monte Carlo
memorization baselines, and the on-disk dataset format (JSON header line +
one CSV row of symbols per sample).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Set

import numpy as np

from .rules import (RuleSpec, count_valid, sample_valid,
                    sample_valid_batch, verify_batch)

DATASET_FORMAT_VERSION = 1

# Generation gives up after this many rejection draws (duplicates included).
MAX_REJECTION_DRAWS = 10_000_000

# Default Monte Carlo size for the empirical group-level baselines.
GROUP_BASELINE_MC = 100_000


class DatasetError(ValueError):
    pass


@dataclass
class Dataset:
    rule: RuleSpec
    samples: np.ndarray  # (N, D) int64, unique, all rule-valid
    seed: int

    def __post_init__(self):
        self._sample_index: Set[bytes] = set()
        self._groups = self.rule.group_indices()
        for row in self.samples:
            self._sample_index.add(row.tobytes())
        codes = self._group_codes(self.samples)
        self._all_group_codes = np.unique(codes)
        self._codes_at_position = [np.unique(codes[:, p])
                                   for p in range(codes.shape[1])]

    def _group_codes(self, batch: np.ndarray) -> np.ndarray:
        """Integer code per (sample, group); groups are small enough that the
        mixed-radix code fits in int64."""
        batch = np.asarray(batch, dtype=np.int64)
        base = self.rule.alphabet_size
        codes = np.empty((len(batch), len(self._groups)), dtype=np.int64)
        for p, idx in enumerate(self._groups):
            sub = batch[:, idx]
            if self.rule.is_binary:
                sub = (sub + 1) // 2
            weights = base ** np.arange(len(idx), dtype=np.int64)
            codes[:, p] = sub @ weights
        return codes

    @property
    def n(self) -> int:
        return len(self.samples)

    def contains_sample(self, row: np.ndarray) -> bool:
        return np.ascontiguousarray(row, dtype=np.int64).tobytes() in self._sample_index

    def contains_samples(self, batch: np.ndarray) -> np.ndarray:
        batch = np.ascontiguousarray(batch, dtype=np.int64)
        return np.array([r.tobytes() in self._sample_index for r in batch], dtype=bool)

    def group_hits(self, batch: np.ndarray, positional: bool = False) -> np.ndarray:
        """Boolean (B, num_groups) matrix of group patterns present in training.

        positional=True restricts a match to groups seen at the same position.
        """
        codes = self._group_codes(np.atleast_2d(batch))
        if not positional:
            return np.isin(codes, self._all_group_codes)
        hits = np.zeros_like(codes, dtype=bool)
        for p in range(codes.shape[1]):
            hits[:, p] = np.isin(codes[:, p], self._codes_at_position[p])
        return hits

    # -- persistence -------------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        header = {
            "format_version": DATASET_FORMAT_VERSION,
            "rule": self.rule.to_dict(),
            "n": self.n,
            "seed": self.seed,
        }
        lines = [json.dumps(header, sort_keys=True)]
        lines += [",".join(str(int(v)) for v in row) for row in self.samples]
        path.write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Dataset":
        lines = Path(path).read_text().strip().split("\n")
        header = json.loads(lines[0])
        if header.get("format_version") != DATASET_FORMAT_VERSION:
            raise DatasetError(f"unsupported dataset format: {header.get('format_version')}")
        rule = RuleSpec.from_dict(header["rule"])
        rows = [[int(v) for v in line.split(",")] for line in lines[1:]]
        samples = np.array(rows, dtype=np.int64)
        if len(samples) != header["n"]:
            raise DatasetError(f"expected {header['n']} rows, found {len(samples)}")
        return cls(rule=rule, samples=samples, seed=header["seed"])


def generate_dataset(rule: RuleSpec, n: int, seed: int) -> Dataset:
    """N unique valid samples by rejection sampling; deterministic given the seed."""
    support = count_valid(rule)
    if n > support:
        raise DatasetError(f"requested {n} unique samples but the valid set has only {support}")
    rng = np.random.default_rng(seed)
    seen: Set[bytes] = set()
    rows = []
    draws = 0
    while len(rows) < n:
        if draws >= MAX_REJECTION_DRAWS:
            raise DatasetError(
                f"rejection sampling stalled after {draws} draws ({len(rows)}/{n} unique)")
        s = np.ascontiguousarray(sample_valid(rule, rng), dtype=np.int64)
        draws += 1
        key = s.tobytes()
        if key in seen:
            continue
        seen.add(key)
        rows.append(s)
    return Dataset(rule=rule, samples=np.stack(rows), seed=seed)


@dataclass
class BaselineSet:
    """Reference memorization/accuracy levels for a dataset of size N.

    Sample-level baselines are closed-form; group-level ones are Monte Carlo
    estimates (the exact value depends on which group patterns the dataset
    happens to contain). The rough closed-form group reference
    min(2^(G-1), N*D/G) / 2^(G-1) is exposed alongside for comparison.
    """

    sample_mem_ground_truth: float
    sample_mem_boolean_cube: float
    group_mem_ground_truth: float
    group_mem_boolean_cube: float
    chance_sample_acc: float
    chance_group_acc: float
    group_mem_reference_formula: Optional[float] = None
    mc_draws: int = GROUP_BASELINE_MC
    mc_seed: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _chance_group_acc(rule: RuleSpec) -> float:
    """Probability that a uniform random block satisfies its per-block constraint."""
    from .rules import Family

    fam = rule.family
    if fam is Family.GROUP_PARITY:
        return 0.5
    if fam is Family.EXACT_K:
        return math.comb(rule.D, rule.K) / 2 ** rule.D
    if fam is Family.ROW_K:
        return math.comb(rule.n, rule.K) / 2 ** rule.n
    if fam in (Family.ROW_VARIABLE_K, Family.GLOBAL_K):
        return sum(math.comb(rule.n, k) for k in rule.kset) / 2 ** rule.n
    # categorical rows: probability a uniform row is a permutation
    return math.factorial(rule.n) / rule.n ** rule.n


def memorization_baselines(rule: RuleSpec, n: int, dataset: Dataset,
                           mc_draws: int = GROUP_BASELINE_MC,
                           mc_seed: int = 0) -> BaselineSet:
    support = count_valid(rule)
    alphabet = rule.alphabet_size
    cube_size = float(alphabet) ** rule.D
    groups = rule.group_indices()

    rng = np.random.default_rng(mc_seed)
    gt_hits = 0
    cube_hits = 0
    gt_total = 0
    cube_total = 0
    batch = 20_000
    done = 0
    while done < mc_draws:
        b = min(batch, mc_draws - done)
        gt = sample_valid_batch(rule, rng, b)
        if rule.is_binary:
            cube = rng.integers(0, 2, size=(b, rule.D)) * 2 - 1
        else:
            cube = rng.integers(0, rule.n, size=(b, rule.D))
        gt_hits += int(dataset.group_hits(gt).sum())
        cube_hits += int(dataset.group_hits(cube).sum())
        gt_total += b * len(groups)
        cube_total += b * len(groups)
        done += b

    G_eff = len(groups[0])
    if rule.is_binary and rule.family.value == "parity":
        per_group_support = 2 ** (rule.G - 1)
        ref = min(per_group_support, n * rule.D / rule.G) / per_group_support
    else:
        ref = None

    return BaselineSet(
        sample_mem_ground_truth=n / support,
        sample_mem_boolean_cube=n / cube_size,
        group_mem_ground_truth=gt_hits / gt_total,
        group_mem_boolean_cube=cube_hits / cube_total,
        chance_sample_acc=support / cube_size,
        chance_group_acc=_chance_group_acc(rule),
        group_mem_reference_formula=ref,
        mc_draws=mc_draws,
        mc_seed=mc_seed,
    )


def heldout_valid(dataset: Dataset, count: int, seed: int,
                  max_draws: int = MAX_REJECTION_DRAWS) -> np.ndarray:
    """Rule-valid samples absent from the training set (the valid-novel split).

    Returns up to `count` unique samples; fewer if the support outside the
    training set is smaller than requested.
    """
    rule = dataset.rule
    available = count_valid(rule) - dataset.n
    target = min(count, max(available, 0))
    out: list = []
    seen: Set[bytes] = set()
    rng = np.random.default_rng(seed)
    draws = 0
    while len(out) < target and draws < max_draws:
        s = np.ascontiguousarray(sample_valid(rule, rng), dtype=np.int64)
        draws += 1
        key = s.tobytes()
        if key in seen or dataset.contains_sample(s):
            continue
        seen.add(key)
        out.append(s)
    if not out:
        return np.empty((0, rule.D), dtype=np.int64)
    return np.stack(out)
