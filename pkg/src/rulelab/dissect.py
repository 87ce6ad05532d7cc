"""Mechanistic analyses of a denoiser and a training trajectory: 4x4 state
transition tensors across checkpoints, per-noise-level denoising-loss spectra
on the train / held-out-valid / uniform-cube splits, 2D score-field slices
through a face of the Boolean cube, and 1D attractor-basin profiles with
bootstrap confidence bands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, heldout_valid
from .diffusion import DenoiserHandle, dsm_loss_per_sample, dsm_weight, EDMConfig
from .encoding import encode
from .metrics import StateLabel
from .rules import Family, RuleSpec, RuleError

N_STATES = 4

# Noise grid used by loss spectra: 50 log-spaced levels across the sampler range.
SPECTRUM_LEVELS = 50

# The critical band where rule learning and memorization express themselves.
CRITICAL_BAND = (0.2, 2.0)


def sigma_grid(sigma_min: float = 0.002, sigma_max: float = 80.0,
               levels: int = SPECTRUM_LEVELS) -> np.ndarray:
    """Log-spaced noise levels with exact endpoints."""
    return np.geomspace(sigma_min, sigma_max, levels)


# -- state transitions ---------------------------------------------------------------


def transition_counts(labels_t: np.ndarray, labels_t1: np.ndarray) -> np.ndarray:
    """4x4 contingency counts between the states of the same seeds at two
    consecutive checkpoints."""
    labels_t = np.asarray(labels_t)
    labels_t1 = np.asarray(labels_t1)
    if labels_t.shape != labels_t1.shape:
        raise ValueError("label arrays must align seed-by-seed")
    counts = np.zeros((N_STATES, N_STATES), dtype=np.int64)
    np.add.at(counts, (labels_t, labels_t1), 1)
    return counts


@dataclass
class TransitionTensor:
    """Per-checkpoint transition counts; entry i holds steps[i] -> steps[i+1]."""

    steps: List[int]
    counts: np.ndarray  # (T-1, 4, 4)

    @classmethod
    def from_labels(cls, steps: Sequence[int], labels: Sequence[np.ndarray]) -> "TransitionTensor":
        if len(steps) != len(labels):
            raise ValueError("one label vector per checkpoint required")
        mats = [transition_counts(labels[i], labels[i + 1]) for i in range(len(labels) - 1)]
        return cls(steps=list(steps), counts=np.stack(mats) if mats else
                   np.zeros((0, N_STATES, N_STATES), dtype=np.int64))

    def aggregate(self, window: Tuple[int, int]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Sum counts whose source checkpoint falls inside [start, end].

        Returns (counts, row_normalized, defined_rows); rows with zero
        occupancy are flagged undefined and left as zeros.
        """
        start, end = window
        sel = [i for i in range(len(self.counts)) if start <= self.steps[i] <= end]
        if not sel:
            raise ValueError(f"window {window} selects no transitions")
        total = self.counts[sel].sum(axis=0)
        row_sums = total.sum(axis=1, keepdims=True)
        defined = row_sums[:, 0] > 0
        norm = np.divide(total, row_sums, out=np.zeros_like(total, dtype=np.float64),
                         where=row_sums > 0)
        return total, norm, defined


def aggregate_transitions(tensor: TransitionTensor, window: Tuple[int, int]):
    return tensor.aggregate(window)


# -- loss spectra ----------------------------------------------------------------------


@dataclass
class SpectrumMatrix:
    """Mean denoising loss per (split, noise level), with Monte Carlo standard
    errors, for one checkpoint."""

    sigmas: np.ndarray
    splits: Tuple[str, ...]
    mean: np.ndarray  # (n_splits, n_sigmas)
    se: np.ndarray    # (n_splits, n_sigmas)
    step: int = 0
    repeats: int = 8
    weighted: bool = False
    cube_seed: int = 0

    def band_mask(self, lo: float = CRITICAL_BAND[0], hi: float = CRITICAL_BAND[1]) -> np.ndarray:
        return (self.sigmas >= lo) & (self.sigmas <= hi)

    def to_rows(self) -> List[Tuple[str, float, int, float, float]]:
        rows = []
        for si, split in enumerate(self.splits):
            for gi, s in enumerate(self.sigmas):
                rows.append((split, float(s), self.step,
                             float(self.mean[si, gi]), float(self.se[si, gi])))
        return rows


def dsm_spectrum(denoiser: DenoiserHandle,
                 splits: Dict[str, np.ndarray],
                 sigmas: Optional[np.ndarray] = None,
                 repeats: int = 8,
                 weighted: bool = False,
                 noise_seed: int = 0,
                 step: int = 0,
                 edm: Optional[EDMConfig] = None) -> SpectrumMatrix:
    """Per-noise-level mean loss for each split, averaged over `repeats` draws.

    Noise is seeded per (level, repeat) and shared across splits, so split
    differences at one level are not Monte Carlo artifacts of distinct noise.
    Splits map names to encoded real matrices; empty splits are rejected.
    """
    if sigmas is None:
        sigmas = sigma_grid()
    names = tuple(splits.keys())
    mats = [np.asarray(splits[k], dtype=np.float64) for k in names]
    if any(len(m) == 0 for m in mats):
        raise ValueError("all splits must be nonempty")
    dim = mats[0].shape[1]
    max_n = max(len(m) for m in mats)
    mean = np.zeros((len(names), len(sigmas)))
    se = np.zeros_like(mean)
    for gi, s in enumerate(sigmas):
        per_split: List[List[np.ndarray]] = [[] for _ in names]
        for r in range(repeats):
            noise_rng = np.random.default_rng(
                np.random.SeedSequence(entropy=noise_seed, spawn_key=(gi, r)))
            z = noise_rng.standard_normal((max_n, dim))
            for si, m in enumerate(mats):
                vals = dsm_loss_per_sample(denoiser, m, float(s), z[:len(m)])
                per_split[si].append(vals)
        for si in range(len(names)):
            stack = np.stack(per_split[si])  # (repeats, n_samples)
            if weighted:
                stack = stack * dsm_weight(s, edm or EDMConfig())
            mean[si, gi] = stack.mean()
            # repeats of one sample share its clean vector, so the split-level
            # uncertainty is driven by the per-sample means
            sample_means = stack.mean(axis=0)
            if len(sample_means) > 1:
                se[si, gi] = sample_means.std(ddof=1) / math.sqrt(len(sample_means))
            elif stack.shape[0] > 1:
                se[si, gi] = stack.std(ddof=1) / math.sqrt(stack.size)
            else:
                se[si, gi] = 0.0
    return SpectrumMatrix(sigmas=np.asarray(sigmas, dtype=np.float64), splits=names,
                          mean=mean, se=se, step=step, repeats=repeats,
                          weighted=weighted, cube_seed=noise_seed)


def standard_splits(dataset: Dataset, heldout_count: Optional[int] = None,
                    cube_count: Optional[int] = None, seed: int = 0) -> Dict[str, np.ndarray]:
    """The three evaluation splits in encoded space: the training set, held-out
    rule-valid samples absent from it, and fresh uniform samples on the
    discrete cube (seed recorded by the caller)."""
    rule = dataset.rule
    n = dataset.n
    heldout_count = heldout_count or n
    cube_count = cube_count or n
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(17,)))
    if rule.is_binary:
        cube = rng.integers(0, 2, size=(cube_count, rule.D)) * 2 - 1
    else:
        cube = rng.integers(0, rule.n, size=(cube_count, rule.D))
    held = heldout_valid(dataset, heldout_count, seed=seed + 1)
    out = {"train": encode(dataset.samples, rule)}
    if len(held):
        out["heldout_valid"] = encode(held, rule)
    out["uniform_cube"] = encode(cube, rule)
    return out


def spectra_to_csv(spectra: Sequence[SpectrumMatrix]) -> str:
    lines = ["split,sigma,step,loss,se"]
    for sp in spectra:
        for split, s, step, m, e in sp.to_rows():
            lines.append(f"{split},{s!r},{step},{m!r},{e!r}")
    return "\n".join(lines) + "\n"


# -- plane slices ------------------------------------------------------------------------


@dataclass
class PlaneSpec:
    """2D affine slice through a cube face anchored at a training sample.

    anchor_a is the base sample; anchor_b flips bits 0 and 1 (a valid
    neighbor when both bits share a parity group); anchor_c flips bit 0 and
    anchor_d flips bit 1 (both rule-violating). basis rows are the
    orthonormalized span of (b - a, c - a); plane coordinates measure lengths,
    so the anchors sit at (0,0), (2*sqrt2,0), (sqrt2,+sqrt2), (sqrt2,-sqrt2).
    """

    anchor_a: np.ndarray
    anchor_b: np.ndarray
    anchor_c: np.ndarray
    anchor_d: np.ndarray
    basis: np.ndarray          # (2, D), orthonormal
    alphas: np.ndarray
    betas: np.ndarray

    def embed(self, alpha, beta) -> np.ndarray:
        return (self.anchor_a[None, :]
                + np.atleast_1d(alpha)[:, None] * self.basis[0]
                + np.atleast_1d(beta)[:, None] * self.basis[1])

    def grid_points(self) -> np.ndarray:
        """Row-major grid: index [i, j] maps to (alphas[i], betas[j])."""
        A, B = np.meshgrid(self.alphas, self.betas, indexing="ij")
        return self.embed(A.ravel(), B.ravel())

    def anchor_coords(self) -> np.ndarray:
        pts = np.stack([self.anchor_a, self.anchor_b, self.anchor_c, self.anchor_d])
        return (pts - self.anchor_a) @ self.basis.T

    def to_dict(self) -> dict:
        return {
            "anchor_a": self.anchor_a.tolist(),
            "basis": self.basis.tolist(),
            "alpha_range": [float(self.alphas[0]), float(self.alphas[-1])],
            "beta_range": [float(self.betas[0]), float(self.betas[-1])],
            "grid": [len(self.alphas), len(self.betas)],
        }


def build_plane(x_a: np.ndarray, rule: RuleSpec,
                grid_size: int = 50,
                coord_range: Tuple[float, float] = (-1.75, 3.75)) -> PlaneSpec:
    """Construct the standard slice through a valid sample and its bit-0/bit-1
    neighbors. Bits 0 and 1 must lie in the same parity group so that the
    double flip stays valid and the single flips are invalid."""
    from .rules import verify

    x_a = np.asarray(x_a, dtype=np.float64)
    if rule.family is not Family.GROUP_PARITY:
        raise RuleError("plane slices are defined for the parity family")
    if rule.G < 2:
        raise RuleError("need group size >= 2 so bits 0 and 1 share a group")
    if not verify(rule, x_a.astype(np.int64)).sample_valid:
        raise RuleError("anchor sample must be rule-valid")
    x_b = x_a.copy()
    x_b[[0, 1]] *= -1
    x_c = x_a.copy()
    x_c[0] *= -1
    x_d = x_a.copy()
    x_d[1] *= -1
    v_ab = x_b - x_a
    v_ac = x_c - x_a
    e1 = v_ab / np.linalg.norm(v_ab)
    v2 = v_ac - (v_ac @ e1) * e1
    e2 = v2 / np.linalg.norm(v2)
    coords = np.linspace(coord_range[0], coord_range[1], grid_size)
    return PlaneSpec(anchor_a=x_a, anchor_b=x_b, anchor_c=x_c, anchor_d=x_d,
                     basis=np.stack([e1, e2]), alphas=coords, betas=coords.copy())


def field_slice(denoiser: DenoiserHandle, plane: PlaneSpec,
                sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate the denoiser over the plane grid.

    Returns (score_magnitude, projected_velocity), both (n_alpha, n_beta) in
    row-major (alpha, beta) order. Score magnitude is the l2 norm of the
    full-dimensional score; projected velocity is the signed scalar projection
    of the denoiser output onto the unit a-to-b direction, so values near
    -sqrt2 mean attraction to the base anchor, +sqrt2 to its valid neighbor,
    and 0 to the invalid corners.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    pts = plane.grid_points()
    den = denoiser.denoise(pts, sigma)
    score = (den - pts) / sigma ** 2
    shape = (len(plane.alphas), len(plane.betas))
    mag = np.linalg.norm(score, axis=1).reshape(shape)
    proj = (den @ plane.basis[0]).reshape(shape)
    return mag, proj


# -- basin profiles ---------------------------------------------------------------------


@dataclass
class BasinProfile:
    """Averaged denoiser response along 1D probes out of training anchors."""

    direction: str
    sigma: float
    t_grid: np.ndarray
    exact_match: np.ndarray        # mean over anchors, per t
    exact_match_lo: np.ndarray
    exact_match_hi: np.ndarray
    hamming: np.ndarray
    hamming_lo: np.ndarray
    hamming_hi: np.ndarray
    l2_from_start: np.ndarray
    l2_lo: np.ndarray
    l2_hi: np.ndarray
    n_anchors: int
    skipped_anchors: int

    def to_csv(self) -> str:
        lines = ["direction,sigma,t,metric,mean,lo,hi"]
        for name, m, lo, hi in (
            ("exact_match", self.exact_match, self.exact_match_lo, self.exact_match_hi),
            ("hamming", self.hamming, self.hamming_lo, self.hamming_hi),
            ("l2_from_start", self.l2_from_start, self.l2_lo, self.l2_hi),
        ):
            for i, t in enumerate(self.t_grid):
                lines.append(f"{self.direction},{float(self.sigma)!r},{float(t)!r},{name},"
                             f"{float(m[i])!r},{float(lo[i])!r},{float(hi[i])!r}")
        return "\n".join(lines) + "\n"


DIRECTIONS = ("hamming1_invalid", "hamming2_valid_novel", "nearest_other_train")


def _probe_endpoint(anchor: np.ndarray, direction: str, rule: RuleSpec,
                    dataset: Dataset) -> Optional[np.ndarray]:
    if direction == "hamming1_invalid":
        end = anchor.copy()
        end[0] *= -1
        return end
    if direction == "hamming2_valid_novel":
        for idx in rule.group_indices():
            for a in range(len(idx)):
                for b in range(a + 1, len(idx)):
                    cand = anchor.copy()
                    cand[[idx[a], idx[b]]] *= -1
                    if not dataset.contains_sample(cand.astype(np.int64)):
                        return cand
        return None
    if direction == "nearest_other_train":
        others = dataset.samples[~(dataset.samples == anchor.astype(np.int64)).all(axis=1)]
        if len(others) == 0:
            return None
        d = (others != anchor.astype(np.int64)).sum(axis=1)
        return others[int(np.argmin(d))].astype(np.float64)
    raise ValueError(f"unknown direction {direction!r}")


def basin_profile(denoiser: DenoiserHandle, dataset: Dataset, direction: str,
                  sigma: float = 0.5, n_anchors: int = 30,
                  t_points: int = 150, t_range: Tuple[float, float] = (-0.5, 2.0),
                  bootstrap: int = 2000, bootstrap_seed: int = 0) -> BasinProfile:
    """Probe the basin around training anchors along a fixed direction.

    Anchors are the first n_anchors dataset samples in stored order. For each
    anchor and interpolation position t, the denoiser output is reduced to
    whether every binarized bit still matches the anchor, how many bits
    disagree, and how far the output moved. Confidence bands are the 5th-95th
    percentile of the bootstrap distribution of the anchor mean.
    """
    rule = dataset.rule
    if not rule.is_binary:
        raise RuleError("basin profiles are defined for binary rules")
    anchors = dataset.samples[:n_anchors].astype(np.float64)
    t_grid = np.linspace(t_range[0], t_range[1], t_points)
    per_anchor_exact = []
    per_anchor_ham = []
    per_anchor_l2 = []
    skipped = 0
    for anchor in anchors:
        end = _probe_endpoint(anchor, direction, rule, dataset)
        if end is None:
            skipped += 1
            continue
        line = anchor[None, :] + t_grid[:, None] * (end - anchor)[None, :]
        den = denoiser.denoise(line, sigma)
        signs = np.where(den >= 0, 1.0, -1.0)
        mism = signs != anchor[None, :]
        per_anchor_exact.append((~mism.any(axis=1)).astype(np.float64))
        per_anchor_ham.append(mism.sum(axis=1).astype(np.float64))
        per_anchor_l2.append(np.linalg.norm(den - anchor[None, :], axis=1))
    if not per_anchor_exact:
        raise RuleError(f"no usable anchors for direction {direction!r}")
    ex = np.stack(per_anchor_exact)
    ham = np.stack(per_anchor_ham)
    l2 = np.stack(per_anchor_l2)

    rng = np.random.default_rng(bootstrap_seed)
    idx = rng.integers(0, len(ex), size=(bootstrap, len(ex)))

    def band(mat: np.ndarray):
        boot_means = mat[idx].mean(axis=1)  # (bootstrap, T)
        lo = np.percentile(boot_means, 5, axis=0)
        hi = np.percentile(boot_means, 95, axis=0)
        return mat.mean(axis=0), lo, hi

    ex_m, ex_lo, ex_hi = band(ex)
    ham_m, ham_lo, ham_hi = band(ham)
    l2_m, l2_lo, l2_hi = band(l2)
    return BasinProfile(direction=direction, sigma=sigma, t_grid=t_grid,
                        exact_match=ex_m, exact_match_lo=ex_lo, exact_match_hi=ex_hi,
                        hamming=ham_m, hamming_lo=ham_lo, hamming_hi=ham_hi,
                        l2_from_start=l2_m, l2_lo=l2_lo, l2_hi=l2_hi,
                        n_anchors=len(ex), skipped_anchors=skipped)
