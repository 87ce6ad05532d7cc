"""Mapping between discrete samples and the real vectors the denoisers operate on."""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .rules import Encoding, RuleSpec

# Nearest-symbol snap distances beyond which a decode is flagged ambiguous.
AMBIG_EPS_BINARY = 0.1
AMBIG_EPS_CATEGORICAL = 0.15


def symbol_grid(rule: RuleSpec) -> np.ndarray:
    """Real values the scalar encoding assigns to each symbol."""
    if rule.is_binary:
        return np.array([-1.0, 1.0])
    n = rule.n
    return -1.0 + 2.0 * np.arange(n) / (n - 1)


def encoded_dim(rule: RuleSpec) -> int:
    if rule.encoding is Encoding.SCALAR:
        return rule.D
    return rule.D * rule.n


def encode(samples: np.ndarray, rule: RuleSpec) -> np.ndarray:
    """Encode discrete samples (..., D) to real vectors under the rule's encoding."""
    samples = np.asarray(samples)
    if rule.is_binary:
        return samples.astype(np.float64)
    if rule.encoding is Encoding.SCALAR:
        return symbol_grid(rule)[samples]
    onehot = np.eye(rule.n)[samples]  # (..., D, n)
    if rule.encoding is Encoding.ONE_HOT_ZERO_MEAN:
        onehot = onehot - 1.0 / rule.n
    return onehot.reshape(*samples.shape[:-1], rule.D * rule.n)


def decode(vectors: np.ndarray, rule: RuleSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Snap real vectors back to discrete samples.

    Returns (samples, ambiguous) where ambiguous marks samples whose nearest
    symbol lies farther than the family's snap threshold (0.1 binary, 0.15
    categorical) or that contain non-finite entries. Ambiguity is a flag,
    never an error.
    """
    v = np.asarray(vectors, dtype=np.float64)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[None, :]
    bad = ~np.isfinite(v).all(axis=1)
    vf = np.where(np.isfinite(v), v, 0.0)
    if rule.is_binary:
        out = np.where(vf >= 0, 1, -1).astype(np.int64)
        dist = np.abs(np.abs(vf) - 1.0).max(axis=1)
        ambiguous = bad | (dist > AMBIG_EPS_BINARY)
    elif rule.encoding is Encoding.SCALAR:
        grid = symbol_grid(rule)
        d = np.abs(vf[..., None] - grid)  # (B, D, n)
        out = d.argmin(axis=-1).astype(np.int64)
        dist = d.min(axis=-1).max(axis=1)
        ambiguous = bad | (dist > AMBIG_EPS_CATEGORICAL)
    else:
        B = v.shape[0]
        cells = vf.reshape(B, rule.D, rule.n)
        if rule.encoding is Encoding.ONE_HOT_ZERO_MEAN:
            cells = cells + 1.0 / rule.n
        out = cells.argmax(axis=-1).astype(np.int64)
        snapped = np.eye(rule.n)[out]
        dist = np.abs(cells - snapped).max(axis=(1, 2))
        ambiguous = bad | (dist > AMBIG_EPS_CATEGORICAL)
    if squeeze:
        return out[0], ambiguous[0]
    return out, ambiguous


def grid_linf(vectors: np.ndarray, rule: RuleSpec) -> np.ndarray:
    """Per-sample max distance to the nearest symbol value; +inf for non-finite rows.

    For binary families this is max_i | |x_i| - 1 |; for categorical scalar the
    max nearest-grid distance. One-hot encodings measure in indicator space.
    """
    v = np.asarray(vectors, dtype=np.float64)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[None, :]
    bad = ~np.isfinite(v).all(axis=1)
    vf = np.where(np.isfinite(v), v, 0.0)
    if rule.is_binary:
        dist = np.abs(np.abs(vf) - 1.0).max(axis=1)
    elif rule.encoding is Encoding.SCALAR:
        grid = symbol_grid(rule)
        dist = np.abs(vf[..., None] - grid).min(axis=-1).max(axis=1)
    else:
        cells = vf.reshape(v.shape[0], rule.D, rule.n)
        if rule.encoding is Encoding.ONE_HOT_ZERO_MEAN:
            cells = cells + 1.0 / rule.n
        snapped = np.eye(rule.n)[cells.argmax(axis=-1)]
        dist = np.abs(cells - snapped).max(axis=(1, 2))
    dist = np.where(bad, np.inf, dist)
    return dist[0] if squeeze else dist
