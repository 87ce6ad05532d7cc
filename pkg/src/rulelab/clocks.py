"""Onset detection over checkpointed metric traces: sustained-threshold
criteria for the rule-learning and memorization times, the innovation window
between them, the adaptive memorization threshold, EMA smoothing, and the
log-log power-law fit of memorization time against dataset size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class OnsetCriterion:
    """First checkpoint starting a sustained run beyond a threshold.

    direction 'exceeds' looks for values > threshold, 'falls_below' for
    values < threshold. Smoothing, when enabled, is an EMA with half-life
    measured in checkpoints (not steps).
    """

    metric: str
    threshold: float
    direction: str = "exceeds"
    sustain_count: int = 5
    use_ema: bool = False
    ema_half_life: float = 3.0

    def __post_init__(self):
        if self.sustain_count < 1:
            raise ValueError("sustain_count must be >= 1")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.direction not in ("exceeds", "falls_below"):
            raise ValueError("direction must be 'exceeds' or 'falls_below'")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ClockReport:
    tau_rule: Optional[int]
    tau_mem: Optional[int]
    window: Tuple[Optional[int], Optional[int]]
    memorize_first: bool
    censored_rule: bool
    censored_mem: bool
    rule_criterion: dict
    mem_criterion: dict

    def to_dict(self) -> dict:
        return {
            "tau_rule": self.tau_rule,
            "tau_mem": self.tau_mem,
            "window": list(self.window),
            "memorize_first": self.memorize_first,
            "censored_rule": self.censored_rule,
            "censored_mem": self.censored_mem,
            "rule_criterion": self.rule_criterion,
            "mem_criterion": self.mem_criterion,
        }


@dataclass
class PowerLawFit:
    c: float
    alpha: float
    r2: float
    n_points: int

    def to_dict(self) -> dict:
        return {"c": self.c, "alpha": self.alpha, "r2": self.r2, "n_points": self.n_points}


def ema(values: Sequence[float], half_life: float) -> np.ndarray:
    """Exponential moving average with per-checkpoint decay; first value passes through.

    A half-life of h checkpoints means a unit step reaches 0.5 after exactly h
    observed values. half_life <= 0 is the identity.
    """
    values = np.asarray(values, dtype=np.float64)
    if half_life <= 0 or len(values) == 0:
        return values.copy()
    a = 1.0 - 2.0 ** (-1.0 / half_life)
    out = np.empty_like(values)
    out[0] = values[0]
    for i in range(1, len(values)):
        out[i] = (1.0 - a) * out[i - 1] + a * values[i]
    return out


def detect_onset(steps: Sequence[int], values: Sequence[float],
                 crit: OnsetCriterion) -> Optional[int]:
    """Step of the first checkpoint beginning a sustained threshold crossing.

    Returns None when no run of sustain_count consecutive crossings exists.
    """
    steps = np.asarray(steps)
    values = np.asarray(values, dtype=np.float64)
    if len(values) < crit.sustain_count:
        return None
    if crit.use_ema:
        values = ema(values, crit.ema_half_life)
    if crit.direction == "exceeds":
        hit = values > crit.threshold
    else:
        hit = values < crit.threshold
    run = 0
    for i, h in enumerate(hit):
        run = run + 1 if h else 0
        if run == crit.sustain_count:
            return int(steps[i - crit.sustain_count + 1])
    return None


def adaptive_mem_threshold(n: int, support_size: int) -> float:
    """Memorization threshold corrected for the chance hit rate of a perfect model.

    Equals 1.1 when the dataset exhausts the support, in which case
    memorization is undetectable.
    """
    if not (0 < n <= support_size):
        raise ValueError("need 0 < n <= support_size")
    return 0.1 + n / support_size


def innovation_window(steps: Sequence[int],
                      sample_acc: Sequence[float],
                      sample_mem: Sequence[float],
                      rule_crit: OnsetCriterion,
                      mem_crit: OnsetCriterion) -> ClockReport:
    """Detect both clocks and the window between them.

    A rule onset at or after the memorization onset is discarded (such
    accuracy is attributable to memorization) and the report flags
    memorize-first with an empty window.
    """
    tau_rule = detect_onset(steps, sample_acc, rule_crit)
    tau_mem = detect_onset(steps, sample_mem, mem_crit)
    memorize_first = False
    if tau_rule is not None and tau_mem is not None and tau_rule >= tau_mem:
        tau_rule = None
        memorize_first = True
    if tau_mem is not None and tau_rule is None:
        memorize_first = True
    window: Tuple[Optional[int], Optional[int]]
    if tau_rule is not None and tau_mem is not None:
        window = (tau_rule, tau_mem)
    else:
        window = (None, None)
    return ClockReport(
        tau_rule=tau_rule,
        tau_mem=tau_mem,
        window=window,
        memorize_first=memorize_first,
        censored_rule=tau_rule is None and not memorize_first,
        censored_mem=tau_mem is None,
        rule_criterion=rule_crit.to_dict(),
        mem_criterion=mem_crit.to_dict(),
    )


def fit_power_law(points: Sequence[Tuple[float, float]]) -> PowerLawFit:
    """Least squares on (ln N, ln tau); returns prefactor, exponent, and the
    log-log regression R^2."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (N, tau) points")
    if np.any(pts <= 0):
        raise ValueError("N and tau must be positive for a log-log fit")
    lx = np.log(pts[:, 0])
    ly = np.log(pts[:, 1])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(c=float(np.exp(intercept)), alpha=float(slope),
                       r2=float(r2), n_points=len(pts))
