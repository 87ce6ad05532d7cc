"""Continuous-noise diffusion machinery against an abstract denoiser contract:
preconditioning coefficients, log-normal noise-level sampling, the warped
noise schedule, the second-order deterministic probability-flow sampler, and
the denoiser-to-score conversion.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Tuple

import numpy as np


@dataclass(frozen=True)
class EDMConfig:
    sigma_data: float = 1.0
    p_mean: float = -1.2
    p_std: float = 1.2
    sigma_min: float = 0.002
    sigma_max: float = 80.0

    def __post_init__(self):
        if self.sigma_data <= 0:
            raise ValueError("sigma_data must be positive")
        if not (0 < self.sigma_min < self.sigma_max):
            raise ValueError("need 0 < sigma_min < sigma_max")

    def to_dict(self) -> dict:
        return {"sigma_data": self.sigma_data, "p_mean": self.p_mean, "p_std": self.p_std,
                "sigma_min": self.sigma_min, "sigma_max": self.sigma_max}


class DenoiserHandle(Protocol):
    """Evaluation contract: denoise(x, sigma) -> clean-sample estimate, same shape.

    Implementations must be safe for concurrent read-only evaluation and return
    finite output for finite input with sigma in [sigma_min, sigma_max].
    exact_score marks analytic models whose score is exact rather than learned.
    """

    exact_score: bool

    def denoise(self, x: np.ndarray, sigma: float) -> np.ndarray:
        ...


def precond_coeffs(sigma, cfg: EDMConfig):
    """c_skip, c_out, c_in, c_noise for a noise level (scalar or array)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    sd2 = cfg.sigma_data ** 2
    denom = sigma ** 2 + sd2
    c_skip = sd2 / denom
    c_out = sigma * cfg.sigma_data / np.sqrt(denom)
    c_in = 1.0 / np.sqrt(denom)
    c_noise = np.log(sigma) / 4.0
    return c_skip, c_out, c_in, c_noise


def precondition(raw_net: Callable[[np.ndarray, np.ndarray], np.ndarray],
                 x: np.ndarray, sigma, cfg: EDMConfig) -> np.ndarray:
    """Wrap a raw network into a denoiser: c_skip*x + c_out*F(c_in*x, c_noise)."""
    c_skip, c_out, c_in, c_noise = precond_coeffs(sigma, cfg)
    c_skip, c_out, c_in = (np.atleast_1d(c)[..., None] if np.ndim(x) > 1 else c
                           for c in (c_skip, c_out, c_in))
    return c_skip * x + c_out * raw_net(c_in * x, np.atleast_1d(c_noise))


def sample_sigma(rng: np.random.Generator, cfg: EDMConfig, size=None) -> np.ndarray:
    """Log-normal noise levels, clamped into [sigma_min, sigma_max]."""
    s = np.exp(rng.normal(cfg.p_mean, cfg.p_std, size=size))
    return np.clip(s, cfg.sigma_min, cfg.sigma_max)


def dsm_weight(sigma, cfg: EDMConfig):
    sigma = np.asarray(sigma, dtype=np.float64)
    return (sigma ** 2 + cfg.sigma_data ** 2) / (sigma * cfg.sigma_data) ** 2


def dsm_loss(denoiser: DenoiserHandle, batch: np.ndarray, sigma: float,
             rng: np.random.Generator, weighted: bool = False,
             cfg: Optional[EDMConfig] = None,
             noise: Optional[np.ndarray] = None) -> float:
    """Mean squared denoising error at one noise level, fresh noise per element.

    The squared error is summed over coordinates and averaged over the batch;
    weighted=True multiplies by the standard loss weight.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    if noise is None:
        noise = rng.standard_normal(batch.shape)
    noisy = batch + sigma * noise
    err = denoiser.denoise(noisy, sigma) - batch
    loss = float(np.mean(np.sum(err * err, axis=1)))
    if weighted:
        loss *= float(dsm_weight(sigma, cfg or EDMConfig()))
    return loss


def dsm_loss_per_sample(denoiser: DenoiserHandle, batch: np.ndarray, sigma: float,
                        noise: np.ndarray) -> np.ndarray:
    """Per-sample unweighted squared denoising errors for given noise draws."""
    noisy = batch + sigma * noise
    err = denoiser.denoise(noisy, sigma) - batch
    return np.sum(err * err, axis=1)


@dataclass(frozen=True)
class NoiseSchedule:
    """Descending noise grid with a terminal zero; sigmas has length steps+1."""

    sigmas: np.ndarray
    rho: float = 7.0

    @property
    def steps(self) -> int:
        return len(self.sigmas) - 1

    def to_dict(self) -> dict:
        return {"steps": self.steps, "rho": self.rho,
                "sigma_max": float(self.sigmas[0]), "sigma_min": float(self.sigmas[-2])}


def karras_schedule(cfg: EDMConfig, steps: int = 35, rho: float = 7.0) -> NoiseSchedule:
    """Warped interpolation from sigma_max down to sigma_min, then a terminal 0.

    Endpoints are forced bit-exact; the float round trip through the 1/rho
    power would otherwise perturb them in the last ulp.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1:
        sigmas = np.array([cfg.sigma_max, 0.0])
        return NoiseSchedule(sigmas=sigmas, rho=rho)
    i = np.arange(steps, dtype=np.float64)
    inv = 1.0 / rho
    s = (cfg.sigma_max ** inv + i / (steps - 1) * (cfg.sigma_min ** inv - cfg.sigma_max ** inv)) ** rho
    s[0] = cfg.sigma_max
    s[-1] = cfg.sigma_min
    sigmas = np.concatenate([s, [0.0]])
    return NoiseSchedule(sigmas=sigmas, rho=rho)


def heun_sample(denoiser: DenoiserHandle, z0: np.ndarray, schedule: NoiseSchedule,
                return_first_bad_step: bool = False):
    """Integrate the probability-flow ODE dx/dsigma = (x - D(x, sigma)) / sigma.

    z0 is standard normal; the state initializes as z0 * sigma_max. Each step
    takes an Euler proposal and, when the target level is positive, averages
    in the slope there (second order). Non-finite trajectories freeze and keep
    their non-finite values so they surface downstream as NaN generations;
    return_first_bad_step additionally reports the first offending step index
    per trajectory (-1 when clean).
    """
    z0 = np.asarray(z0, dtype=np.float64)
    squeeze = z0.ndim == 1
    x = (z0[None, :] if squeeze else z0) * schedule.sigmas[0]
    first_bad = np.full(len(x), -1, dtype=np.int64)
    for i in range(schedule.steps):
        s_cur, s_next = schedule.sigmas[i], schedule.sigmas[i + 1]
        d_cur = (x - denoiser.denoise(x, s_cur)) / s_cur
        x_prop = x + (s_next - s_cur) * d_cur
        if s_next > 0:
            d_next = (x_prop - denoiser.denoise(x_prop, s_next)) / s_next
            x_new = x + (s_next - s_cur) * 0.5 * (d_cur + d_next)
        else:
            x_new = x_prop
        newly_bad = ~np.isfinite(x_new).all(axis=1) & (first_bad < 0)
        first_bad[newly_bad] = i
        x_new[first_bad >= 0] = np.nan
        x = x_new
    out = x[0] if squeeze else x
    if return_first_bad_step:
        return out, (first_bad[0] if squeeze else first_bad)
    return out


def score_from_denoiser(denoiser: DenoiserHandle, x: np.ndarray, sigma: float) -> np.ndarray:
    """Score of the sigma-smoothed density via the posterior-mean identity."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return (denoiser.denoise(x, sigma) - x) / sigma ** 2
