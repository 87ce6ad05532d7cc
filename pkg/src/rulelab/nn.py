"""Small trainable stand-ins for the large architectures: a fully connected
denoiser trained with the weighted denoising objective under the standard
preconditioning, and an autoregressive bit predictor trained with next-token
cross-entropy. Forward and backward passes are written out by hand so the
training loop is bit-deterministic and the gradients can be checked against
finite differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diffusion import EDMConfig, dsm_weight, precond_coeffs, sample_sigma

Params = Dict[str, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    batch_size: int = 256
    total_steps: int = 10_000
    checkpoint_steps: Tuple[int, ...] = ()
    seed: int = 0
    hidden: Tuple[int, ...] = (128, 128)
    activation: str = "tanh"
    fourier_pairs: int = 8

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.total_steps < 0:
            raise ValueError("nonpositive training parameters")
        if list(self.checkpoint_steps) != sorted(self.checkpoint_steps):
            raise ValueError("checkpoint_steps must be ascending")

    def resolved_checkpoints(self) -> Tuple[int, ...]:
        if self.checkpoint_steps:
            return self.checkpoint_steps
        return log_spaced_checkpoints(self.total_steps)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checkpoint_steps"] = list(self.resolved_checkpoints())
        d["hidden"] = list(self.hidden)
        return d


def log_spaced_checkpoints(total_steps: int, count: int = 40, first: int = 50) -> Tuple[int, ...]:
    """Roughly log-uniform checkpoint grid from `first` to the training budget."""
    if total_steps <= 0:
        return ()
    first = min(first, total_steps)
    grid = np.unique(np.round(np.geomspace(first, total_steps, count)).astype(int))
    return tuple(int(s) for s in grid)


# -- parameter plumbing -----------------------------------------------------------


def _init_mlp(rng: np.random.Generator, dims: Sequence[int],
              zero_output: bool = True) -> Params:
    """Scaled-uniform fan-in init for hidden layers; the output layer starts at
    zero so the preconditioned denoiser is exactly the skip path at step 0."""
    params: Params = {}
    last = len(dims) - 2
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        bound = 1.0 / math.sqrt(fan_in)
        if zero_output and i == last:
            params[f"W{i}"] = np.zeros((fan_in, fan_out))
        else:
            params[f"W{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"b{i}"] = np.zeros(fan_out)
    return params


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, h: np.ndarray, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - h * h
    if name == "relu":
        return (z > 0).astype(np.float64)
    raise ValueError(f"unknown activation {name!r}")


def _mlp_forward(params: Params, x: np.ndarray, activation: str):
    """Returns output and the per-layer cache needed for the backward pass."""
    n_layers = len(params) // 2
    h = x
    cache = []
    for i in range(n_layers):
        z = h @ params[f"W{i}"] + params[f"b{i}"]
        if i < n_layers - 1:
            a = _act(activation, z)
            cache.append((h, z, a))
            h = a
        else:
            cache.append((h, z, z))
            h = z
    return h, cache


def _mlp_backward(params: Params, cache, d_out: np.ndarray, activation: str) -> Params:
    n_layers = len(params) // 2
    grads: Params = {}
    delta = d_out
    for i in reversed(range(n_layers)):
        h_in, z, a = cache[i]
        if i < n_layers - 1:
            delta = delta * _act_grad(activation, a, z)
        grads[f"W{i}"] = h_in.T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params[f"W{i}"].T
    return grads


# -- Adam ------------------------------------------------------------------------


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0

    @classmethod
    def init(cls, params: Params) -> "AdamState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: Params, grads: Params, state: AdamState, cfg: TrainConfig) -> None:
    """In-place bias-corrected update; decoupled weight decay applies only when
    weight_decay > 0."""
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        state.m[k] = b1 * state.m[k] + (1 - b1) * g
        state.v[k] = b2 * state.v[k] + (1 - b2) * (g * g)
        update = (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + cfg.adam_eps)
        p -= cfg.learning_rate * update
        if cfg.weight_decay > 0:
            p -= cfg.learning_rate * cfg.weight_decay * p


# -- denoiser model ----------------------------------------------------------------


class MLPDenoiser:
    """Preconditioned fully connected denoiser; implements the denoiser contract.

    The raw network sees the scaled input together with a noise embedding made
    of the log-noise conditioning value and geometric-frequency sine/cosine
    features of it.
    """

    exact_score = False

    def __init__(self, dim: int, cfg: TrainConfig, edm: EDMConfig,
                 rng: Optional[np.random.Generator] = None,
                 params: Optional[Params] = None):
        self.dim = dim
        self.cfg = cfg
        self.edm = edm
        self.embed_dim = 1 + 2 * cfg.fourier_pairs
        dims = [dim + self.embed_dim, *cfg.hidden, dim]
        if params is not None:
            self.params = params
        else:
            self.params = _init_mlp(rng or np.random.default_rng(cfg.seed), dims)
        self._freqs = 2.0 ** np.arange(cfg.fourier_pairs)

    def _embed(self, c_noise: np.ndarray) -> np.ndarray:
        u = c_noise[:, None]
        if self.cfg.fourier_pairs == 0:
            return u
        ang = u * self._freqs[None, :]
        return np.concatenate([u, np.sin(ang), np.cos(ang)], axis=1)

    def _forward(self, x: np.ndarray, sigma: np.ndarray):
        c_skip, c_out, c_in, c_noise = precond_coeffs(sigma, self.edm)
        c_skip, c_out, c_in = c_skip[:, None], c_out[:, None], c_in[:, None]
        inp = np.concatenate([c_in * x, self._embed(c_noise)], axis=1)
        raw, cache = _mlp_forward(self.params, inp, self.cfg.activation)
        return c_skip * x + c_out * raw, (cache, c_out)

    def denoise(self, x: np.ndarray, sigma) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        sig = np.full(len(x), float(sigma)) if np.ndim(sigma) == 0 else np.asarray(sigma)
        out, _ = self._forward(x, sig)
        return out[0] if squeeze else out

    def loss_and_grads(self, x0: np.ndarray, sigma: np.ndarray, noise: np.ndarray,
                       weighted: bool = True) -> Tuple[float, Params]:
        """Weighted squared denoising error, averaged over the batch, with
        gradients for every parameter."""
        noisy = x0 + sigma[:, None] * noise
        out, (cache, c_out) = self._forward(noisy, sigma)
        err = out - x0
        w = dsm_weight(sigma, self.edm) if weighted else np.ones_like(sigma)
        loss = float(np.mean(w * np.sum(err * err, axis=1)))
        d_out = (2.0 / len(x0)) * w[:, None] * err
        grads = _mlp_backward(self.params, cache, d_out * c_out, self.cfg.activation)
        return loss, grads

    def clone_params(self) -> Params:
        return {k: p.copy() for k, p in self.params.items()}


# -- autoregressive model -----------------------------------------------------------


class ARModel:
    """Left-to-right bit predictor: shared network from (zero-padded prefix,
    position one-hot) to a single logit for the next bit being positive."""

    def __init__(self, dim: int, cfg: TrainConfig,
                 rng: Optional[np.random.Generator] = None,
                 params: Optional[Params] = None):
        self.dim = dim
        self.cfg = cfg
        dims = [2 * dim, *cfg.hidden, 1]
        if params is not None:
            self.params = params
        else:
            self.params = _init_mlp(rng or np.random.default_rng(cfg.seed), dims)
        self._prefix_mask = np.tril(np.ones((dim, dim)), k=-1)
        self._pos_eye = np.eye(dim)

    def _inputs(self, samples: np.ndarray) -> np.ndarray:
        # row (b, k): bits before position k, then the position indicator
        B = len(samples)
        pref = samples[:, None, :] * self._prefix_mask[None, :, :]
        pos = np.broadcast_to(self._pos_eye, (B, self.dim, self.dim))
        return np.concatenate([pref, pos], axis=2).reshape(B * self.dim, 2 * self.dim)

    def logits(self, samples: np.ndarray) -> np.ndarray:
        samples = np.asarray(samples, dtype=np.float64)
        out, _ = _mlp_forward(self.params, self._inputs(samples), self.cfg.activation)
        return out.reshape(len(samples), self.dim)

    def nll(self, samples: np.ndarray) -> np.ndarray:
        """Per-position cross-entropy matrix (B, D) for +-1 samples."""
        samples = np.asarray(samples, dtype=np.float64)
        logit = self.logits(samples)
        target = (samples + 1.0) / 2.0
        return _softplus(logit) - target * logit

    def loss_and_grads(self, samples: np.ndarray) -> Tuple[float, Params]:
        samples = np.asarray(samples, dtype=np.float64)
        B = len(samples)
        inp = self._inputs(samples)
        out, cache = _mlp_forward(self.params, inp, self.cfg.activation)
        logit = out.reshape(B, self.dim)
        target = (samples + 1.0) / 2.0
        ce = _softplus(logit) - target * logit
        loss = float(ce.mean())
        d_logit = (_sigmoid(logit) - target) / ce.size
        grads = _mlp_backward(self.params, cache, d_logit.reshape(-1, 1), self.cfg.activation)
        return loss, grads

    def sample(self, rng: np.random.Generator, count: int = 1,
               temperature: float = 1.0) -> np.ndarray:
        """Sequential Bernoulli decoding to +-1 sequences. temperature <= 0 is argmax."""
        x = np.zeros((count, self.dim))
        for k in range(self.dim):
            pref = x * self._prefix_mask[k][None, :]
            pos = np.broadcast_to(self._pos_eye[k], (count, self.dim))
            inp = np.concatenate([pref, pos], axis=1)
            logit, _ = _mlp_forward(self.params, inp, self.cfg.activation)
            logit = logit[:, 0]
            if temperature <= 0:
                bits = np.where(logit > 0, 1.0, -1.0)
            else:
                p = _sigmoid(logit / temperature)
                bits = np.where(rng.random(count) < p, 1.0, -1.0)
            x[:, k] = bits
        return x.astype(np.int64)

    def clone_params(self) -> Params:
        return {k: p.copy() for k, p in self.params.items()}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def ar_nll(model: ARModel, sample: np.ndarray) -> np.ndarray:
    """Length-D vector of per-position negative log-likelihoods for one sample."""
    return model.nll(np.asarray(sample)[None, :])[0]


# -- training loops -----------------------------------------------------------------


def train_dsm(cfg: TrainConfig, edm: EDMConfig, data: np.ndarray,
              hook: Optional[Callable[[int, MLPDenoiser], None]] = None,
              model: Optional[MLPDenoiser] = None) -> MLPDenoiser:
    """Minimize the weighted denoising objective over a fixed dataset.

    Batches are drawn with replacement; one RNG stream drives index, noise
    level, and noise draws in a fixed order, so a (config, seed) pair yields
    bit-identical checkpoints. The hook fires at each checkpoint step with the
    live model and may return truthy to stop early (the step budget is an
    upper bound); training aborts if the loss goes non-finite.
    """
    data = np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    model = model or MLPDenoiser(data.shape[1], cfg, edm, rng=rng)
    state = AdamState.init(model.params)
    checkpoints = set(cfg.resolved_checkpoints())
    for step in range(1, cfg.total_steps + 1):
        idx = rng.integers(0, len(data), size=cfg.batch_size)
        sigma = sample_sigma(rng, edm, size=cfg.batch_size)
        noise = rng.standard_normal((cfg.batch_size, data.shape[1]))
        loss, grads = model.loss_and_grads(data[idx], sigma, noise, weighted=True)
        if not math.isfinite(loss):
            raise FloatingPointError(f"training loss non-finite at step {step}")
        adam_step(model.params, grads, state, cfg)
        if hook is not None and step in checkpoints:
            model.rng_state = rng.bit_generator.state
            if hook(step, model):
                break
    return model


def train_ntp(cfg: TrainConfig, data: np.ndarray,
              hook: Optional[Callable[[int, ARModel], None]] = None,
              model: Optional[ARModel] = None) -> ARModel:
    """Next-token cross-entropy training of the autoregressive bit model."""
    data = np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(cfg.seed)
    model = model or ARModel(data.shape[1], cfg, rng=rng)
    state = AdamState.init(model.params)
    checkpoints = set(cfg.resolved_checkpoints())
    for step in range(1, cfg.total_steps + 1):
        idx = rng.integers(0, len(data), size=cfg.batch_size)
        loss, grads = model.loss_and_grads(data[idx])
        if not math.isfinite(loss):
            raise FloatingPointError(f"training loss non-finite at step {step}")
        adam_step(model.params, grads, state, cfg)
        if hook is not None and step in checkpoints:
            model.rng_state = rng.bit_generator.state
            if hook(step, model):
                break
    return model


# -- checkpoint files ---------------------------------------------------------------


def save_checkpoint(path, params: Params, manifest: dict) -> None:
    """Binary parameter blob plus a JSON manifest side by side."""
    path = Path(path)
    np.savez(path.with_suffix(".npz"), **params)
    path.with_suffix(".json").write_text(json.dumps(manifest, sort_keys=True, indent=1))


def load_checkpoint(path) -> Tuple[Params, dict]:
    path = Path(path)
    with np.load(path.with_suffix(".npz")) as z:
        params = {k: z[k].copy() for k in z.files}
    manifest = json.loads(path.with_suffix(".json").read_text())
    return params, manifest
