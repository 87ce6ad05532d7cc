"""Declarative experiment configuration and its two serializations: JSON for
resolved run records and a line-oriented key = value text format (with
`include` support) for hand-written configs.

Text format, one statement per line:

    # comment
    include base.cfg
    rule = parity:D=20,G=2
    n = 128
    seed = 0
    model = mlp_dsm
    out = runs/demo
    train.total_steps = 200000
    eval.seeds = 2048

Keys are dotted paths into the config; values parse as JSON when possible and
fall back to bare strings. Included files load first, later keys win.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .diffusion import EDMConfig
from .metrics import QuantConfig
from .nn import TrainConfig
from .rules import RuleSpec

MODEL_KINDS = ("empirical", "rule_optimal", "energy", "mlp_dsm", "ar_ntp")
ANALYTIC_MODELS = ("empirical", "rule_optimal", "energy")


class ConfigError(ValueError):
    pass


@dataclass
class EvalConfig:
    seeds: int = 2048
    eps_strict: float = 0.01
    eps_loose: float = 0.1
    rule_threshold: float = 0.9
    sustain_count: int = 5
    use_ema: bool = False
    ema_half_life: float = 3.0
    group_match_positional: bool = False
    baseline_mc: int = 100_000

    def quant(self) -> QuantConfig:
        return QuantConfig(eps_strict=self.eps_strict, eps_loose=self.eps_loose)


@dataclass
class DissectConfig:
    spectrum: bool = False
    spectrum_repeats: int = 8
    spectrum_weighted: bool = False
    heldout_count: int = 0          # 0 -> dataset size
    cube_count: int = 0             # 0 -> dataset size
    field_sigmas: Tuple[float, ...] = ()
    basin_directions: Tuple[str, ...] = ()
    basin_sigma: float = 0.5
    basin_anchors: int = 30


@dataclass
class ExperimentConfig:
    rule: RuleSpec
    n: int
    seed: int
    model: str
    out_dir: str
    model_params: Dict[str, Any] = field(default_factory=dict)
    edm: EDMConfig = field(default_factory=EDMConfig)
    sampler_steps: int = 35
    sampler_rho: float = 7.0
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    dissect: DissectConfig = field(default_factory=DissectConfig)
    save_samples: bool = True
    save_checkpoints: bool = False

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if self.n < 1:
            raise ConfigError("n must be >= 1")

    @property
    def is_analytic(self) -> bool:
        return self.model in ANALYTIC_MODELS

    def to_dict(self) -> dict:
        return {
            "rule": self.rule.to_dict(),
            "n": self.n,
            "seed": self.seed,
            "model": self.model,
            "out_dir": self.out_dir,
            "model_params": dict(self.model_params),
            "edm": self.edm.to_dict(),
            "sampler_steps": self.sampler_steps,
            "sampler_rho": self.sampler_rho,
            "train": self.train.to_dict(),
            "eval": dict(self.eval.__dict__),
            "dissect": {k: list(v) if isinstance(v, tuple) else v
                        for k, v in self.dissect.__dict__.items()},
            "save_samples": self.save_samples,
            "save_checkpoints": self.save_checkpoints,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        try:
            rule_raw = d.pop("rule")
            rule = (RuleSpec.parse(rule_raw) if isinstance(rule_raw, str)
                    else RuleSpec.from_dict(rule_raw))
            train_d = dict(d.pop("train", {}))
            if "checkpoint_steps" in train_d:
                train_d["checkpoint_steps"] = tuple(train_d["checkpoint_steps"])
            if "hidden" in train_d:
                train_d["hidden"] = tuple(train_d["hidden"])
            train = TrainConfig(**train_d)
            edm = EDMConfig(**d.pop("edm", {}))
            ev = EvalConfig(**d.pop("eval", {}))
            dis_d = dict(d.pop("dissect", {}))
            for key in ("field_sigmas", "basin_directions"):
                if key in dis_d:
                    dis_d[key] = tuple(dis_d[key])
            dissect = DissectConfig(**dis_d)
            out_dir = d.pop("out_dir", d.pop("out", None))
            if out_dir is None:
                raise KeyError("out_dir")
            return cls(rule=rule, edm=edm, train=train, eval=ev, dissect=dissect,
                       out_dir=str(out_dir), **d)
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid experiment config: {e}") from e


def _parse_value(text: str):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _set_dotted(tree: dict, key: str, value) -> None:
    parts = key.split(".")
    node = tree
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"key {key!r} conflicts with a scalar value")
    node[parts[-1]] = value


def load_config_text(path) -> dict:
    """Parse the key = value format into a nested dict, resolving includes."""
    path = Path(path)
    tree: dict = {}

    def load_into(p: Path, depth: int = 0) -> None:
        if depth > 16:
            raise ConfigError("include nesting too deep (cycle?)")
        for ln, raw in enumerate(p.read_text().splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("include "):
                inc = (p.parent / line[len("include "):].strip()).resolve()
                if not inc.exists():
                    raise ConfigError(f"{p}:{ln}: included file not found: {inc}")
                load_into(inc, depth + 1)
                continue
            if "=" not in line:
                raise ConfigError(f"{p}:{ln}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            _set_dotted(tree, key.strip(), _parse_value(val))

    load_into(path)
    return tree


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    if path.suffix == ".json":
        return ExperimentConfig.from_dict(json.loads(path.read_text()))
    return ExperimentConfig.from_dict(load_config_text(path))
