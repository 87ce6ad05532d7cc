"""Command line front end.

Verbs: gen, train, eval, clocks, fit, dissect, sweep, report.
Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import glob
import json
import sys
from pathlib import Path

import click
import numpy as np

from .clocks import fit_power_law
from .config import (ANALYTIC_MODELS, ConfigError, ExperimentConfig,
                     load_experiment_config)
from .dataset import Dataset, generate_dataset
from .rules import RuleError, RuleSpec
from .runner import StageFailure, run_experiment, sweep as run_sweep

EXIT_CONFIG = 2
EXIT_STAGE = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Rule-learning and memorization lab."""


@main.command()
@click.option("--rule", "rule_str", required=True, help="rule string, e.g. parity:D=36,G=6")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def gen(rule_str, n, seed, out_path):
    """Generate a dataset of unique rule-valid samples."""
    try:
        rule = RuleSpec.parse(rule_str)
        ds = generate_dataset(rule, n, seed)
    except (RuleError, ValueError) as e:
        _fail(EXIT_CONFIG, str(e))
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    ds.save(out_path)
    click.echo(f"wrote {n} samples to {out_path}")


def _apply_overrides(d, overrides):
    for item in overrides:
        key, _, val = item.partition("=")
        node = d
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        try:
            node[parts[-1]] = json.loads(val)
        except json.JSONDecodeError:
            node[parts[-1]] = val.strip()
    try:
        return ExperimentConfig.from_dict(d)
    except (ConfigError, RuleError) as e:
        _fail(EXIT_CONFIG, str(e))


def _load_config(config_path, overrides):
    try:
        cfg = load_experiment_config(config_path)
    except (ConfigError, RuleError, FileNotFoundError, json.JSONDecodeError) as e:
        _fail(EXIT_CONFIG, str(e))
    return _apply_overrides(cfg.to_dict(), overrides)


def _execute(cfg, force):
    try:
        manifest = run_experiment(cfg, force=force)
    except StageFailure as e:
        _fail(EXIT_STAGE, str(e))
    click.echo(f"run complete: {cfg.out_dir} ({manifest['status']})")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="experiment config file; flags below override or replace it")
@click.option("--set", "overrides", multiple=True, help="override KEY=VALUE (dotted keys)")
@click.option("--model", "model_name", type=click.Choice(["dsm", "ar"]), default=None,
              help="trainable model kind (alternative to a config file)")
@click.option("--rule", "rule_str", default=None)
@click.option("--n", type=int, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--force", is_flag=True, help="rerun even if a matching manifest exists")
def train(config_path, overrides, model_name, rule_str, n, steps, seed, out_dir, force):
    """Run a trainable-model experiment (mlp_dsm or ar_ntp) end to end."""
    if config_path is None:
        missing = [name for name, v in (("--model", model_name), ("--rule", rule_str),
                                        ("--n", n), ("--steps", steps), ("--out", out_dir))
                   if v is None]
        if missing:
            _fail(EXIT_CONFIG, f"without --config, these are required: {', '.join(missing)}")
        d = {"rule": rule_str, "n": n, "seed": seed,
             "model": "mlp_dsm" if model_name == "dsm" else "ar_ntp",
             "out_dir": out_dir, "train": {"total_steps": steps}}
        cfg = _apply_overrides(d, overrides)
    else:
        extra = []
        if model_name is not None:
            extra.append(f"model={'mlp_dsm' if model_name == 'dsm' else 'ar_ntp'}")
        if rule_str is not None:
            extra.append(f"rule={rule_str}")
        if n is not None:
            extra.append(f"n={n}")
        if steps is not None:
            extra.append(f"train.total_steps={steps}")
        if out_dir is not None:
            extra.append(f"out_dir={out_dir}")
        cfg = _load_config(config_path, list(overrides) + extra)
    if cfg.model in ANALYTIC_MODELS:
        _fail(EXIT_CONFIG, f"model {cfg.model!r} is analytic; use 'lab eval'")
    _execute(cfg, force)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--set", "overrides", multiple=True)
@click.option("--force", is_flag=True)
def eval_cmd(config_path, overrides, force):
    """Run an analytic-model experiment (empirical, rule_optimal, energy)."""
    cfg = _load_config(config_path, overrides)
    if cfg.model not in ANALYTIC_MODELS:
        _fail(EXIT_CONFIG, f"model {cfg.model!r} is trainable; use 'lab train'")
    _execute(cfg, force)


@main.command()
@click.option("--runs", "runs_glob", required=True, help="glob of run directories")
@click.option("--out", "out_path", required=True, type=click.Path())
def clocks(runs_glob, out_path):
    """Collect clock reports from completed runs into one JSON document.

    Runs without a completed manifest are treated as incomplete and skipped.
    """
    reports = {}
    for d in sorted(glob.glob(runs_glob)):
        manifest = Path(d) / "manifest.json"
        clocks_path = Path(d) / "clocks.json"
        if not (manifest.exists() and clocks_path.exists()):
            continue
        if json.loads(manifest.read_text()).get("status") != "ok":
            continue
        reports[d] = json.loads(clocks_path.read_text())
    if not reports:
        _fail(EXIT_CONFIG, f"no completed runs matched {runs_glob!r}")
    Path(out_path).write_text(json.dumps(reports, sort_keys=True, indent=1))
    click.echo(f"wrote {len(reports)} reports to {out_path}")


@main.command()
@click.option("--points", "points_path", required=True, type=click.Path(exists=True),
              help="CSV with N,tau columns (header optional)")
@click.option("--out", "out_path", type=click.Path(), default=None)
def fit(points_path, out_path):
    """Log-log power-law fit of (N, tau) points."""
    rows = []
    for line in Path(points_path).read_text().strip().splitlines():
        parts = line.replace(";", ",").split(",")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            continue  # header or malformed line
    try:
        result = fit_power_law(rows)
    except ValueError as e:
        _fail(EXIT_CONFIG, str(e))
    payload = json.dumps(result.to_dict(), indent=1, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload)
    click.echo(payload)


@main.command()
@click.argument("kind", type=click.Choice(["raster", "spectrum", "field", "basin"]))
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True))
@click.option("--sigma", type=float, default=0.5, show_default=True)
@click.option("--direction", default="hamming2_valid_novel", show_default=True)
@click.option("--windows", default=None,
              help="raster windows as JSON, e.g. '[[0,100],[100,1000]]'")
def dissect(kind, run_dir, sigma, direction, windows):
    """Post-hoc analyses over an existing run directory."""
    from . import dissect as dz
    from .persist import save_matrix

    run = Path(run_dir)
    try:
        cfg_dict = json.loads((run / "config.json").read_text())
        cfg_dict["out_dir"] = str(run)
        cfg = ExperimentConfig.from_dict(cfg_dict)
        dataset = Dataset.load(run / "dataset.csv")
        model = _rebuild_model(cfg, dataset, run)
    except (ConfigError, RuleError, FileNotFoundError, json.JSONDecodeError) as e:
        _fail(EXIT_CONFIG, str(e))
    try:
        if kind == "raster":
            steps, labels = _load_raster(run / "raster.csv")
            tensor = dz.TransitionTensor.from_labels(steps, labels)
            wins = json.loads(windows) if windows else [[steps[0], steps[-1]]]
            payload = {}
            for w in wins:
                counts, norm, defined = tensor.aggregate((w[0], w[1]))
                payload[f"{w[0]}-{w[1]}"] = {
                    "counts": counts.tolist(), "row_normalized": norm.tolist(),
                    "defined_rows": defined.tolist()}
            (run / "transitions.json").write_text(json.dumps(payload, indent=1, sort_keys=True))
            click.echo(f"wrote {run / 'transitions.json'}")
        elif kind == "spectrum":
            splits = dz.standard_splits(dataset, seed=cfg.seed)
            spec = dz.dsm_spectrum(model, splits, noise_seed=cfg.seed)
            (run / "spectra.csv").write_text(dz.spectra_to_csv([spec]))
            click.echo(f"wrote {run / 'spectra.csv'}")
        elif kind == "field":
            plane = dz.build_plane(dataset.samples[0].astype(float), cfg.rule)
            mag, proj = dz.field_slice(model, plane, sigma)
            tag = f"{sigma:g}".replace(".", "p")
            save_matrix(run / f"field_mag_{tag}", mag, {"sigma": sigma})
            save_matrix(run / f"field_proj_{tag}", proj, {"sigma": sigma})
            (run / "plane.json").write_text(
                json.dumps(plane.to_dict(), indent=1, sort_keys=True))
            click.echo(f"wrote field slices at sigma={sigma:g}")
        else:
            prof = dz.basin_profile(model, dataset, direction, sigma=sigma)
            path = run / f"basins_{direction}.csv"
            path.write_text(prof.to_csv())
            click.echo(f"wrote {path}")
    except (RuleError, ValueError) as e:
        _fail(EXIT_STAGE, str(e))


def _rebuild_model(cfg: ExperimentConfig, dataset: Dataset, run: Path):
    from .denoisers import EmpiricalDenoiser, EnergyModel, RuleDenoiser
    from .encoding import encode, encoded_dim
    from .nn import ARModel, MLPDenoiser, load_checkpoint

    if cfg.model == "empirical":
        return EmpiricalDenoiser(encode(dataset.samples, cfg.rule))
    if cfg.model == "rule_optimal":
        return RuleDenoiser(cfg.rule, **cfg.model_params)
    if cfg.model == "energy":
        return EnergyModel(cfg.rule, **cfg.model_params)
    params, _ = load_checkpoint(run / "final")
    if cfg.model == "mlp_dsm":
        return MLPDenoiser(encoded_dim(cfg.rule), cfg.train, cfg.edm, params=params)
    return ARModel(cfg.rule.D, cfg.train, params=params)


def _load_raster(path: Path):
    lines = path.read_text().strip().splitlines()
    steps = []
    labels = []
    for line in lines[1:]:
        parts = line.split(",")
        steps.append(int(parts[0]))
        labels.append(np.array([int(v) for v in parts[1:]]))
    return steps, labels


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--axis", required=True, help="dotted config key to vary, e.g. 'n' or 'seed'")
@click.option("--values", required=True, help="JSON list of values, e.g. '[32,64,128]'")
@click.option("--out", "out_root", required=True, type=click.Path())
@click.option("--force", is_flag=True)
def sweep_cmd(config_path, axis, values, out_root, force):
    """One run per axis value plus an aggregate (N, tau) table."""
    cfg = _load_config(config_path, ())
    try:
        vals = json.loads(values)
        if not isinstance(vals, list) or not vals:
            raise ValueError("values must be a nonempty JSON list")
    except ValueError as e:
        _fail(EXIT_CONFIG, str(e))
    summary = run_sweep(cfg, axis, vals, out_root, force=force)
    if summary["failed"]:
        _fail(EXIT_STAGE, f"{summary['failed']} sweep member(s) failed")
    click.echo(f"sweep complete: {out_root}")


@main.command()
@click.option("--sweep-dir", "sweep_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--fit/--no-fit", "do_fit", default=True, show_default=True)
def report(sweep_dir, out_path, do_fit):
    """Aggregate a sweep into an (N, tau_mem) table with an optional power-law fit."""
    table = Path(sweep_dir) / "sweep_table.csv"
    if not table.exists():
        _fail(EXIT_CONFIG, f"no sweep_table.csv under {sweep_dir}")
    points = []
    for line in table.read_text().strip().splitlines()[1:]:
        parts = line.split(",")
        if parts[-1] == "ok" and parts[4]:
            points.append((float(parts[2]), float(parts[4])))
    payload = {"points": points}
    if do_fit and len(points) >= 2:
        payload["fit"] = fit_power_law(points).to_dict()
    Path(out_path).write_text(json.dumps(payload, indent=1, sort_keys=True))
    click.echo(json.dumps(payload.get("fit", {}), sort_keys=True))


if __name__ == "__main__":
    main()
