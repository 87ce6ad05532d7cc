"""Experiment orchestration: one declarative config in, a stable on-disk run
directory out (dataset, per-checkpoint snapshots and rasters, clock report,
optional spectra / field slices / basin profiles, and a manifest written last
as the completion marker).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .clocks import OnsetCriterion, adaptive_mem_threshold, innovation_window
from .config import ExperimentConfig, ConfigError
from .dataset import Dataset, generate_dataset, heldout_valid, memorization_baselines
from .denoisers import EmpiricalDenoiser, EnergyModel, RuleDenoiser
from .diffusion import EDMConfig, heun_sample, karras_schedule
from .dissect import (basin_profile, build_plane, dsm_spectrum, field_slice,
                      spectra_to_csv, standard_splits)
from .encoding import encode, encoded_dim
from .metrics import (EvalSnapshot, QuantConfig, build_snapshot, raster_to_csv,
                      snapshots_to_csv)
from .nn import ARModel, MLPDenoiser, save_checkpoint, train_dsm, train_ntp
from .persist import (canonical_json, inventory, save_matrix, sha256_text,
                      stage_rng, stage_seed)
from .rules import count_valid


class StageFailure(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the resolved config without the output location."""
    d = cfg.to_dict()
    d.pop("out_dir", None)
    return sha256_text(canonical_json(d))


def _build_analytic_model(cfg: ExperimentConfig, dataset: Dataset):
    rule = cfg.rule
    if cfg.model == "empirical":
        return EmpiricalDenoiser(encode(dataset.samples, rule))
    if cfg.model == "rule_optimal":
        return RuleDenoiser(rule, **cfg.model_params)
    if cfg.model == "energy":
        return EnergyModel(rule, **cfg.model_params)
    raise ConfigError(f"not an analytic model: {cfg.model}")


def run_experiment(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Execute the full pipeline for one config.

    A run directory containing a manifest with a matching config hash is a
    completed run and the call is a no-op unless force is set. On stage
    failure the manifest records the partial inventory and the failing stage,
    then the failure propagates.
    """
    out = Path(cfg.out_dir)
    chash = config_hash(cfg)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not force:
        old = json.loads(manifest_path.read_text())
        if old.get("config_hash") == chash and old.get("status") == "ok":
            return old
    out.mkdir(parents=True, exist_ok=True)

    manifest: dict = {
        "config_hash": chash,
        "code_version": __version__,
        "status": "running",
        "stage_seconds": {},
        "stage_seeds": {},
        "files": {},
    }
    timings = manifest["stage_seconds"]

    def timed(stage: str, fn: Callable):
        t0 = time.perf_counter()
        try:
            result = fn()
        except Exception as e:  # record the failing stage, then surface it
            manifest["status"] = "failed"
            manifest["failed_stage"] = stage
            manifest["error"] = f"{type(e).__name__}: {e}"
            manifest["files"] = inventory(out)
            manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
            raise StageFailure(stage, e) from e
        timings[stage] = time.perf_counter() - t0
        return result

    # the stored config is the portable experiment description: the output
    # location is implied by where the file sits and stays out of the hash
    cfg_record = cfg.to_dict()
    cfg_record.pop("out_dir", None)
    (out / "config.json").write_text(json.dumps(cfg_record, sort_keys=True, indent=1))

    # dataset
    ds_seed = stage_seed(cfg.seed, "dataset")
    manifest["stage_seeds"]["dataset"] = ds_seed

    def gen():
        ds = generate_dataset(cfg.rule, cfg.n, ds_seed)
        ds.save(out / "dataset.csv")
        return ds

    dataset = timed("dataset", gen)

    def baselines():
        seed = stage_seed(cfg.seed, "baselines")
        manifest["stage_seeds"]["baselines"] = seed
        base = memorization_baselines(cfg.rule, cfg.n, dataset,
                                      mc_draws=cfg.eval.baseline_mc, mc_seed=seed)
        (out / "baselines.json").write_text(
            json.dumps(base.to_dict(), sort_keys=True, indent=1))

    timed("baselines", baselines)
    quant = QuantConfig(eps_strict=cfg.eval.eps_strict, eps_loose=cfg.eval.eps_loose)

    snapshots: List[EvalSnapshot] = []
    final_model_holder: dict = {}

    if cfg.model == "ar_ntp":
        timed("train_eval", lambda: _run_ar(cfg, dataset, out, quant, snapshots,
                                            final_model_holder, manifest))
    else:
        timed("train_eval", lambda: _run_diffusion(cfg, dataset, out, quant, snapshots,
                                                   final_model_holder, manifest))

    # clocks
    def clocks():
        steps = [s.step for s in snapshots]
        acc = [s.sample_acc for s in snapshots]
        mem = [s.sample_mem for s in snapshots]
        support = count_valid(cfg.rule)
        rule_crit = OnsetCriterion(
            metric="sample_acc", threshold=cfg.eval.rule_threshold,
            sustain_count=cfg.eval.sustain_count, use_ema=cfg.eval.use_ema,
            ema_half_life=cfg.eval.ema_half_life)
        mem_crit = OnsetCriterion(
            metric="sample_mem", threshold=adaptive_mem_threshold(cfg.n, support),
            sustain_count=cfg.eval.sustain_count, use_ema=cfg.eval.use_ema,
            ema_half_life=cfg.eval.ema_half_life)
        report = innovation_window(steps, acc, mem, rule_crit, mem_crit)
        payload = report.to_dict()
        payload["n"] = cfg.n
        payload["support"] = support
        payload["mem_undetectable"] = cfg.n == support
        (out / "clocks.json").write_text(json.dumps(payload, sort_keys=True, indent=1))
        return report

    timed("clocks", clocks)

    if cfg.dissect.spectrum or cfg.dissect.field_sigmas or cfg.dissect.basin_directions:
        timed("dissect", lambda: _run_dissect(cfg, dataset, out, final_model_holder, manifest))

    manifest["status"] = "ok"
    manifest["files"] = inventory(out)
    manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=1))
    return manifest


def _write_eval_outputs(out: Path, snapshots: List[EvalSnapshot]) -> None:
    (out / "snapshots.csv").write_text(snapshots_to_csv(snapshots))
    (out / "raster.csv").write_text(raster_to_csv(snapshots))


def _run_diffusion(cfg: ExperimentConfig, dataset: Dataset, out: Path,
                   quant: QuantConfig, snapshots: List[EvalSnapshot],
                   holder: dict, manifest: dict) -> None:
    dim = encoded_dim(cfg.rule)
    noise_seed = stage_seed(cfg.seed, "init_noise")
    manifest["stage_seeds"]["init_noise"] = noise_seed
    z0 = np.random.default_rng(noise_seed).standard_normal((cfg.eval.seeds, dim))
    schedule = karras_schedule(cfg.edm, cfg.sampler_steps, cfg.sampler_rho)
    samples_dir = out / "samples"
    if cfg.save_samples:
        samples_dir.mkdir(exist_ok=True)

    # spectra, when requested, are evaluated at every checkpoint with noise
    # seeded per (level, repeat) so cross-step differences are model changes
    spectra: List = []
    spectrum_splits = None
    sp_seed = 0
    if cfg.dissect.spectrum:
        sp_seed = stage_seed(cfg.seed, "spectrum_noise")
        split_seed = stage_seed(cfg.seed, "heldout")
        manifest["stage_seeds"].update(spectrum_noise=sp_seed, heldout=split_seed)
        spectrum_splits = standard_splits(dataset, cfg.dissect.heldout_count or None,
                                          cfg.dissect.cube_count or None,
                                          seed=split_seed)

    def evaluate(step: int, model) -> None:
        raw = heun_sample(model, z0, schedule)
        snap = build_snapshot(step, raw, cfg.rule, dataset, quant,
                              positional_groups=cfg.eval.group_match_positional)
        snapshots.append(snap)
        if cfg.save_samples:
            save_matrix(samples_dir / f"step_{step:09d}",
                        raw, {"seed": noise_seed, "step": step})
        if spectrum_splits is not None:
            spectra.append(dsm_spectrum(model, spectrum_splits,
                                        repeats=cfg.dissect.spectrum_repeats,
                                        weighted=cfg.dissect.spectrum_weighted,
                                        noise_seed=sp_seed, step=step))

    if cfg.is_analytic:
        model = _build_analytic_model(cfg, dataset)
        evaluate(0, model)
        holder["model"] = model
    else:
        train_seed = stage_seed(cfg.seed, "training")
        manifest["stage_seeds"]["training"] = train_seed
        tcfg = replace(cfg.train, seed=train_seed)
        data = encode(dataset.samples, cfg.rule)
        ckpt_dir = out / "checkpoints"
        if cfg.save_checkpoints:
            ckpt_dir.mkdir(exist_ok=True)

        def hook(step: int, model: MLPDenoiser) -> None:
            evaluate(step, model)
            if cfg.save_checkpoints:
                save_checkpoint(ckpt_dir / f"step_{step:09d}", model.params,
                                {"config_hash": manifest["config_hash"], "step": step,
                                 "seed": train_seed,
                                 "rng_state": getattr(model, "rng_state", None)})

        model = train_dsm(tcfg, cfg.edm, data, hook=hook)
        holder["model"] = model
        save_checkpoint(out / "final", model.params,
                        {"config_hash": manifest["config_hash"],
                         "step": tcfg.total_steps, "seed": train_seed,
                         "rng_state": getattr(model, "rng_state", None)})
    if spectra:
        (out / "spectra.csv").write_text(spectra_to_csv(spectra))
    _write_eval_outputs(out, snapshots)


def _run_ar(cfg: ExperimentConfig, dataset: Dataset, out: Path,
            quant: QuantConfig, snapshots: List[EvalSnapshot],
            holder: dict, manifest: dict) -> None:
    if not cfg.rule.is_binary:
        raise ConfigError("the autoregressive model requires a binary rule family")
    train_seed = stage_seed(cfg.seed, "training")
    ar_seed = stage_seed(cfg.seed, "ar_sampling")
    heldout_seed = stage_seed(cfg.seed, "heldout")
    cube_seed = stage_seed(cfg.seed, "uniform_cube")
    manifest["stage_seeds"].update(training=train_seed, ar_sampling=ar_seed,
                                   heldout=heldout_seed, uniform_cube=cube_seed)
    tcfg = replace(cfg.train, seed=train_seed)
    data = encode(dataset.samples, cfg.rule)

    held = heldout_valid(dataset, cfg.dissect.heldout_count or cfg.n, seed=heldout_seed)
    cube_rng = np.random.default_rng(cube_seed)
    cube = cube_rng.integers(0, 2, size=(cfg.dissect.cube_count or cfg.n, cfg.rule.D)) * 2 - 1
    splits = {"train": dataset.samples.astype(np.float64)}
    if len(held):
        splits["heldout_valid"] = held.astype(np.float64)
    splits["uniform_cube"] = cube.astype(np.float64)

    ce_rows: List[str] = ["step,split,mean_ce"]
    pos_rows: List[str] = ["step,split,position,ce"]

    def hook(step: int, model: ARModel) -> None:
        gen_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=ar_seed, spawn_key=(step,)))
        gen = model.sample(gen_rng, cfg.eval.seeds, temperature=1.0)
        snap = build_snapshot(step, gen.astype(np.float64), cfg.rule, dataset, quant,
                              positional_groups=cfg.eval.group_match_positional)
        snapshots.append(snap)
        for name, mat in splits.items():
            ce = model.nll(mat)
            ce_rows.append(f"{step},{name},{float(ce.mean())!r}")
            per_pos = ce.mean(axis=0)
            for k, v in enumerate(per_pos):
                pos_rows.append(f"{step},{name},{k},{float(v)!r}")

    model = train_ntp(tcfg, data, hook=hook)
    holder["model"] = model
    save_checkpoint(out / "final", model.params,
                    {"config_hash": manifest["config_hash"],
                     "step": tcfg.total_steps, "seed": train_seed,
                     "rng_state": getattr(model, "rng_state", None)})
    (out / "ntp_loss.csv").write_text("\n".join(ce_rows) + "\n")
    (out / "per_position_ce.csv").write_text("\n".join(pos_rows) + "\n")
    _write_eval_outputs(out, snapshots)


def _run_dissect(cfg: ExperimentConfig, dataset: Dataset, out: Path,
                 holder: dict, manifest: dict) -> None:
    model = holder.get("model")
    if model is None:
        raise StageFailure("dissect", RuntimeError("no model available"))
    if cfg.model == "ar_ntp":
        return  # loss-split files already written during training
    dis = cfg.dissect
    # spectra are produced per checkpoint during evaluation; only the
    # final-model analyses happen here
    if dis.field_sigmas:
        plane = build_plane(dataset.samples[0].astype(np.float64), cfg.rule)
        (out / "plane.json").write_text(json.dumps(plane.to_dict(), sort_keys=True, indent=1))
        for s in dis.field_sigmas:
            mag, proj = field_slice(model, plane, s)
            tag = f"{s:g}".replace(".", "p")
            save_matrix(out / f"field_mag_{tag}", mag, {"sigma": s, "kind": "score_magnitude"})
            save_matrix(out / f"field_proj_{tag}", proj,
                        {"sigma": s, "kind": "projected_velocity"})
    if dis.basin_directions:
        boot_seed = stage_seed(cfg.seed, "basin_bootstrap")
        manifest["stage_seeds"]["basin_bootstrap"] = boot_seed
        chunks = []
        for direction in dis.basin_directions:
            prof = basin_profile(model, dataset, direction, sigma=dis.basin_sigma,
                                 n_anchors=dis.basin_anchors, bootstrap_seed=boot_seed)
            chunks.append(prof.to_csv())
        header, *_ = chunks[0].split("\n", 1)
        body = [header]
        for ch in chunks:
            body.extend(ch.strip().split("\n")[1:])
        (out / "basins.csv").write_text("\n".join(body) + "\n")


# -- sweeps -------------------------------------------------------------------------


def _set_axis(cfg_dict: dict, key: str, value) -> dict:
    d = json.loads(json.dumps(cfg_dict))
    node = d
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return d


def _sweep_member(args: Tuple[dict, str, object, int, str, bool]) -> dict:
    cfg_dict, axis, value, index, out_dir, force = args
    member = _set_axis(cfg_dict, axis, value)
    member["out_dir"] = out_dir
    if axis != "seed":
        member["seed"] = stage_seed(int(cfg_dict["seed"]), "sweep", index)
    cfg = ExperimentConfig.from_dict(member)
    return run_experiment(cfg, force=force)


def sweep(template: ExperimentConfig, axis: str, values: List,
          out_root, force: bool = False,
          max_workers: Optional[int] = None) -> dict:
    """One run per axis value, with per-member derived seeds, plus an aggregate
    (value, n, tau_rule, tau_mem) table for downstream power-law fitting.

    Member failures are isolated and marked in the sweep summary. Parallelism
    is capped by LAB_THREADS (default 1).
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    if max_workers is None:
        max_workers = max(1, int(os.environ.get("LAB_THREADS", "1")))
    base = template.to_dict()
    jobs = []
    for i, v in enumerate(values):
        member_dir = out_root / f"{axis.replace('.', '_')}_{v}"
        jobs.append((base, axis, v, i, str(member_dir), force))

    results: List[Optional[dict]] = [None] * len(jobs)
    errors: List[Optional[str]] = [None] * len(jobs)
    if max_workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_sweep_member, j) for j in jobs]
            for i, f in enumerate(futures):
                try:
                    results[i] = f.result()
                except Exception as e:
                    errors[i] = f"{type(e).__name__}: {e}"
    else:
        for i, j in enumerate(jobs):
            try:
                results[i] = _sweep_member(j)
            except Exception as e:
                errors[i] = f"{type(e).__name__}: {e}"

    rows = ["axis,value,n,tau_rule,tau_mem,status"]
    members = []
    for (cfg_dict, _, v, i, member_dir, _f), res, err in zip(jobs, results, errors):
        entry = {"value": v, "dir": member_dir, "status": "ok" if err is None else "failed"}
        if err is not None:
            entry["error"] = err
            rows.append(f"{axis},{v},,,{''},failed")
        else:
            clocks = json.loads((Path(member_dir) / "clocks.json").read_text())
            n = json.loads((Path(member_dir) / "config.json").read_text())["n"]
            tr = clocks.get("tau_rule")
            tm = clocks.get("tau_mem")
            rows.append(f"{axis},{v},{n},{'' if tr is None else tr},"
                        f"{'' if tm is None else tm},ok")
        members.append(entry)
    (out_root / "sweep_table.csv").write_text("\n".join(rows) + "\n")
    summary = {"axis": axis, "values": list(values), "members": members,
               "failed": sum(e is not None for e in errors)}
    (out_root / "sweep_manifest.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1, default=str))
    return summary
