"""On-disk artifacts shared by the experiment runner: raw matrix files with
JSON sidecars, content hashing for run manifests, and deterministic derivation
of per-stage random streams from a master seed.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

# Stage ids for seed derivation. Every randomized stage draws from its own
# stream, derived as SeedSequence(master, spawn_key=(stage_id, *extra)), so
# stages never share or race on a stream.
STAGE_IDS = {
    "dataset": 0,
    "init_noise": 1,
    "training": 2,
    "spectrum_noise": 3,
    "heldout": 4,
    "uniform_cube": 5,
    "basin_bootstrap": 6,
    "ar_sampling": 7,
    "sweep": 8,
    "baselines": 9,
}


def stage_seed(master_seed: int, stage: str, *extra: int) -> int:
    """Derived integer seed for a named stage (plus optional substream ids)."""
    ss = np.random.SeedSequence(entropy=master_seed,
                                spawn_key=(STAGE_IDS[stage], *extra))
    return int(ss.generate_state(1)[0])


def stage_rng(master_seed: int, stage: str, *extra: int) -> np.random.Generator:
    return np.random.default_rng(stage_seed(master_seed, stage, *extra))


def save_matrix(path, array: np.ndarray, meta: Optional[dict] = None) -> None:
    """Raw little-endian float64 binary plus a JSON sidecar describing it."""
    path = Path(path)
    arr = np.ascontiguousarray(array, dtype="<f8")
    path.with_suffix(".bin").write_bytes(arr.tobytes())
    sidecar = {"shape": list(arr.shape), "dtype": "float64", "order": "C"}
    if meta:
        sidecar.update(meta)
    path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))


def load_matrix(path):
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    data = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    return data.reshape(sidecar["shape"]).copy(), sidecar


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def canonical_json(obj) -> str:
    """Round-trippable serialization: floats keep full precision via repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def inventory(root, exclude=("manifest.json",)) -> Dict[str, str]:
    """Relative path -> sha256 for every file under a run directory."""
    root = Path(root)
    out: Dict[str, str] = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.name not in exclude:
            out[str(p.relative_to(root))] = sha256_file(p)
    return out
