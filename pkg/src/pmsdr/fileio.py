"""Reading and writing datasets, run outputs and manifests.

Matrices are headerless CSV with one row per ambient coordinate and
``%.17g`` cells (lossless for float64). Everything structural lives in
JSON sidecars.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import ConfigError, InvalidInput
from .synth import DatasetBundle, PartialPermutation, SynthConfig


def write_matrix(path, A) -> None:
    np.savetxt(path, np.atleast_2d(np.asarray(A, dtype=np.float64)), fmt="%.17g", delimiter=",")


def read_matrix(path) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise InvalidInput(f"cannot read matrix {path}: {exc}") from exc


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite_or_none(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _finite_or_none(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite_or_none(v) for v in o]
    return o


def write_json(path, obj) -> None:
    obj = json.loads(json.dumps(obj, default=_default))
    with open(path, "w") as fh:
        json.dump(_finite_or_none(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON {path}: {exc}") from exc


def tool_version() -> str:
    try:
        return metadata.version("pmsdr")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out_dir, command: str, seed=None, config_path=None, inputs=(), outputs=()) -> dict:
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": seed,
        "tool_version": tool_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)
    return manifest


BUNDLE_FILES = ("corrupted.csv", "clean.csv", "bases.csv", "bundle.json")


def save_bundle(bundle: DatasetBundle, out_dir) -> list:
    """Write ``corrupted.csv``, ``clean.csv``, ``bases.csv`` and ``bundle.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "corrupted.csv", bundle.corrupted)
    write_matrix(out / "clean.csv", bundle.clean)
    write_matrix(out / "bases.csv", np.hstack(bundle.bases))
    write_json(out / "bundle.json", {
        "shape": list(bundle.corrupted.shape),
        "rank": int(bundle.bases[0].shape[1]),
        "labels": bundle.labels,
        "outlier_mask": bundle.outlier_mask,
        "permutations": {str(j): p.phi for j, p in bundle.permutations.items()},
        "config": bundle.config.to_dict() if bundle.config else None,
        "seed": bundle.seed,
    })
    return [out / f for f in BUNDLE_FILES]


def load_corrupted(data_dir) -> np.ndarray:
    return read_matrix(Path(data_dir) / "corrupted.csv")


def load_bundle(data_dir) -> DatasetBundle | None:
    """Full bundle from ``data_dir``, or None when the ground truth is absent."""
    d = Path(data_dir)
    if not all((d / f).exists() for f in BUNDLE_FILES):
        return None
    meta = read_json(d / "bundle.json")
    B = read_matrix(d / "bases.csv")
    r = int(meta["rank"])
    bases = [B[:, k:k + r] for k in range(0, B.shape[1], r)]
    perms = {int(j): PartialPermutation.from_phi(phi) for j, phi in meta["permutations"].items()}
    cfg = SynthConfig.from_dict(meta["config"]) if meta.get("config") else None
    return DatasetBundle(read_matrix(d / "corrupted.csv"), read_matrix(d / "clean.csv"), bases,
                         np.asarray(meta["labels"], dtype=np.int64),
                         np.asarray(meta["outlier_mask"], dtype=bool), perms, cfg, meta.get("seed"))


def write_rows(path, rows, columns) -> None:
    """CSV with a header row; floats as ``%.17g``, missing values empty."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else format(float(v), ".17g")
    return v


def read_rows(path) -> list:
    """Inverse of :func:`write_rows`; numeric-looking cells become int or float."""
    with open(path, newline="") as fh:
        return [{k: _parse(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _parse(v: str):
    if v == "":
        return None
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


REPORT_SCHEMA = {
    "type": "object",
    "required": ["ce_gt", "ce_recon", "re_gt", "re_recon", "uoratio", "scerr",
                 "timings", "config", "seed", "degenerate"],
    "properties": {
        **{m: {"type": ["number", "null"], "minimum": 0} for m in
           ("ce_gt", "ce_recon", "re_gt", "re_recon", "uoratio", "scerr")},
        "timings": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
        "config": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
        "degenerate": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "details": {"type": "object"},
    },
}
