"""Persisting experiment outputs: samples, summary and manifest echo."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import FORMATS, Manifest
from .errors import ConfigError
from .experiments import ExperimentResult, get_experiment

SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.txt"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def comment_header(manifest: Manifest) -> str:
    return "".join(f"# {line}\n" for line in manifest.echo().splitlines())


def write_table(stem: Path, columns: dict[str, np.ndarray], manifest: Manifest, fmt: str) -> Path:
    """Write ``<stem>.csv`` or ``<stem>.json``: one row per replica, ``replica_index`` first."""
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    if fmt == "json":
        path = stem.parent / f"{stem.name}.json"
        payload = {"manifest": manifest.echo(), "columns": ["replica_index", *names],
                   "rows": n, "data": {k: np.asarray(v).tolist() for k, v in columns.items()}}
        path.write_text(dumps(payload), encoding="utf-8")
        return path
    path = stem.parent / f"{stem.name}.csv"
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(comment_header(manifest))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replica_index", *names])
        cols = [np.asarray(columns[k]).tolist() for k in names]
        for i in range(n):
            writer.writerow([i, *(c[i] for c in cols)])
    return path


def write_samples(out: Path, groups: dict[str, dict[str, np.ndarray]], manifest: Manifest, fmt: str) -> list[Path]:
    """``samples.csv`` for one group, ``samples.<group>.csv`` for several."""
    if len(groups) == 1:
        (cols,) = groups.values()
        return [write_table(out / "samples", cols, manifest, fmt)]
    return [write_table(out / f"samples.{name}", cols, manifest, fmt) for name, cols in groups.items()]


def summary_dict(experiment_id: str, params: dict, result: ExperimentResult, manifest: Manifest) -> dict:
    return {
        "experiment": experiment_id,
        "manifest": manifest.echo(),
        "params": params,
        "verdicts": [v.to_dict() for v in result.verdicts],
        "passed": result.passed,
        "info": result.info,
    }


def write_outputs(out: Path, summary: dict, groups, manifest: Manifest, fmt: str) -> list[Path]:
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}, got {fmt!r}")
    out.mkdir(parents=True, exist_ok=True)
    (out / MANIFEST_FILE).write_text(manifest.echo(), encoding="utf-8")
    (out / SUMMARY_FILE).write_text(dumps(summary), encoding="utf-8")
    return [out / MANIFEST_FILE, out / SUMMARY_FILE, *write_samples(out, groups, manifest, fmt)]


def run_manifest(manifest: Manifest, out: str | Path | None = None, workers: int = 1,
                 fmt: str = "csv") -> tuple[ExperimentResult, dict]:
    """Run the manifest's experiment; write files under ``out`` when given."""
    exp_id = manifest.get("experiment")
    if not exp_id:
        raise ConfigError("manifest has no 'experiment' key")
    exp = get_experiment(exp_id)
    params = exp.params(manifest)
    result = exp.run(params, workers)
    summary = summary_dict(exp.id, params, result, manifest)
    if out is not None:
        write_outputs(Path(out), summary, result.samples, manifest, fmt)
    return result, summary
