"""On-disk formats: CSV tables, density/report JSON, run manifests.

Floats are written with ``repr`` (shortest string that round-trips the
double), '.' decimal point, no thousands separators, header row on every
CSV. Identical data therefore produces byte-identical files.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from .errors import InputError
from .spectra import GridSpec, HeterogeneityReport, QuadratureRule, SpectralDensity

SCHEMA_VERSION = 1


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON file {path}: {exc}") from exc


# --- spectral densities ---


def write_density_csv(path, density: SpectralDensity, grid: GridSpec | None = None) -> None:
    if grid is None:
        grid = GridSpec.covering([density])
    ts = grid.ts()
    values = density.evaluate(ts)
    write_csv(path, ["t", "density"], zip(ts, values))


def write_density_json(path, density: SpectralDensity) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "label": density.label,
        "sigma": density.sigma,
        "meta": density.meta,
        "rules": [
            {"nodes": r.nodes.tolist(), "weights": r.weights.tolist()}
            for r in density.rules
        ],
    }
    write_json(path, payload)


def read_density_json(path) -> SpectralDensity:
    raw = read_json(path)
    try:
        rules = [
            QuadratureRule(np.asarray(r["nodes"]), np.asarray(r["weights"]))
            for r in raw["rules"]
        ]
        return SpectralDensity(rules, float(raw["sigma"]), raw.get("label", ""),
                               raw.get("meta", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed density file {path}: {exc}") from exc


def write_heatmap(csv_path, json_path, report: HeterogeneityReport) -> None:
    header = ["block"] + report.labels
    rows = [[label] + list(row) for label, row in zip(report.labels, report.pairwise)]
    write_csv(csv_path, header, rows)
    payload = dict(report.to_dict())
    payload["schema_version"] = SCHEMA_VERSION
    write_json(json_path, payload)


# --- trajectories and reports ---


def write_trajectory_csv(path, traj) -> None:
    steps = np.arange(len(traj.losses))
    write_csv(path, ["step", "loss", "rel_error"],
              zip(steps, traj.losses, traj.rel_errors))


def write_theory_report(path, report) -> None:
    payload = dict(report.to_dict())
    payload["schema_version"] = SCHEMA_VERSION
    write_json(path, payload)


# --- run manifests ---


def write_manifest(path, command: str, config: dict) -> None:
    """Echo of the fully resolved run configuration; the only file that may
    carry a timestamp."""
    write_json(path, {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": _to_jsonable(config),
        "created_unix": time.time(),
    })


def read_manifest(path):
    raw = read_json(path)
    for key in ("schema_version", "command", "config"):
        if key not in raw:
            raise InputError(f"manifest {path} is missing key {key!r}")
    return raw["command"], raw["config"]
