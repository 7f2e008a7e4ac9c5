"""Flat-file formats: headerless numeric CSV, result CSV, JSON reports."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless comma-separated numeric table (blank lines and ``#`` comments skipped)."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except ValueError as exc:
        raise ValueError(f"malformed CSV {path}: {exc}") from exc
    if data.size == 0:
        raise ValueError(f"empty CSV: {path}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite values in {path}")
    return data


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, m: np.ndarray) -> None:
    lines = [",".join(format_float(v) for v in row) for row in np.atleast_2d(m)]
    Path(path).write_text("\n".join(lines) + "\n")


def metadata(command: str, **params) -> dict:
    return {"program": "wdro", "version": __version__, "command": command, "parameters": params}


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def write_rows_csv(path, rows, meta: dict) -> None:
    """Experiment rows: one ``#`` metadata line, then ``n,rho_hat`` header."""
    lines = ["# " + json.dumps(meta, sort_keys=True, separators=(",", ":")), "n,rho_hat"]
    lines += [f"{r.n},{format_float(r.rho_hat)}" for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def read_rows_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    return data[:, 0].astype(int), data[:, 1]
