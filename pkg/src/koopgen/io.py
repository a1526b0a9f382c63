"""On-disk formats: CSV matrices, JSON manifests and training-set directories."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .datagen import GenConfig, TrainingSet
from .dictionary import Dictionary
from .errors import IntegrityError

TRAININGSET_FORMAT = "koopgen.trainingset/1"
CSV_FMT = "%.16e"  # 17 significant digits, round-trips doubles


def write_csv(path, array, header: str | None = None) -> Path:
    path = Path(path)
    arr = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w", newline="\n") as fh:
        if header:
            fh.write(header + "\n")
        np.savetxt(fh, arr, fmt=CSV_FMT, delimiter=",")
    return path


def read_csv(path, header: bool = False) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=int(header), ndmin=2))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_table_csv(path, table: np.ndarray) -> Path:
    """Exponent table as CSV: header ``z_ij,j=0,...``, one row per ``i``."""
    table = np.asarray(table, dtype=float)
    lines = ["z_ij," + ",".join(f"j={j}" for j in range(table.shape[1]))]
    for i, row in enumerate(table):
        cells = ["" if np.isnan(v) else CSV_FMT % v for v in row]
        lines.append(f"i={i}," + ",".join(cells))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def read_table_csv(path) -> np.ndarray:
    rows = Path(path).read_text().strip().splitlines()[1:]
    return np.array([[float(c) if c else np.nan for c in r.split(",")[1:]] for r in rows])


def write_grid_csv(path, points, values) -> Path:
    points = np.atleast_2d(points)
    header = ",".join(f"x{k + 1}" for k in range(points.shape[1])) + ",value"
    return write_csv(path, np.column_stack([points, values]), header)


def save_training_set(ts: TrainingSet, directory, dictionary: Dictionary,
                      extra: dict | None = None) -> Path:
    """Write ``X.csv``, ``Y.csv``, ``samples.csv`` and ``manifest.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {
        "X.csv": write_csv(directory / "X.csv", ts.X),
        "Y.csv": write_csv(directory / "Y.csv", ts.Y),
        "samples.csv": write_csv(directory / "samples.csv", ts.samples),
    }
    manifest = {
        "format": TRAININGSET_FORMAT,
        "field": ts.field_spec,
        "gen_config": ts.config.to_json(),
        "dictionary": dictionary.manifest(),
        "shape": [ts.M, ts.N],
        "dropped_count": len(ts.dropped),
        "dropped_indices": ts.dropped,
        "diagnostics": ts.diagnostics,
        "hashes": {name: sha256_file(p) for name, p in files.items()},
    }
    if extra:
        manifest.update(extra)
    write_json(directory / "manifest.json", manifest)
    return directory


def load_training_set(directory):
    """Load and integrity-check a training-set directory.

    Returns ``(TrainingSet, Dictionary, manifest)``.
    """
    directory = Path(directory)
    try:
        manifest = read_json(directory / "manifest.json")
    except (OSError, ValueError) as exc:
        raise IntegrityError(f"cannot read manifest in {directory}: {exc}") from exc
    if manifest.get("format") != TRAININGSET_FORMAT:
        raise IntegrityError(f"{directory} is not a training-set directory")
    for name, digest in manifest.get("hashes", {}).items():
        p = directory / name
        if not p.exists() or sha256_file(p) != digest:
            raise IntegrityError(f"{p} does not match the manifest hash")
    dictionary = Dictionary.from_manifest(manifest["dictionary"])
    X = read_csv(directory / "X.csv")
    Y = read_csv(directory / "Y.csv")
    samples = read_csv(directory / "samples.csv")
    if X.shape != Y.shape or X.shape[1] != dictionary.N:
        raise IntegrityError("X/Y shapes disagree with the dictionary")
    ts = TrainingSet(X, Y, GenConfig.from_json(manifest["gen_config"]), dictionary.basis_id,
                     samples, manifest.get("field", ""), list(manifest.get("dropped_indices", [])),
                     manifest.get("diagnostics", {}))
    return ts, dictionary, manifest
