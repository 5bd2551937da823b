"""CSV datasets and FitReport serialization.

Labeled files have header ``y,x1,...,xp``; unlabeled covariate pools have
``x1,...,xp``. Floats are written with 17 significant digits so a round
trip reproduces every value exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .core import Dataset, FitReport
from .errors import TransDROError

FLOAT_FMT = "%.17g"
REPORT_SCHEMA = "transdro.fit/1"


class MalformedCSV(TransDROError, ValueError):
    """A CSV file does not follow the expected header or numeric layout."""


def _x_header(p: int) -> list:
    return [f"x{j}" for j in range(1, p + 1)]


def _parse_rows(path, rows, width, start_line):
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        line = start_line + i
        if len(row) != width:
            raise MalformedCSV(f"{path}: row {line} has {len(row)} fields, expected {width}")
        try:
            out[i] = [float(v) for v in row]
        except ValueError as exc:
            raise MalformedCSV(f"{path}: row {line}: {exc}") from None
        if not np.all(np.isfinite(out[i])):
            raise MalformedCSV(f"{path}: row {line} contains a non-finite value")
    return out


def _read(path):
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except (OSError, UnicodeDecodeError) as exc:
        raise MalformedCSV(f"{path}: cannot read: {exc}") from None
    if not rows:
        raise MalformedCSV(f"{path}: empty file")
    return path, [h.strip() for h in rows[0]], rows[1:]


def read_matrix_csv(path, prefix: str = "x") -> np.ndarray:
    """Numeric matrix from a file whose header is ``{prefix}1..{prefix}p``."""
    path, header, rows = _read(path)
    if header != [f"{prefix}{j}" for j in range(1, len(header) + 1)]:
        raise MalformedCSV(f"{path}: row 1: header must be {prefix}1,...,{prefix}p")
    if not rows:
        raise MalformedCSV(f"{path}: no data rows")
    return _parse_rows(path, rows, len(header), 2)


def read_labeled_csv(path, site_id: int = 0) -> Dataset:
    path, header, rows = _read(path)
    if not header or header[0] != "y" or header[1:] != _x_header(len(header) - 1) or len(header) < 2:
        raise MalformedCSV(f"{path}: row 1: header must be y,x1,...,xp")
    if not rows:
        raise MalformedCSV(f"{path}: no data rows")
    data = _parse_rows(path, rows, len(header), 2)
    return Dataset(data[:, 1:], data[:, 0], site_id)


def read_unlabeled_csv(path) -> np.ndarray:
    return read_matrix_csv(path, prefix="x")


def _write(path, header, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(data):
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")
    return path


def write_labeled_csv(path, data: Dataset):
    if not data.labeled:
        raise ValueError("dataset has no responses; use write_unlabeled_csv")
    return _write(path, ["y"] + _x_header(data.p), np.column_stack([data.y, data.x]))


def write_unlabeled_csv(path, x):
    x = np.asarray(x, dtype=np.float64)
    return _write(path, _x_header(x.shape[1]), x)


def write_coefficients_csv(path, coefs):
    """One coefficient vector per row, header ``x1..xp``."""
    coefs = np.atleast_2d(np.asarray(coefs, dtype=np.float64))
    return _write(path, _x_header(coefs.shape[1]), coefs)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def report_to_dict(report: FitReport) -> dict:
    """Stable-keyed mapping; ``weights[0]`` is the target column when augmented."""
    augmented = report.b0_hat is not None and report.b0_hat.augmented
    return _jsonable({
        "schema": REPORT_SCHEMA,
        "p": int(report.beta.shape[0]),
        "tau": report.tau,
        "sigma2_hat": report.sigma2_hat,
        "target_column": augmented,
        "weights": report.gamma.w,
        "coefficients": report.beta,
        "baseline_coefficients": report.baseline_beta,
        "diagnostics": dict(sorted(report.diagnostics.items())),
    })


def write_report_json(path, report: FitReport):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        # repr-precision floats keep the round trip exact
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")
    return path


def read_report_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    for key in ("weights", "coefficients", "baseline_coefficients"):
        d[key] = np.asarray(d[key], dtype=np.float64)
    d["tau"] = float(d["tau"])
    return d


def write_report_csv(path, report: FitReport):
    """Flat table: one row per coefficient, then one per weight."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "value"])
        for j, v in enumerate(report.beta, start=1):
            w.writerow(["coefficient", j, FLOAT_FMT % v])
        for j, v in enumerate(report.baseline_beta, start=1):
            w.writerow(["baseline", j, FLOAT_FMT % v])
        for j, v in enumerate(report.gamma.w):
            w.writerow(["weight", j, FLOAT_FMT % v])
    return path
