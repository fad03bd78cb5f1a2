"""CSV and JSON exchange formats.

Parameter sets are UTF-8 CSV with one header row of dimension names and one
numeric row per scenario, LF line endings. Lines starting with ``#`` are
comments; output files use one to record provenance.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation


class CsvFormatError(ContractViolation):
    """A CSV input could not be parsed; the message names the row and column."""


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_parameter_csv(path, expected_dims: int | None = None) -> tuple[list[str], np.ndarray]:
    """Read a parameter-set CSV into ``(names, points)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CsvFormatError(f"{path}: cannot read ({exc})") from exc
    rows = []
    header = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if header is None:
            header = [f.strip() for f in fields]
            if not header or any(not h for h in header):
                raise CsvFormatError(f"{path}:{lineno}: header has empty column names")
            continue
        if len(fields) != len(header):
            raise CsvFormatError(
                f"{path}:{lineno}: expected {len(header)} columns, found {len(fields)}"
            )
        row = []
        for col, raw in enumerate(fields, start=1):
            try:
                value = float(raw)
            except ValueError:
                raise CsvFormatError(
                    f"{path}:{lineno}: column {col} ({header[col - 1]!r}) is not a number: {raw!r}"
                ) from None
            if not math.isfinite(value):
                raise CsvFormatError(f"{path}:{lineno}: column {col} is not finite: {raw!r}")
            row.append(value)
        rows.append(row)
    if header is None:
        raise CsvFormatError(f"{path}: empty file, expected a header row")
    if not rows:
        raise CsvFormatError(f"{path}: no data rows after the header")
    if expected_dims is not None and len(header) != expected_dims:
        raise CsvFormatError(
            f"{path}:1: file has {len(header)} dimensions, configuration expects {expected_dims}"
        )
    return header, np.asarray(rows, dtype=float)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_parameter_csv(path, names: Sequence[str], points, comment: str | None = None) -> None:
    write_csv(path, names, np.asarray(points, dtype=float).tolist(), comment)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        # JSON has no infinities; infeasible costs are written as null
        return value if math.isfinite(value) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def config_digest(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved configuration."""
    canonical = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
