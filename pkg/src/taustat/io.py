"""Case line-list CSV ingestion and result serialisation."""
from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from pathlib import Path

import numpy as np

from .core import CaseSet
from .errors import MissingColumn, UnparseableRow, ValidationError

__all__ = [
    "REQUIRED_COLUMNS",
    "ingest_csv",
    "write_case_csv",
    "file_sha256",
    "to_jsonable",
    "dump_json",
    "write_json",
    "write_table",
    "convert_hagelloch",
]

REQUIRED_COLUMNS = ("id", "x", "y", "onset")


def _parse_float(text, line, column):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise UnparseableRow(line, f"column {column!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise UnparseableRow(line, f"column {column!r}: non-finite value {text!r}")
    return v


def ingest_csv(path) -> CaseSet:
    """Read a UTF-8 case CSV with header columns ``id, x, y, onset``.

    Extra columns are ignored and row order is preserved. Errors name the
    1-based line number of the offending row.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
        ids, xs, ys, ts = [], [], [], []
        for row in reader:
            line = reader.line_num
            if None in row.values():
                raise UnparseableRow(line, "too few fields")
            ids.append(row["id"])
            xs.append(_parse_float(row["x"], line, "x"))
            ys.append(_parse_float(row["y"], line, "y"))
            ts.append(_parse_float(row["onset"], line, "onset"))
    return CaseSet(ids, xs, ys, ts)


def write_case_csv(cs: CaseSet, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REQUIRED_COLUMNS)
        for rec in cs.cases:
            w.writerow([rec.id, repr(rec.x), repr(rec.y), repr(rec.onset)])


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def to_jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats for JSON output.

    NaN becomes ``null``; infinities become the strings ``"inf"``/``"-inf"``.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dump_json(doc) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc, path):
    Path(path).write_text(dump_json(doc), encoding="utf-8")


def _cell(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_table(path, header, rows):
    """Write a CSV with a header row; NaN cells are left empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def convert_hagelloch(src, dst, onset_column="tPRO", expected_n=188) -> CaseSet:
    """Convert an R export of ``surveillance::hagelloch.df`` to the case CSV.

    The export is produced in R with::

        data("hagelloch", package = "surveillance")
        write.csv(hagelloch.df, "hagelloch_raw.csv", row.names = FALSE)

    Columns used: ``PN`` (id), ``x.loc``, ``y.loc`` (metres) and the onset
    column, by default ``tPRO`` (time of prodromal symptoms, days).
    """
    with open(src, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        need = ["PN", "x.loc", "y.loc", onset_column]
        missing = [c for c in need if c not in header]
        if missing:
            raise MissingColumn(f"{src}: missing column(s) {', '.join(missing)}")
        ids, xs, ys, ts = [], [], [], []
        for row in reader:
            line = reader.line_num
            ids.append(row["PN"])
            xs.append(_parse_float(row["x.loc"], line, "x.loc"))
            ys.append(_parse_float(row["y.loc"], line, "y.loc"))
            ts.append(_parse_float(row[onset_column], line, onset_column))
    cs = CaseSet(ids, xs, ys, ts)
    if expected_n is not None and cs.n != expected_n:
        warnings.warn(f"converted {cs.n} cases, expected {expected_n}; check the source export")
    write_case_csv(cs, dst)
    return cs
