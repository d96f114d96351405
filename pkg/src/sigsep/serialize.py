"""Ensemble and report serialization.

Two interchangeable ensemble formats:

* JSONL — one path per line: ``{"weight": w, "times": [...],
  "values": [[...d floats...], ...]}``.
* long-format CSV — header ``path_id,t,ch1..chd``, one row per vertex,
  rows sorted by (path_id, t).  Unsorted input is rejected, not silently
  sorted.

Reports are JSON with sorted keys and no volatile fields, so identical
inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .ensembles import SignalEnsemble
from .errors import ParseError
from .paths import PiecewiseLinearPath


# ---------------------------------------------------------------------------
# JSONL

def dump_jsonl(ensemble: SignalEnsemble) -> str:
    lines = []
    for w, p in zip(ensemble.weights, ensemble.paths):
        doc = {"weight": float(w),
               "times": [float(t) for t in p.times],
               "values": [[float(v) for v in row] for row in p.values]}
        lines.append(json.dumps(doc, sort_keys=True))
    return "\n".join(lines) + "\n"


def parse_jsonl(text: str) -> SignalEnsemble:
    paths, weights = [], []
    for k, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {k + 1}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict) or not {"weight", "times", "values"} <= set(doc):
            raise ParseError(f"line {k + 1}: need keys weight, times, values")
        try:
            paths.append(PiecewiseLinearPath(np.asarray(doc["times"], dtype=float),
                                             np.asarray(doc["values"], dtype=float)))
            weights.append(float(doc["weight"]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"line {k + 1}: {exc}") from None
    if not paths:
        raise ParseError("no paths in input")
    return SignalEnsemble(tuple(paths), np.array(weights))


# ---------------------------------------------------------------------------
# long-format CSV

def dump_csv(ensemble: SignalEnsemble) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["path_id", "t"] + [f"ch{j + 1}" for j in range(ensemble.d)])
    for k, p in enumerate(ensemble.paths):
        for t, row in zip(p.times, p.values):
            writer.writerow([k, repr(float(t))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def parse_csv(text: str, weights=None) -> SignalEnsemble:
    """Parse long-format CSV.  Rows must already be sorted by
    (path_id, t); CSV carries no weights, so the ensemble is uniform
    unless ``weights`` is supplied."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty CSV input") from None
    if len(header) < 3 or header[:2] != ["path_id", "t"] or \
            header[2:] != [f"ch{j + 1}" for j in range(len(header) - 2)]:
        raise ParseError("CSV header must be path_id,t,ch1..chd")
    d = len(header) - 2
    groups, order = {}, []
    prev = None
    for k, row in enumerate(reader):
        if not row:
            continue
        if len(row) != d + 2:
            raise ParseError(f"row {k + 2}: expected {d + 2} columns")
        try:
            pid, t = int(row[0]), float(row[1])
            vals = [float(v) for v in row[2:]]
        except ValueError as exc:
            raise ParseError(f"row {k + 2}: {exc}") from None
        if prev is not None and (pid, t) <= prev:
            raise ParseError(
                f"row {k + 2}: rows must be strictly sorted by (path_id, t)")
        prev = (pid, t)
        if pid not in groups:
            groups[pid] = ([], [])
            order.append(pid)
        groups[pid][0].append(t)
        groups[pid][1].append(vals)
    if not groups:
        raise ParseError("no data rows in CSV input")
    paths = tuple(PiecewiseLinearPath(np.array(ts), np.array(vs))
                  for ts, vs in (groups[pid] for pid in order))
    w = None if weights is None else np.asarray(weights, dtype=float)
    return SignalEnsemble(paths, w)


# ---------------------------------------------------------------------------
# files and reports

def load_ensemble(path: str) -> SignalEnsemble:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if path.endswith(".csv"):
        return parse_csv(text)
    return parse_jsonl(text)


def save_ensemble(ensemble: SignalEnsemble, path: str, fmt=None):
    fmt = fmt or ("csv" if path.endswith(".csv") else "jsonl")
    text = dump_csv(ensemble) if fmt == "csv" else dump_jsonl(ensemble)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_report(doc: dict) -> str:
    """Deterministic JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_jsonable(doc), sort_keys=True, indent=1) + "\n"
