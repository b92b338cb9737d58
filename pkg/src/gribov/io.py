"""Deterministic, atomic writers for CSV, JSON and gnuplot data files.

Payloads carry no timestamps; run metadata goes to a ``<path>.meta.json``
sidecar so identical configurations produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "format_number",
    "atomic_write_text",
    "csv_text",
    "write_csv",
    "write_json",
    "read_json",
    "write_gnuplot",
    "write_sidecar",
    "jsonable",
]


def format_number(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(value) -> str:
    if isinstance(value, str):
        return value
    return format_number(value)


def csv_text(header: Sequence, rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n", quoting=csv.QUOTE_NONE, escapechar="\\")
    writer.writerow([_cell(h) for h in header])
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header: Sequence, rows: Iterable[Sequence]) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "tolist"):
        return jsonable(obj.tolist())
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [jsonable(obj.real), jsonable(obj.imag)]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, payload) -> Path:
    # repr-based float output is the shortest string that round-trips exactly
    text = json.dumps(jsonable(payload), indent=2, allow_nan=False) + "\n"
    return atomic_write_text(path, text)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_gnuplot(path, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    lines = [f"# {c}" for c in comments]
    lines.append("# " + " ".join(columns))
    for row in rows:
        lines.append(" ".join(_cell(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def write_sidecar(path, metadata: dict) -> Path:
    side = Path(str(path) + ".meta.json")
    return atomic_write_text(side, json.dumps(jsonable(metadata), indent=2, sort_keys=True) + "\n")
