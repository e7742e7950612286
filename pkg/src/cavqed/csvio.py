"""Bit-stable CSV emission and parsing.

Every file starts with ``#``-prefixed metadata lines (tool version, config
hash, seed, command context), then one header row.  Floats are serialized
with 9 significant digits and files are written atomically
(write-then-rename), so identical configuration and seed produce
byte-identical output.  No timestamps, ever.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

__all__ = ["format_float", "config_hash", "write_csv", "read_csv"]

_FLOAT_DIGITS = 9


def format_float(x) -> str:
    return f"{float(x):.{_FLOAT_DIGITS}g}"


def config_hash(config_dict: dict) -> str:
    """Stable 16-hex digest of a JSON-serializable configuration."""
    canonical = json.dumps(config_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path, columns: dict, meta: dict) -> None:
    """Write named columns with metadata; atomic replace on completion."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    length = arrays[0].shape[0]
    if any(a.shape != (length,) for a in arrays):
        raise ValueError("all columns must be 1-D and equally long")
    lines = [f"# {k}={_format_cell(v)}" for k, v in meta.items()]
    lines.append(",".join(names))
    for i in range(length):
        lines.append(",".join(_format_cell(a[i]) for a in arrays))
    payload = "\n".join(lines) + "\n"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(payload)
    os.replace(tmp, path)


def read_csv(path):
    """Parse a file written by :func:`write_csv`.

    Returns (meta, columns) where columns maps each header name to a numpy
    array (float when possible, strings otherwise).
    """
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, value = body.split("=", 1)
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = [c.strip() for c in line.split(",")]
                continue
            rows.append([c.strip() for c in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row found")
    columns = {}
    for j, name in enumerate(header):
        cells = [r[j] for r in rows]
        try:
            columns[name] = np.array([float(c) for c in cells])
        except ValueError:
            columns[name] = np.array(cells)
    return meta, columns
