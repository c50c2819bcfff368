"""Serialization helpers: structured text documents and columnar files.

Structured documents are JSON objects.  Float arrays are stored as decimal
strings with 17 significant digits so grid tables round-trip bit-exactly.
Columnar data is plain whitespace-delimited text, or a raw block of
little-endian float64 values when the file name ends in ``.bin``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

BINARY_SUFFIXES = (".bin", ".f64")


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def encode_array(a) -> list:
    return [fmt_float(v) for v in np.asarray(a, dtype=float).ravel()]


def decode_array(items) -> np.ndarray:
    return np.array([float(v) for v in items], dtype=float)


def encode_scalar(x):
    """JSON-safe scalar: non-finite floats become strings."""
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else fmt_float(x)
    return x


def decode_scalar(x):
    if isinstance(x, str) and x in ("inf", "-inf", "nan"):
        return float(x)
    return x


def jsonable(obj):
    """Recursively convert numpy containers and scalars to JSON-safe values."""
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_array(obj) if obj.dtype.kind == "f" else obj.tolist()
    return encode_scalar(obj)


def dumps(doc) -> str:
    return json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_document(path, doc) -> Path:
    path = Path(path)
    path.write_text(dumps(doc), encoding="utf-8")
    return path


def read_document(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_columnar(path, columns: np.ndarray, header: str | None = None) -> Path:
    """Write a 2-D array row by row; format chosen from the file extension."""
    path = Path(path)
    data = np.atleast_2d(np.asarray(columns, dtype=float))
    if path.suffix in BINARY_SUFFIXES:
        path.write_bytes(data.astype("<f8").tobytes())
    else:
        lines = [] if header is None else ["# " + header]
        lines += [" ".join(fmt_float(v) for v in row) for row in data]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_columnar(path, ncols: int | None = None) -> np.ndarray:
    path = Path(path)
    if path.suffix in BINARY_SUFFIXES:
        if ncols is None:
            raise ValueError("binary blocks need the column count")
        flat = np.frombuffer(path.read_bytes(), dtype="<f8")
        return flat.reshape(-1, ncols).astype(float)
    rows = [
        [float(v) for v in line.split()]
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return np.array(rows, dtype=float)
