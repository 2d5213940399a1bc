"""On-disk formats: CSV series, JSON documents and binary field snapshots.

CSV files have one header row, '.' decimals, LF line endings and reals
written with 17 significant digits, so a read-back reproduces every float
bit for bit.  Snapshots are

    8-byte magic | uint64 LE header length | JSON header | float64 LE data
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

SNAPSHOT_MAGIC = b"WDSNAP01"


class InputError(Exception):
    """Missing, unreadable or misaligned input data."""


def format_real(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path: Path, columns: Sequence[str], rows) -> Path:
    """Write rows of reals under a header naming ``columns``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
        writer.writerow([format_real(v) for v in row])
    path = Path(path)
    path.write_bytes(buf.getvalue().encode("ascii"))
    return path


def write_columns(path: Path, data: Mapping[str, np.ndarray]) -> Path:
    """Write equal-length arrays as CSV columns, in mapping order."""
    names = list(data)
    cols = [np.asarray(data[k], dtype=float) for k in names]
    return write_csv(path, names, zip(*cols))


def read_csv(path: Path) -> dict[str, np.ndarray]:
    """Read a CSV written by ``write_csv`` into float columns."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing file {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{i}: expected {len(header)} fields, found {len(row)}")
    try:
        data = np.array(body, dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric field ({exc})") from None
    return {name: data[:, i].copy() for i, name in enumerate(header)}


def dumps_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_bytes(dumps_json(obj).encode("utf-8"))
    return path


def read_json(path: Path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"missing file {path}")
    return json.loads(path.read_text())


def _plain(obj):
    """Convert numpy scalars and arrays, tuples and Paths to JSON types."""
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_snapshot(path: Path, arrays: Mapping[str, np.ndarray], meta: Mapping) -> Path:
    """Store named float64 arrays (all of one shape) with a JSON header."""
    names = list(arrays)
    if not names:
        raise ValueError("nothing to store")
    shape = np.shape(arrays[names[0]])
    for k in names:
        if np.shape(arrays[k]) != shape:
            raise ValueError("snapshot arrays must share one shape")
    header = dict(meta)
    header.update(shape=list(shape), fields=names, dtype="<f8")
    head = json.dumps(_plain(header), sort_keys=True).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for k in names:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())
    return Path(path)


def read_snapshot(path: Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise InputError(f"{path}: not a snapshot file")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16 : 16 + n])
    shape = tuple(header["shape"])
    size = int(np.prod(shape))
    data = np.frombuffer(raw, dtype="<f8", offset=16 + n)
    if data.size != size * len(header["fields"]):
        raise InputError(f"{path}: truncated data")
    arrays = {
        k: data[i * size : (i + 1) * size].reshape(shape).copy()
        for i, k in enumerate(header["fields"])
    }
    return header, arrays
