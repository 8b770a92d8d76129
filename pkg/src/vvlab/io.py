"""Binary field dumps, CSV tables and JSON manifests.

Dump layout (all little-endian, see ``docs/field-dump.md``)::

    offset  size  content
    0       4     magic b"VVLB"
    4       4     uint32 format version (1)
    8       4     uint32 N_x
    12      4     uint32 N_y (number of nodes in the second coordinate)
    16      8     float64 eps (0.0 for eps-independent expansion terms)
    24      32    field name, ASCII, NUL padded
    56      8*N_x*N_y  float64 samples, row-major with x varying slowest
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MAGIC = b"VVLB"
VERSION = 1
HEADER = struct.Struct("<4sIIId32s")
NAME_BYTES = 32


class DumpError(ValueError):
    """Malformed field dump."""


@dataclass(frozen=True)
class DumpHeader:
    version: int
    n_x: int
    n_y: int
    eps: float
    name: str


def encode_field(samples: np.ndarray, eps: float, name: str) -> bytes:
    a = np.ascontiguousarray(samples, dtype="<f8")
    if a.ndim != 2:
        raise DumpError("a field dump holds a two-dimensional array")
    raw = name.encode("ascii")
    if len(raw) > NAME_BYTES:
        raise DumpError(f"field name longer than {NAME_BYTES} bytes")
    head = HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1], float(eps), raw.ljust(NAME_BYTES, b"\0"))
    return head + a.tobytes(order="C")


def decode_field(blob: bytes) -> tuple[DumpHeader, np.ndarray]:
    if len(blob) < HEADER.size:
        raise DumpError("truncated header")
    magic, ver, nx, ny, eps, raw = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DumpError("not a VVLB field dump")
    if ver != VERSION:
        raise DumpError(f"unsupported dump version {ver}")
    body = blob[HEADER.size:]
    if len(body) != 8 * nx * ny:
        raise DumpError("payload size does not match the header")
    data = np.frombuffer(body, dtype="<f8").reshape(nx, ny).astype(float)
    return DumpHeader(ver, nx, ny, eps, raw.rstrip(b"\0").decode("ascii")), data


def write_field(path: str | Path, samples: np.ndarray, eps: float, name: str) -> str:
    """Write a dump and return the SHA-256 of its bytes."""
    blob = encode_field(samples, eps, name)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_field(path: str | Path) -> tuple[DumpHeader, np.ndarray]:
    return decode_field(Path(path).read_bytes())


def fmt17(x) -> str:
    """17 significant digits; integers and strings pass through; non-finite as nan/inf."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt17(x) for x in r])
    return buf.getvalue()


def dat_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Whitespace-separated columns with a ``#`` header line, for gnuplot."""
    lines = ["# " + " ".join(header)]
    lines += [" ".join(fmt17(x) or "nan" for x in r) for r in rows]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(obj) -> str:
    """Deterministic JSON: sorted keys, fixed separators, floats via repr."""
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"
