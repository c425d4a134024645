"""Dataset CSV and P-PCA model files.

Binary model layout (little-endian)::

    8 bytes   magic b"VBPPCA01"
    uint32    n_x
    uint32    n_z
    float64   sigma
    float64   c_r entries, n_x * n_z values, row-major
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .ppca import Dataset, PpcaModel

MAGIC = b"VBPPCA01"
_HEADER = struct.Struct("<8sIId")


class FormatError(ValueError):
    pass


def write_csv(path, points, header: list[str] | None = None) -> None:
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in points:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_csv(path, header: bool = False, n_x: int | None = None) -> Dataset:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    if n_x is not None and width != n_x:
        raise FormatError(f"{path}: {width} columns, expected {n_x}")
    arr = np.array(rows)
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{path}: non-finite values")
    return Dataset(arr)


def save_model(path, model: PpcaModel) -> None:
    path = Path(path)
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, model.n_x, model.n_z, model.sigma))
            fh.write(np.ascontiguousarray(model.c_r, dtype="<f8").tobytes())
    else:
        doc = {
            "n_x": model.n_x,
            "n_z": model.n_z,
            "sigma": model.sigma,
            "c_r": [float(v) for v in model.c_r.ravel()],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n")


def load_model(path) -> PpcaModel:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(MAGIC):
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        _, n_x, n_z, sigma = _HEADER.unpack_from(raw)
        body = raw[_HEADER.size:]
        if len(body) != 8 * n_x * n_z:
            raise FormatError(f"{path}: expected {n_x * n_z} entries")
        c_r = np.frombuffer(body, dtype="<f8").reshape(n_x, n_z).astype(np.float64)
        return PpcaModel.from_loading(c_r, sigma)
    try:
        doc = json.loads(raw)
        n_x, n_z = int(doc["n_x"]), int(doc["n_z"])
        c_r = np.asarray(doc["c_r"], dtype=np.float64)
        sigma = float(doc["sigma"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a model file ({exc})") from None
    if c_r.size != n_x * n_z:
        raise FormatError(f"{path}: c_r has {c_r.size} entries, expected {n_x * n_z}")
    return PpcaModel.from_loading(c_r.reshape(n_x, n_z), sigma)
