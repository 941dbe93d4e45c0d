"""Binary checkpoint container.

Layout (all integers little-endian)::

    offset  size  content
    0       8     magic b"CHFCKPT1"
    8       4     uint32 H, byte length of the JSON header
    12      H     UTF-8 JSON header
    12+H    ...   field payloads, back to back

The header holds ``nx, ny, Lx, Ly, t, v0_sup``, optional run metadata
and a ``fields`` list of ``{"name", "shape"}`` entries in payload order:
``n, v, w, ux, uy, p``.  Each payload is a little-endian float64 array in
row-major (C) order with the listed shape: scalars ``(nx, ny)``, ``ux``
``(nx+1, ny)``, ``uy`` ``(nx, ny+1)``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .diagnostics import RunMetadata
from .grid import Grid, VectorField

MAGIC = b"CHFCKPT1"
FIELD_ORDER = ("n", "v", "w", "ux", "uy", "p")


def save_checkpoint(path, state, meta: RunMetadata | None = None) -> Path:
    path = Path(path)
    g = state.grid
    arrays = {"n": state.n, "v": state.v, "w": state.w, "ux": state.u.x, "uy": state.u.y, "p": state.p}
    header = {
        "format": "chemofluid-checkpoint", "version": 1,
        "nx": g.nx, "ny": g.ny, "Lx": g.Lx, "Ly": g.Ly,
        "t": state.t, "v0_sup": state.v0_sup,
        "meta": asdict(meta) if meta is not None else None,
        "fields": [{"name": k, "shape": list(arrays[k].shape)} for k in FIELD_ORDER],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for k in FIELD_ORDER:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())
    tmp.replace(path)
    return path


def is_checkpoint(path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(len(MAGIC)) == MAGIC
    except OSError:
        return False


def load_checkpoint(path):
    """Return ``(state, meta)``; ``meta`` is None if the file carries none."""
    from .solver import SystemState

    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise OSError(f"{path} is not a checkpoint (bad magic)")
    try:
        (hlen,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12:12 + hlen].decode())
        offset = 12 + hlen
        arrays = {}
        for entry in header["fields"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            arrays[entry["name"]] = (np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
                                     .reshape(shape).astype(float))
            offset += 8 * count
    except (struct.error, ValueError, KeyError, TypeError) as exc:
        raise OSError(f"{path}: corrupt checkpoint ({exc})") from exc
    if offset != len(raw):
        raise OSError(f"{path}: trailing or missing payload bytes")
    g = Grid(header["nx"], header["ny"], header["Lx"], header["Ly"])
    state = SystemState(g, header["t"], arrays["n"], arrays["v"], arrays["w"],
                        VectorField(arrays["ux"], arrays["uy"]), arrays["p"], header["v0_sup"])
    meta = RunMetadata(**header["meta"]) if header.get("meta") else None
    return state, meta
