"""On-disk formats: FGRID v1 grids and 8-bit PGM previews.

FGRID v1 stores a 2-D array as two files sharing a stem: ``<stem>.json``
holds ``{rows, cols, dtype, byte_order}`` and ``<stem>.bin`` holds the
row-major little-endian payload.  dtype "f32" is float32, "c64" is
complex64.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError

_DTYPES = {
    "f32": np.dtype("<f4"),
    "c64": np.dtype("<c8"),
}

FGRID_FORMAT = "FGRID v1"


def save_fgrid(stem, array) -> Path:
    """Write ``<stem>.json`` + ``<stem>.bin`` and return the sidecar path."""
    stem = Path(stem)
    arr = np.asarray(array)
    if arr.ndim != 2:
        raise InvalidInputError(f"FGRID stores 2-D arrays, got shape {arr.shape}")
    if np.iscomplexobj(arr):
        payload = np.ascontiguousarray(arr, dtype=_DTYPES["c64"])
        dtype = "c64"
    else:
        payload = np.ascontiguousarray(arr, dtype=_DTYPES["f32"])
        dtype = "f32"
    sidecar = {
        "format": FGRID_FORMAT,
        "rows": int(arr.shape[0]),
        "cols": int(arr.shape[1]),
        "dtype": dtype,
        "byte_order": "little",
    }
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    stem.with_suffix(".bin").write_bytes(payload.tobytes())
    return stem.with_suffix(".json")


def load_fgrid(stem) -> np.ndarray:
    """Load an FGRID v1 file pair; accepts the stem or the sidecar path."""
    stem = Path(stem)
    if stem.suffix == ".json":
        stem = stem.with_suffix("")
    sidecar_path = stem.with_suffix(".json")
    try:
        sidecar = json.loads(sidecar_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read FGRID sidecar {sidecar_path}: {exc}") from exc
    for key in ("rows", "cols", "dtype", "byte_order"):
        if key not in sidecar:
            raise ParseError(f"FGRID sidecar {sidecar_path} missing field '{key}'")
    if sidecar["byte_order"] != "little":
        raise ParseError(f"unsupported byte order {sidecar['byte_order']!r}")
    if sidecar["dtype"] not in _DTYPES:
        raise ParseError(f"unsupported FGRID dtype {sidecar['dtype']!r}")
    rows, cols = int(sidecar["rows"]), int(sidecar["cols"])
    raw = stem.with_suffix(".bin").read_bytes()
    dt = _DTYPES[sidecar["dtype"]]
    expected = rows * cols * dt.itemsize
    if len(raw) != expected:
        raise ParseError(
            f"FGRID payload {stem.with_suffix('.bin')} has {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype=dt).reshape(rows, cols).copy()


def write_pgm(path, image) -> Path:
    """Write a min-max normalized 8-bit binary PGM (P5) preview."""
    path = Path(path)
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidInputError(f"PGM export needs a 2-D image, got shape {img.shape}")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        scaled = (img - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(img)
    data = np.round(scaled * 255.0).astype(np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + data.tobytes())
    return path
