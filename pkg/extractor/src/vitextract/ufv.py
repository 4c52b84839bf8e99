"""UFV1 writing and header parsing on the extractor side.

The format is shared with the segmentation engine: magic ``UFV1``,
little-endian u32 ``n, c_in, g_h, g_w``, then n*c_in little-endian float32
values in patch row-major order. The writer is atomic (temp file in the
target directory, then rename).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError

UFV_MAGIC = b"UFV1"
_HEADER = struct.Struct("<4I")


def write_ufv1_atomic(path, values: np.ndarray, grid: tuple[int, int]) -> None:
    path = Path(path)
    g_h, g_w = grid
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2 or values.shape[0] != g_h * g_w:
        raise ValidationError("payload-shape", f"{values.shape} does not fill grid {g_h}x{g_w}")
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(UFV_MAGIC)
            fh.write(_HEADER.pack(values.shape[0], values.shape[1], g_h, g_w))
            fh.write(values.tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def parse_ufv1(path) -> tuple[np.ndarray, tuple[int, int]]:
    """Strict parse of a UFV1 file; raises a named ValidationError on any violation."""
    raw = Path(path).read_bytes()
    if raw[:4] != UFV_MAGIC:
        raise ValidationError("magic", f"expected {UFV_MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < 4 + _HEADER.size:
        raise ValidationError("header-length", "file shorter than the fixed header")
    n, c_in, g_h, g_w = _HEADER.unpack_from(raw, 4)
    if g_h * g_w != n:
        raise ValidationError("grid", f"{g_h}x{g_w} does not cover n={n}")
    expected = 4 + _HEADER.size + 4 * n * c_in
    if len(raw) != expected:
        raise ValidationError("payload-length", f"file has {len(raw)} bytes, expected {expected}")
    values = np.frombuffer(raw, dtype="<f4", offset=4 + _HEADER.size).reshape(n, c_in)
    if not np.isfinite(values).all():
        raise ValidationError("finite", "payload contains NaN or Inf")
    return values, (g_h, g_w)
