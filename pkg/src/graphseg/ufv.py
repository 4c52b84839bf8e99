"""UFV1 feature-file codec.

Layout: magic bytes ``UFV1``; little-endian u32 fields n, c_in, g_h, g_w;
then n·c_in float32 values (little-endian), row-major in patch row-major
order (patch row, then column within the row). Values are widened to
float64 on load; the engine's numerics run in doubles.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError
from .graph import FeatureMatrix

__all__ = ["read_ufv1", "write_ufv1", "UFV_MAGIC"]

UFV_MAGIC = b"UFV1"
_HEADER = struct.Struct("<4I")


def write_ufv1(path, values: np.ndarray, grid: tuple[int, int]) -> None:
    """Write an (n, c_in) float array as a UFV1 file (stored as float32)."""
    values = np.asarray(values)
    if values.ndim != 2:
        raise FormatError("feature payload must be 2-D")
    g_h, g_w = grid
    n, c_in = values.shape
    if g_h * g_w != n:
        raise FormatError(f"grid {g_h}x{g_w} does not cover {n} rows")
    with open(path, "wb") as fh:
        fh.write(UFV_MAGIC)
        fh.write(_HEADER.pack(n, c_in, g_h, g_w))
        fh.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def read_ufv1(path) -> FeatureMatrix:
    """Load a UFV1 file into a float64 FeatureMatrix, validating the contract."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != UFV_MAGIC:
        raise FormatError(f"{path}: bad magic {raw[:4]!r}, expected {UFV_MAGIC!r}")
    if len(raw) < 4 + _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    n, c_in, g_h, g_w = _HEADER.unpack_from(raw, 4)
    if g_h * g_w != n:
        raise FormatError(f"{path}: header grid {g_h}x{g_w} does not cover n={n}")
    expected = 4 + _HEADER.size + 4 * n * c_in
    if len(raw) != expected:
        raise FormatError(
            f"{path}: payload length mismatch, file has {len(raw)} bytes, expected {expected}"
        )
    payload = np.frombuffer(raw, dtype="<f4", offset=4 + _HEADER.size)
    values = payload.astype(np.float64).reshape(n, c_in)
    if not np.isfinite(values).all():
        raise DegenerateInputError(f"{path}: non-finite feature values")
    norms = np.linalg.norm(values, axis=1)
    bad = np.nonzero(norms <= 1e-12)[0]
    if bad.size:
        raise DegenerateInputError(f"{path}: zero-norm feature row at index {int(bad[0])}")
    return FeatureMatrix(values, (g_h, g_w))
