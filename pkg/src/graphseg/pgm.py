"""Binary mask I/O: PGM (P5/P2) plus 8-bit grayscale PNG ground truth.

Masks are written as binary PGM: ``P5`` header, maxval 255, foreground 255
and background 0. Ground-truth masks may be PGM or PNG; any pixel brighter
than 127 counts as foreground.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError

__all__ = ["write_pgm", "read_pgm", "read_mask"]


def write_pgm(path, bits: np.ndarray) -> None:
    """Write a {0,1} array as a maxval-255 binary PGM (foreground = 255)."""
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise FormatError("mask must be 2-D")
    if not np.isin(bits, (0, 1)).all():
        raise FormatError("mask entries must be 0 or 1")
    h, w = bits.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write((bits.astype(np.uint8) * 255).tobytes())


def _read_tokens(raw: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated ASCII integers, skipping # comments."""
    tokens: list[int] = []
    i = start
    while len(tokens) < count:
        while i < len(raw) and raw[i : i + 1].isspace():
            i += 1
        if i < len(raw) and raw[i : i + 1] == b"#":
            while i < len(raw) and raw[i] != 0x0A:
                i += 1
            continue
        j = i
        while j < len(raw) and not raw[j : j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PGM header")
        tokens.append(int(raw[i:j]))
        i = j
    return tokens, i


def read_pgm(path) -> np.ndarray:
    """Read a P5 or P2 PGM into a uint8 (h, w) array (maxval <= 255)."""
    raw = Path(path).read_bytes()
    magic = raw[:2]
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"{path}: not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _read_tokens(raw, 3, 2)
    if maxval <= 0 or maxval > 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    if magic == b"P5":
        pos += 1  # exactly one whitespace byte separates header and payload
        data = raw[pos : pos + w * h]
        if len(data) != w * h:
            raise FormatError(f"{path}: truncated pixel payload")
        return np.frombuffer(data, dtype=np.uint8).reshape(h, w)
    values, _ = _read_tokens(raw, w * h, pos)
    arr = np.array(values, dtype=np.int64)
    if arr.min() < 0 or arr.max() > maxval:
        raise FormatError(f"{path}: pixel value outside [0, {maxval}]")
    return arr.astype(np.uint8).reshape(h, w)


def read_mask(path) -> np.ndarray:
    """Read a ground-truth mask (PGM or PNG) as a {0,1} array; >127 is foreground."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        from PIL import Image

        with Image.open(path) as img:
            gray = np.asarray(img.convert("L"))
    else:
        gray = read_pgm(path)
    return (gray > 127).astype(np.uint8)
