"""Binary PGM/PPM readers and writers for masks and frames.

Fuzzy masks travel as 16-bit P5 (maxval 65535, big-endian), binary masks as
8-bit P5 with 0 = background and 255 = foreground, frames as 8-bit P6.
"""
from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(rb"(?:\s|^)(?:#[^\n]*\n\s*)*([0-9]+)")


def _read_header(data: bytes, magic: bytes, ntokens: int):
    if not data.startswith(magic):
        raise ValueError(f"expected {magic.decode()} file")
    tokens = []
    pos = len(magic)
    while len(tokens) < ntokens:
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ValueError("truncated PNM header")
        tokens.append(int(m.group(1)))
        pos = m.end()
    # header ends with exactly one whitespace byte before the raster
    return tokens, pos + 1


def write_pgm(path, values: np.ndarray, maxval: int = 255) -> None:
    """Write a grayscale array as binary PGM (P5)."""
    values = np.asarray(values)
    h, w = values.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n%d\n" % (w, h, maxval))
        f.write(np.ascontiguousarray(values.astype(dtype)).tobytes())


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary PGM; returns (array, maxval)."""
    with open(path, "rb") as f:
        data = f.read()
    (w, h, maxval), offset = _read_header(data, b"P5", 3)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    raster = np.frombuffer(data, dtype=dtype, count=w * h, offset=offset)
    return raster.reshape(h, w).astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_ppm(path, image: np.ndarray) -> None:
    """Write an HxWx3 uint8 array as binary PPM (P6)."""
    h, w, c = image.shape
    if c != 3:
        raise ValueError("PPM requires 3 channels")
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(image.astype(np.uint8)).tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    (w, h, maxval), offset = _read_header(data, b"P6", 3)
    if maxval != 255:
        raise ValueError("only maxval 255 PPM supported")
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=offset)
    return raster.reshape(h, w, 3).copy()


def write_fuzzy_pgm(path, values: np.ndarray) -> None:
    """Store a [0,1] grid as 16-bit PGM, value = round(65535 * v)."""
    scaled = np.rint(np.clip(values, 0.0, 1.0) * 65535.0)
    write_pgm(path, scaled, maxval=65535)


def read_fuzzy_pgm(path) -> np.ndarray:
    raster, maxval = read_pgm(path)
    return raster.astype(np.float64) / float(maxval)


def write_binary_pgm(path, bits: np.ndarray) -> None:
    """Store a 0/1 grid as 8-bit PGM with foreground = 255."""
    write_pgm(path, np.where(np.asarray(bits) > 0, 255, 0), maxval=255)


def read_binary_mask(path) -> np.ndarray:
    """Load an 8-bit mask (PGM or PNG) and threshold at 128."""
    p = str(path)
    if p.endswith(".png"):
        from matplotlib import image as mpimg

        arr = mpimg.imread(p)
        if arr.ndim == 3:
            arr = arr[..., 0]
        return (arr >= 0.5).astype(np.uint8)
    raster, maxval = read_pgm(p)
    return (raster.astype(np.int32) >= (maxval + 1) // 2).astype(np.uint8)
