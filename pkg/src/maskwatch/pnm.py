"""Minimal binary P4 (bitmap) / P5 (graymap) reader and writer.

Segmentation masks arrive in these formats; any pixel value > 0 counts as a
predicted-positive ("true") pixel. For P4, a set bit (black per the format)
is true.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import PnmError
from .geometry import BitMask


def _read_header_tokens(buf: io.BufferedIOBase, n_tokens: int) -> list[int]:
    tokens: list[int] = []
    current = b""
    while len(tokens) < n_tokens:
        ch = buf.read(1)
        if ch == b"":
            raise PnmError("truncated header")
        if ch == b"#":
            while ch not in (b"\n", b""):
                ch = buf.read(1)
            continue
        if ch.isspace():
            if current:
                try:
                    tokens.append(int(current))
                except ValueError:
                    raise PnmError(f"bad header token {current!r}") from None
                current = b""
            continue
        current += ch
    return tokens


def read_mask(path: str | Path) -> BitMask:
    """Load a P4/P5 file as a boolean mask (value > 0 is true)."""
    with open(path, "rb") as f:
        magic = f.read(2)
        if magic == b"P4":
            w, h = _read_header_tokens(f, 2)
            if w < 1 or h < 1:
                raise PnmError("dimensions must be >= 1")
            row_bytes = (w + 7) // 8
            raw = f.read(row_bytes * h)
            if len(raw) != row_bytes * h:
                raise PnmError("truncated P4 raster")
            bits = np.unpackbits(
                np.frombuffer(raw, dtype=np.uint8).reshape(h, row_bytes), axis=1
            )
            return BitMask(bits[:, :w].astype(bool))
        if magic == b"P5":
            w, h, maxval = _read_header_tokens(f, 3)
            if w < 1 or h < 1:
                raise PnmError("dimensions must be >= 1")
            if not 0 < maxval < 65536:
                raise PnmError(f"bad maxval {maxval}")
            depth = 2 if maxval > 255 else 1
            raw = f.read(w * h * depth)
            if len(raw) != w * h * depth:
                raise PnmError("truncated P5 raster")
            dtype = ">u2" if depth == 2 else np.uint8
            pixels = np.frombuffer(raw, dtype=dtype).reshape(h, w)
            return BitMask(pixels > 0)
        raise PnmError(f"unsupported magic {magic!r} (want P4 or P5)")


def write_p4(path: str | Path, mask: BitMask) -> None:
    packed = np.packbits(mask.array.astype(np.uint8), axis=1)
    with open(path, "wb") as f:
        f.write(f"P4\n{mask.width} {mask.height}\n".encode())
        f.write(packed.tobytes())


def write_p5(path: str | Path, mask: BitMask, maxval: int = 255) -> None:
    pixels = np.where(mask.array, maxval, 0).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{mask.width} {mask.height}\n{maxval}\n".encode())
        f.write(pixels.tobytes())
