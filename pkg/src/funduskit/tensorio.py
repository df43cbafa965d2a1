"""Raster and tensor file IO.

Byte-range images travel as PNG/JPEG. Unit-range tensors use a flat
little-endian float32 file with a 16-byte header: magic ``FPT1`` followed
by height, width, and channels as unsigned 32-bit integers. Data is
row-major (height, width, channel).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import TensorFormatError
from .imaging import ImageBuffer, RangeTag

MAGIC = b"FPT1"
_HEADER = struct.Struct("<4sIII")

__all__ = ["read_image", "write_image", "read_tensor", "write_tensor", "MAGIC"]


def read_image(path: str | Path) -> ImageBuffer:
    """Load a PNG/JPEG raster as a byte-range image buffer."""
    with Image.open(path) as im:
        data = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return ImageBuffer(data, RangeTag.BYTE255)


def write_image(path: str | Path, img: ImageBuffer) -> None:
    """Write a byte-range image buffer as PNG/JPEG (format from suffix)."""
    if img.range_tag is not RangeTag.BYTE255:
        raise ValueError("write_image expects a byte-range image")
    Image.fromarray(img.data.astype(np.uint8)).save(path)


def write_tensor(path: str | Path, img: ImageBuffer) -> None:
    """Write a unit-range image as an FPT1 float tensor file."""
    if img.range_tag is not RangeTag.UNIT:
        raise ValueError("write_tensor expects a unit-range image")
    header = _HEADER.pack(MAGIC, img.height, img.width, img.channels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img.data, dtype="<f4").tobytes())


def read_tensor(path: str | Path) -> ImageBuffer:
    """Read an FPT1 float tensor file back into a unit-range buffer."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TensorFormatError(f"{path}: truncated header")
    magic, height, width, channels = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TensorFormatError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 4 * height * width * channels
    if len(raw) != expected:
        raise TensorFormatError(
            f"{path}: expected {expected} bytes for {height}x{width}x{channels}, "
            f"got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return ImageBuffer(data.reshape(height, width, channels).copy(), RangeTag.UNIT)
