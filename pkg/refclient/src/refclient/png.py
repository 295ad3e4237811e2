"""Tiny PNG reader: 8-bit grayscale or RGB, non-interlaced.

Enough to load the mask rasters from a benchmark world directory without
pulling in an imaging dependency. Returns the raw row-major pixel bytes,
which is exactly what the wire image payload carries.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

SIGNATURE = b"\x89PNG\r\n\x1a\n"

_CHANNELS = {0: 1, 2: 3}  # grayscale, truecolor


class PngError(ValueError):
    pass


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    return b if pb <= pc else c


def _unfilter(raw: bytes, width: int, height: int,
              bpp: int) -> bytearray:
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise PngError("decompressed data does not match the dimensions")
    out = bytearray()
    prev = bytearray(stride)
    pos = 0
    for _ in range(height):
        ftype = raw[pos]
        line = bytearray(raw[pos + 1:pos + 1 + stride])
        pos += 1 + stride
        if ftype == 1:    # Sub
            for i in range(bpp, stride):
                line[i] = (line[i] + line[i - bpp]) & 0xFF
        elif ftype == 2:  # Up
            for i in range(stride):
                line[i] = (line[i] + prev[i]) & 0xFF
        elif ftype == 3:  # Average
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + (left + prev[i]) // 2) & 0xFF
        elif ftype == 4:  # Paeth
            for i in range(stride):
                left = line[i - bpp] if i >= bpp else 0
                up_left = prev[i - bpp] if i >= bpp else 0
                line[i] = (line[i] + _paeth(left, prev[i], up_left)) & 0xFF
        elif ftype != 0:
            raise PngError(f"unsupported filter type {ftype}")
        out += line
        prev = line
    return out


def read_png(path) -> tuple[int, int, int, bytes]:
    """Read a PNG file: (width, height, channels, row-major pixel bytes)."""
    data = Path(path).read_bytes()
    if data[:8] != SIGNATURE:
        raise PngError(f"{path}: not a PNG file")
    pos = 8
    header = None
    idat = b""
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos:pos + 4])
        ctype = data[pos + 4:pos + 8]
        chunk = data[pos + 8:pos + 8 + length]
        pos += 12 + length
        if ctype == b"IHDR":
            header = struct.unpack(">IIBBBBB", chunk)
        elif ctype == b"IDAT":
            idat += chunk
        elif ctype == b"IEND":
            break
    if header is None:
        raise PngError(f"{path}: missing IHDR chunk")
    width, height, depth, color, comp, filt, interlace = header
    if depth != 8 or comp != 0 or filt != 0 or interlace != 0:
        raise PngError(f"{path}: only plain 8-bit non-interlaced supported")
    if color not in _CHANNELS:
        raise PngError(f"{path}: unsupported color type {color}")
    channels = _CHANNELS[color]
    try:
        raw = zlib.decompress(idat)
    except zlib.error as exc:
        raise PngError(f"{path}: bad image data: {exc}") from exc
    pixels = _unfilter(raw, width, height, channels)
    return width, height, channels, bytes(pixels)
