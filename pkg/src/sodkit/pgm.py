"""Binary (P5) PGM codec for 8-bit grayscale masks and saliency maps.

Only maxval 255 is accepted. Decode errors carry byte offsets so a corrupt
file can be inspected directly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError
from .grid import Grid2D

_WHITESPACE = b" \t\r\n\x0b\x0c"


def _read_token(data: bytes, pos: int):
    n = len(data)
    while pos < n:
        b = data[pos]
        if b in _WHITESPACE:
            pos += 1
        elif b == 0x23:  # '#': comment runs to end of line
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    if pos >= n:
        raise FormatError(f"header ended early at byte {pos}")
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos] != 0x23:
        pos += 1
    return data[start:pos], start, pos


def decode_pgm(data: bytes) -> Grid2D:
    """Parse P5 bytes into a grid of intensities in [0, 1]."""
    if data[:2] != b"P5":
        raise FormatError(f"expected magic 'P5' at byte 0, got {data[:2]!r}")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, start, pos = _read_token(data, pos)
        if not token.isdigit():
            raise FormatError(f"malformed {name} field at byte {start}: {token[:16]!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"image dims must be positive, got {width} x {height}")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError(f"expected one whitespace byte before pixel data at byte {pos}")
    pos += 1
    need = width * height
    have = len(data) - pos
    if have < need:
        raise FormatError(
            f"pixel data truncated at byte {len(data)}: need {need} bytes, have {have}")
    if have > need:
        raise FormatError(f"trailing data after pixel payload at byte {pos + need}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=need, offset=pos)
    return Grid2D(pixels.astype(np.float64).reshape(height, width) / 255.0)


def encode_pgm(grid: Grid2D) -> bytes:
    """Serialize a grid as P5 bytes; values are clamped to [0, 1] first.

    Quantization rounds half up: q = floor(v * 255 + 0.5).
    """
    v = np.clip(grid.data, 0.0, 1.0)
    q = np.floor(v * 255.0 + 0.5).astype(np.uint8)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + q.tobytes()


def read_pgm(path) -> Grid2D:
    """Load one P5 file from disk."""
    data = Path(path).read_bytes()
    try:
        return decode_pgm(data)
    except FormatError as err:
        raise FormatError(f"{path}: {err}") from None


def write_pgm(path, grid: Grid2D) -> None:
    """Write one P5 file to disk."""
    Path(path).write_bytes(encode_pgm(grid))
