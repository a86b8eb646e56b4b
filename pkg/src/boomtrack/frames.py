"""Frame representation, PGM/PPM I/O and the raster transforms used downstream.

Pixel coordinates follow the continuous convention used throughout the
package: pixel ``(row, col)`` covers ``[col, col+1) x [row, row+1)``, so its
center sits at ``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from boomtrack._io import atomic_write_bytes

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Base class for image decoding failures."""


class MalformedHeaderError(ImageFormatError):
    pass


class TruncatedImageError(ImageFormatError):
    pass


@dataclass(frozen=True, eq=False)
class Frame:
    """An immutable 8-bit raster with a capture timestamp in seconds."""

    pixels: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValueError(f"pixels must be HxW or HxWx3, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame dimensions must be positive")
        if px.dtype != np.uint8:
            if np.issubdtype(px.dtype, np.integer) or np.issubdtype(px.dtype, np.floating):
                if px.size and (px.min() < 0 or px.max() > 255):
                    raise ValueError("samples must lie in [0, 255]")
        if not np.isfinite(self.timestamp) or self.timestamp < 0:
            raise ValueError(f"timestamp must be a non-negative real, got {self.timestamp}")
        # private copy, so freezing it never touches the caller's array
        px = np.array(px, dtype=np.uint8, order="C")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "timestamp", float(self.timestamp))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.pixels.shape == other.pixels.shape
            and self.timestamp == other.timestamp
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    def __hash__(self) -> int:
        return hash((self.pixels.shape, self.timestamp, self.pixels.tobytes()))

    def with_timestamp(self, t: float) -> "Frame":
        return Frame(self.pixels, t)


# ---------------------------------------------------------------------------
# PGM / PPM
# ---------------------------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_header(data: bytes) -> tuple[bytes, int, int, int, int]:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise MalformedHeaderError("incomplete PNM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic, w, h, maxval = tokens
    if magic not in (b"P5", b"P6"):
        raise MalformedHeaderError(f"unsupported magic {magic!r}; expected P5 or P6")
    try:
        width, height, mv = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer header field: {exc}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"bad dimensions {width}x{height}")
    if mv != 255:
        raise MalformedHeaderError(f"only maxval 255 is supported, got {mv}")
    if pos >= len(data) or data[pos : pos + 1] not in (b" ", b"\n", b"\r", b"\t"):
        raise MalformedHeaderError("missing whitespace after maxval")
    return magic, width, height, mv, pos + 1


def meta_path(path: str | os.PathLike) -> Path:
    return Path(str(path) + ".meta")


def read_sidecar_timestamp(path: str | os.PathLike) -> float | None:
    meta = meta_path(path)
    if not meta.exists():
        return None
    for line in meta.read_text(encoding="utf-8").splitlines():
        key, sep, value = line.partition("=")
        if sep and key.strip() == "timestamp":
            return float(value)
    return None


def load_image(path: str | os.PathLike, timestamp: float | None = None) -> Frame:
    """Read a binary PGM (P5) or PPM (P6) file.

    The timestamp comes from ``timestamp`` if given, otherwise from a
    ``<image>.meta`` sidecar holding a ``timestamp=<seconds>`` line, else 0.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image not found: {path}")
    data = path.read_bytes()
    magic, width, height, _, offset = _read_header(data)
    channels = 1 if magic == b"P5" else 3
    n = width * height * channels
    body = data[offset : offset + n]
    if len(body) < n:
        raise TruncatedImageError(
            f"{path}: header declares {width}x{height}x{channels} = {n} bytes, found {len(body)}"
        )
    arr = np.frombuffer(body, dtype=np.uint8)
    arr = arr.reshape((height, width) if channels == 1 else (height, width, 3))
    if timestamp is None:
        timestamp = read_sidecar_timestamp(path)
    return Frame(arr.copy(), 0.0 if timestamp is None else timestamp)


def encode_pnm(f: Frame) -> bytes:
    magic = b"P5" if f.channels == 1 else b"P6"
    header = b"%s\n%d %d\n255\n" % (magic, f.width, f.height)
    return header + f.pixels.tobytes()


def save_image(f: Frame, path: str | os.PathLike, write_meta: bool = False) -> None:
    """Write ``f`` as P5 (gray) or P6 (RGB); optionally emit the timestamp sidecar."""
    atomic_write_bytes(path, encode_pnm(f))
    if write_meta:
        atomic_write_bytes(meta_path(path), f"timestamp={f.timestamp!r}\n".encode())


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5)


def to_grayscale(f: Frame) -> Frame:
    if f.channels == 1:
        return f
    rgb = f.pixels.astype(np.float64)
    luma = LUMA_WEIGHTS[0] * rgb[..., 0] + LUMA_WEIGHTS[1] * rgb[..., 1] + LUMA_WEIGHTS[2] * rgb[..., 2]
    # guards 254.99999... for white
    luma = _round_half_up(luma + 1e-9)
    return Frame(np.clip(luma, 0, 255).astype(np.uint8), f.timestamp)


def gray_array(f: Frame) -> np.ndarray:
    """Grayscale samples as float64, converting RGB frames first."""
    return to_grayscale(f).pixels.astype(np.float64)


def downscale(f: Frame, factor: int) -> Frame:
    """Block-mean reduction by an integer factor (round half up)."""
    factor = int(factor)
    if factor < 1:
        raise ValueError(f"reduction factor must be >= 1, got {factor}")
    if factor == 1:
        return f
    if factor > f.width or factor > f.height:
        raise ValueError(f"reduction factor {factor} exceeds frame size {f.width}x{f.height}")
    h, w = f.height // factor, f.width // factor
    px = f.pixels[: h * factor, : w * factor].astype(np.int64)
    if f.channels == 1:
        blocks = px.reshape(h, factor, w, factor).sum(axis=(1, 3))
    else:
        blocks = px.reshape(h, factor, w, factor, 3).sum(axis=(1, 3))
    n = factor * factor
    out = (2 * blocks + n) // (2 * n)
    return Frame(out.astype(np.uint8), f.timestamp)
