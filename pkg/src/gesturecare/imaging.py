"""Raster image types, binary PNM (P5/P6) file I/O, and color transforms.

PNM was picked as the only raster format: it is dependency-free and the
encoder is canonical, so files round-trip byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PnmError(ValueError):
    """Base class for PNM decode failures."""


class UnsupportedFormat(PnmError):
    """Magic other than P5/P6, or maxval != 255."""


class BadHeader(PnmError):
    """Missing or non-numeric header fields."""


class Truncated(PnmError):
    """Fewer raster bytes than the header promises."""


class WrongChannels(ValueError):
    """Operation received an image with the wrong channel count."""


@dataclass(eq=False)
class Image:
    """8-bit raster; data has shape (h, w) for grayscale or (h, w, 3) for RGB."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.uint8)
        if not (d.ndim == 2 or (d.ndim == 3 and d.shape[2] == 3)):
            raise ValueError(f"image shape {d.shape} is not (h, w) or (h, w, 3)")
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        self.data = d

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    def copy(self) -> "Image":
        return Image(self.data.copy())

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)


@dataclass(eq=False)
class BinaryMask:
    """Per-pixel boolean raster; bits has shape (h, w)."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2:
            raise ValueError(f"mask shape {b.shape} is not (h, w)")
        self.bits = b

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)


_WS = frozenset(b" \t\r\n\x0b\x0c")
_HASH = ord("#")


def _parse_header_ints(buf: bytes, start: int, count: int) -> tuple[list[int], int]:
    """Parse `count` whitespace-separated integers, honoring '#' comments."""
    values = []
    i = start
    n = len(buf)
    while len(values) < count:
        while i < n and (buf[i] in _WS or buf[i] == _HASH):
            if buf[i] == _HASH:
                while i < n and buf[i] != ord("\n"):
                    i += 1
            else:
                i += 1
        j = i
        while j < n and buf[j] not in _WS and buf[j] != _HASH:
            j += 1
        token = buf[i:j]
        if not token:
            raise BadHeader("header ended early")
        try:
            values.append(int(token))
        except ValueError:
            raise BadHeader(f"non-numeric header token {token!r}") from None
        i = j
    return values, i


def load_pnm(buf: bytes) -> Image:
    """Decode a binary PGM (P5) or PPM (P6) byte sequence."""
    magic = buf[:2]
    if magic not in (b"P5", b"P6"):
        raise UnsupportedFormat(f"unsupported magic {magic!r}")
    if len(buf) < 3 or (buf[2] not in _WS and buf[2] != _HASH):
        raise BadHeader("magic not followed by whitespace")
    (width, height, maxval), i = _parse_header_ints(buf, 2, 3)
    if maxval != 255:
        raise UnsupportedFormat(f"maxval {maxval} (only 255 is supported)")
    if width < 1 or height < 1:
        raise BadHeader(f"bad dimensions {width}x{height}")
    # exactly one whitespace byte separates the header from the raster
    if i >= len(buf) or buf[i] not in _WS:
        raise BadHeader("missing whitespace after maxval")
    i += 1
    channels = 1 if magic == b"P5" else 3
    need = width * height * channels
    raster = buf[i : i + need]
    if len(raster) < need:
        raise Truncated(f"raster has {len(raster)} bytes, header promises {need}")
    arr = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return Image(arr.reshape(shape).copy())


def save_pnm(img: Image) -> bytes:
    """Encode as canonical P5/P6: single '\\n' separators, no comments."""
    magic = b"P5" if img.channels == 1 else b"P6"
    header = magic + b"\n%d %d\n255\n" % (img.width, img.height)
    return header + img.data.tobytes()


def read_pnm(path) -> Image:
    with open(path, "rb") as f:
        return load_pnm(f.read())


def write_pnm(path, img: Image) -> None:
    with open(path, "wb") as f:
        f.write(save_pnm(img))


def to_grayscale(img: Image) -> Image:
    """ITU-R 601 luma, rounded half-up. 1-channel input is returned unchanged."""
    if img.channels == 1:
        return img
    rgb = img.data.astype(np.float64)
    luma = 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]
    return Image(np.minimum(np.floor(luma + 0.5), 255.0).astype(np.uint8))


def rgb_to_chroma(r: int, g: int, b: int) -> tuple[float, float]:
    """Normalized (r, g) chromaticity; a black pixel maps to (1/3, 1/3).

    The ratio cancels uniform intensity gain, which is what makes the skin
    box usable across lighting conditions.
    """
    s = int(r) + int(g) + int(b)
    if s == 0:
        return (1.0 / 3.0, 1.0 / 3.0)
    return (r / s, g / s)
