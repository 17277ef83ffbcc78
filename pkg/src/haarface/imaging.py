"""Image containers, Netpbm codec, integral images and box annotation.

Images are thin wrappers around read-only numpy arrays indexed ``[row, col]``.
All float to sample conversions round half-up.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from . import _font
from .errors import (
    InvalidSample,
    MaxvalOutOfRange,
    NonNumericHeader,
    RectOutOfBounds,
    TruncatedPayload,
    UnsupportedMagic,
)

__all__ = [
    "Rect",
    "GrayImage",
    "RgbImage",
    "IntegralImage",
    "round_half_up",
    "load_netpbm",
    "save_netpbm",
    "to_gray",
    "integral",
    "rect_sum",
    "resize_bilinear",
    "crop",
    "annotate",
]

_WHITESPACE = b" \t\n\r\v\f"


def round_half_up(values):
    """Round half-up (``floor(v + 0.5)``), elementwise for arrays."""
    if isinstance(values, np.ndarray):
        return np.floor(values + 0.5)
    return int(np.floor(values + 0.5))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, order=True)
class Rect:
    """Axis-aligned pixel rectangle: origin ``(x, y)``, extent ``(w, h)``."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"Rect.{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def right(self) -> int:
        return self.x + self.w

    @property
    def bottom(self) -> int:
        return self.y + self.h

    def contains(self, other: "Rect") -> bool:
        return (
            self.x <= other.x
            and self.y <= other.y
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def fits(self, width: int, height: int) -> bool:
        return self.right <= width and self.bottom <= height

    def as_list(self) -> list:
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def of(cls, value: Union["Rect", Sequence[int]]) -> "Rect":
        if isinstance(value, Rect):
            return value
        x, y, w, h = value
        return cls(x, y, w, h)


class GrayImage:
    """8-bit single channel raster.

    Parameters
    ----------
    pixels : array_like
        ``(height, width)`` array of values in ``[0, 255]``.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError("GrayImage samples must lie in [0, 255]")
            if np.issubdtype(arr.dtype, np.floating) and not np.array_equal(arr, np.floor(arr)):
                raise ValueError("GrayImage samples must be integers")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(arr))

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def samples(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


class RgbImage:
    """8-bit RGB raster stored as a ``(height, width, 3)`` array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.asarray(pixels)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"RgbImage needs a (h, w, 3) array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("RgbImage samples must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(arr))

    def __setattr__(self, name, value):
        raise AttributeError("RgbImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def samples(self) -> bytes:
        return self.pixels.tobytes()

    @classmethod
    def from_gray(cls, img: GrayImage) -> "RgbImage":
        return cls(np.repeat(img.pixels[:, :, None], 3, axis=2))

    def __eq__(self, other):
        return isinstance(other, RgbImage) and np.array_equal(self.pixels, other.pixels)

    def __repr__(self):
        return f"RgbImage({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class IntegralImage:
    """Summed-area tables of a gray image.

    ``sum[y, x]`` holds the sum of samples in columns ``[0, x)`` and rows
    ``[0, y)``; ``sqsum`` is the same for squared samples. Both are int64 and
    shaped ``(height + 1, width + 1)``.
    """

    sum: np.ndarray
    sqsum: np.ndarray

    @property
    def width(self) -> int:
        return self.sum.shape[1] - 1

    @property
    def height(self) -> int:
        return self.sum.shape[0] - 1

    def at(self, x: int, y: int, squared: bool = False) -> int:
        table = self.sqsum if squared else self.sum
        return int(table[y, x])


# --------------------------------------------------------------------------
# Netpbm


class _HeaderReader:
    def __init__(self, data: bytes, pos: int):
        self.data = data
        self.pos = pos

    def _skip(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x23:  # '#'
                end = data.find(b"\n", self.pos)
                self.pos = n if end < 0 else end + 1
            else:
                break

    def token(self, what: str) -> bytes:
        self._skip()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and data[self.pos] not in _WHITESPACE and data[self.pos] != 0x23:
            self.pos += 1
        if start == self.pos:
            raise TruncatedPayload(f"unexpected end of data while reading {what}")
        return data[start:self.pos]

    def number(self, what: str, error=NonNumericHeader) -> int:
        tok = self.token(what)
        if not tok.isdigit():
            raise error(f"{what} is not a decimal number: {tok[:16]!r}")
        return int(tok)


def load_netpbm(data: bytes) -> Union[GrayImage, RgbImage]:
    """Decode a P2/P3/P5/P6 image with maxval 255."""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise UnsupportedMagic(f"unsupported Netpbm magic {magic!r}")
    reader = _HeaderReader(data, 2)
    if len(data) > 2 and data[2] not in _WHITESPACE and data[2] != 0x23:
        raise NonNumericHeader("magic must be followed by whitespace")
    width = reader.number("width")
    height = reader.number("height")
    maxval = reader.number("maxval")
    if width < 1 or height < 1:
        raise NonNumericHeader(f"image dimensions must be positive, got {width}x{height}")
    if maxval != 255:
        raise MaxvalOutOfRange(f"maxval must be 255, got {maxval}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P5", b"P6"):
        if reader.pos >= len(data) or data[reader.pos] not in _WHITESPACE:
            raise TruncatedPayload("missing whitespace after maxval")
        start = reader.pos + 1
        payload = data[start:start + count]
        if len(payload) < count:
            raise TruncatedPayload(f"expected {count} payload bytes, found {len(payload)}")
        arr = np.frombuffer(payload, dtype=np.uint8)
    else:
        values = np.empty(count, dtype=np.int64)
        for i in range(count):
            values[i] = reader.number("sample", error=InvalidSample)
        if values.max(initial=0) > 255:
            raise InvalidSample("ASCII sample exceeds maxval 255")
        arr = values.astype(np.uint8)

    if channels == 3:
        return RgbImage(arr.reshape(height, width, 3))
    return GrayImage(arr.reshape(height, width))


def save_netpbm(img: Union[GrayImage, RgbImage], binary: bool = True) -> bytes:
    """Encode ``img`` as P5/P6 (``binary``) or P2/P3."""
    rgb = isinstance(img, RgbImage)
    magic = {(False, True): "P5", (True, True): "P6", (False, False): "P2", (True, False): "P3"}[
        (rgb, binary)
    ]
    header = f"{magic}\n{img.width} {img.height}\n255\n".encode("ascii")
    if binary:
        return header + img.pixels.tobytes()
    per_row = img.width * (3 if rgb else 1)
    rows = img.pixels.reshape(img.height, per_row)
    body = "\n".join(" ".join(str(v) for v in row) for row in rows.tolist())
    return header + body.encode("ascii") + b"\n"


# --------------------------------------------------------------------------
# pixel operations


def to_gray(img: RgbImage) -> GrayImage:
    """BT.601 luma: ``round(0.299 R + 0.587 G + 0.114 B)``."""
    if isinstance(img, GrayImage):
        return img
    p = img.pixels.astype(np.float64)
    luma = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    return GrayImage(np.clip(round_half_up(luma), 0, 255).astype(np.uint8))


def integral(img: GrayImage) -> IntegralImage:
    """Build the plain and squared summed-area tables in one pass."""
    px = img.pixels.astype(np.int64)
    h, w = px.shape
    s = np.zeros((h + 1, w + 1), dtype=np.int64)
    sq = np.zeros((h + 1, w + 1), dtype=np.int64)
    np.cumsum(np.cumsum(px, axis=0), axis=1, out=s[1:, 1:])
    np.cumsum(np.cumsum(px * px, axis=0), axis=1, out=sq[1:, 1:])
    return IntegralImage(_frozen(s), _frozen(sq))


def _check_inside(r: Rect, width: int, height: int):
    if not r.fits(width, height):
        raise RectOutOfBounds(f"{r} exceeds {width}x{height} image")


def rect_sum(ii: IntegralImage, r: Rect, squared: bool = False) -> int:
    """Sum of (optionally squared) samples inside ``r`` from four lookups."""
    r = Rect.of(r)
    _check_inside(r, ii.width, ii.height)
    t = ii.sqsum if squared else ii.sum
    return int(t[r.bottom, r.right] - t[r.bottom, r.x] - t[r.y, r.right] + t[r.y, r.x])


def resize_bilinear(img: GrayImage, out_w: int, out_h: int) -> GrayImage:
    """Resample with pixel-centre alignment and clamped source coordinates."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output size must be at least 1x1")
    w, h = img.width, img.height
    src = img.pixels.astype(np.float64)

    def axis(n_out, n_in):
        pos = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        pos = np.clip(pos, 0.0, n_in - 1)
        lo = np.floor(pos).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    x0, x1, fx = axis(out_w, w)
    y0, y1, fy = axis(out_h, h)
    fx = fx[None, :]
    fy = fy[:, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    return GrayImage(np.clip(round_half_up(out), 0, 255).astype(np.uint8))


def crop(img: GrayImage, r: Rect) -> GrayImage:
    r = Rect.of(r)
    if r.w < 1 or r.h < 1:
        raise RectOutOfBounds(f"cannot crop empty rect {r}")
    _check_inside(r, img.width, img.height)
    return GrayImage(img.pixels[r.y:r.bottom, r.x:r.right])


# --------------------------------------------------------------------------
# annotation

BOX_THICKNESS = 2
LABEL_GAP = 2


def label_scale(r: Rect) -> int:
    """Integer glyph scale for a label attached to ``r``."""
    return max(1, min(r.w, r.h) // 40)


def label_anchor(r: Rect, height: int) -> Tuple[int, int]:
    """Top-left pixel of a label: below the box, else above it, else inside."""
    glyph_h = _font.GLYPH_HEIGHT * label_scale(r)
    below = r.bottom + LABEL_GAP
    if below + glyph_h <= height:
        return r.x, below
    above = r.y - LABEL_GAP - glyph_h
    if above >= 0:
        return r.x, above
    return r.x + BOX_THICKNESS + 1, r.y + BOX_THICKNESS + 1


def _draw_text(canvas: np.ndarray, x0: int, y0: int, text: str, scale: int, color):
    h, w = canvas.shape[:2]
    advance = (_font.GLYPH_WIDTH + 1) * scale
    for k, ch in enumerate(text):
        mask = np.array(_font.glyph_mask(ch), dtype=bool)
        big = np.kron(mask, np.ones((scale, scale), dtype=bool))
        gx = x0 + k * advance
        if gx >= w:
            break
        ys, xs = np.nonzero(big)
        ys = ys + y0
        xs = xs + gx
        keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
        canvas[ys[keep], xs[keep]] = color


def annotate(
    img: RgbImage,
    boxes: Iterable[Tuple[Rect, Optional[str]]],
    color: Tuple[int, int, int] = (0, 255, 0),
) -> RgbImage:
    """Draw 2-pixel box outlines and optional text labels on a copy of ``img``."""
    if isinstance(img, GrayImage):
        img = RgbImage.from_gray(img)
    canvas = img.pixels.copy()
    items = [(Rect.of(r), label) for r, label in boxes]
    for r, _ in items:
        _check_inside(r, img.width, img.height)
    for r, label in items:
        if r.w and r.h:
            t = BOX_THICKNESS
            canvas[r.y:min(r.y + t, r.bottom), r.x:r.right] = color
            canvas[max(r.bottom - t, r.y):r.bottom, r.x:r.right] = color
            canvas[r.y:r.bottom, r.x:min(r.x + t, r.right)] = color
            canvas[r.y:r.bottom, max(r.right - t, r.x):r.right] = color
        if label:
            ax, ay = label_anchor(r, img.height)
            _draw_text(canvas, ax, ay, label, label_scale(r), color)
    return RgbImage(canvas)
