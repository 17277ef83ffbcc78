"""Deterministic 128-dimensional face encodings.

Pipeline: crop, resize to 32x32, zero-mean / unit-variance normalisation,
orthonormal 2-D DCT-II, the first 128 AC coefficients in zig-zag order, and
L2 normalisation. Constant crops map to the all-zero vector.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import FaceTooSmall
from .imaging import GrayImage, Rect, crop, resize_bilinear

__all__ = [
    "DIM",
    "WORK_SIZE",
    "Encoding",
    "dct_matrix",
    "dct2d",
    "zigzag_order",
    "features_from_block",
    "encode_face",
]

DIM = 128
WORK_SIZE = 32
MIN_FACE = 8
STD_EPS = 1e-6
NORM_TOL = 1e-9


class Encoding:
    """128 float64 components with unit L2 norm, or exactly all zeros."""

    __slots__ = ("values",)

    def __init__(self, values, check: bool = True):
        arr = np.array(values, dtype=np.float64).reshape(-1)
        if check:
            if arr.shape != (DIM,):
                raise ValueError(f"encoding must have {DIM} components, got {arr.size}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("encoding components must be finite")
            norm = float(np.sqrt(np.dot(arr, arr)))
            if not (abs(norm - 1.0) <= NORM_TOL or not arr.any()):
                raise ValueError(f"encoding norm must be 1 (or all zeros), got {norm!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Encoding is immutable")

    @classmethod
    def zeros(cls) -> "Encoding":
        return cls(np.zeros(DIM))

    @property
    def is_zero(self) -> bool:
        return not self.values.any()

    def __eq__(self, other):
        return isinstance(other, Encoding) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"Encoding(norm={np.linalg.norm(self.values):.6f})"


@lru_cache(maxsize=16)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis ``D`` so that ``D @ f @ D.T`` transforms a block."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    d = np.cos((2 * x + 1) * k * np.pi / (2 * n))
    d[0] *= np.sqrt(1.0 / n)
    d[1:] *= np.sqrt(2.0 / n)
    d.setflags(write=False)
    return d


def dct2d(block) -> np.ndarray:
    block = np.asarray(block, dtype=np.float64)
    if block.ndim != 2 or block.shape[0] != block.shape[1] or block.shape[0] < 1:
        raise ValueError(f"dct2d needs a non-empty square block, got shape {block.shape}")
    d = dct_matrix(block.shape[0])
    return d @ block @ d.T


@lru_cache(maxsize=16)
def zigzag_order(n: int) -> np.ndarray:
    """Flat ``row * n + col`` indices of the JPEG zig-zag walk over an n x n grid."""
    if n < 1:
        raise ValueError("n must be >= 1")
    order = []
    for s in range(2 * n - 1):
        lo, hi = max(0, s - n + 1), min(s, n - 1)
        rows = range(lo, hi + 1) if s % 2 else range(hi, lo - 1, -1)
        order.extend(r * n + (s - r) for r in rows)
    out = np.array(order, dtype=np.intp)
    out.setflags(write=False)
    return out


def features_from_block(block: np.ndarray) -> Encoding:
    """Transform a normalised working block into an :class:`Encoding`."""
    coeffs = dct2d(block).reshape(-1)[zigzag_order(block.shape[0])]
    ac = coeffs[1:DIM + 1]
    norm = float(np.sqrt(np.dot(ac, ac)))
    if norm == 0.0:
        return Encoding.zeros()
    return Encoding(ac / norm)


def encode_face(img: GrayImage, face: Rect) -> Encoding:
    face = Rect.of(face)
    if face.w < MIN_FACE or face.h < MIN_FACE:
        raise FaceTooSmall(f"face {face.w}x{face.h} is below the {MIN_FACE}x{MIN_FACE} minimum")
    patch = resize_bilinear(crop(img, face), WORK_SIZE, WORK_SIZE)
    block = patch.pixels.astype(np.float64)
    block = block - block.mean()
    std = float(np.sqrt(np.mean(block * block)))
    if std < STD_EPS:
        return Encoding.zeros()
    return features_from_block(block / std)
