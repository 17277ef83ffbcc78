"""Labelled encoding store, Euclidean matching and the FGAL file format.

FGAL layout (little-endian)::

    "FGAL"  u16 version=1  u32 count
    count x { u8 label_len, label (UTF-8), 128 x f64 }

An entry is 1025 bytes plus its label. Vectors written by other tools may be
imported this way as long as they are L2-normalised.
"""
from __future__ import annotations

import math
import os
import struct
import tempfile
import unicodedata
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .encoder import DIM, Encoding
from .errors import (
    BadMagic,
    EmptyGallery,
    InvalidEncoding,
    InvalidLabel,
    TrailingBytes,
    TruncatedEntry,
    UnsupportedVersion,
)

__all__ = [
    "DEFAULT_THRESHOLD",
    "GalleryEntry",
    "Gallery",
    "MatchResult",
    "check_label",
    "euclidean_distance",
    "match_probe",
    "enroll",
    "save_gallery",
    "load_gallery",
    "write_gallery_file",
    "read_gallery_file",
]

DEFAULT_THRESHOLD = 0.6
MAGIC = b"FGAL"
VERSION = 1
_HEADER = struct.Struct("<4sHI")
_VECTOR = struct.Struct(f"<{DIM}d")


def check_label(label: str) -> str:
    if not isinstance(label, str):
        raise InvalidLabel(f"label must be text, got {type(label).__name__}")
    try:
        raw = label.encode("utf-8")
    except UnicodeEncodeError:
        raise InvalidLabel(f"label {label!r} is not encodable as UTF-8") from None
    if not 1 <= len(raw) <= 255:
        raise InvalidLabel(f"label must be 1-255 UTF-8 bytes, got {len(raw)}")
    if any(unicodedata.category(ch) == "Cc" for ch in label):
        raise InvalidLabel(f"label {label!r} contains control characters")
    return label


@dataclass(frozen=True)
class GalleryEntry:
    label: str
    encoding: Encoding

    def __post_init__(self):
        check_label(self.label)


@dataclass(frozen=True)
class Gallery:
    entries: Tuple[GalleryEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(e.label for e in self.entries)

    @property
    def distinct_labels(self) -> int:
        """Number of enrolled identities (the roster size)."""
        return len(set(self.labels))


@dataclass(frozen=True)
class MatchResult:
    label: Optional[str]
    distance: float

    @property
    def matched(self) -> bool:
        return self.label is not None


def _vec(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def euclidean_distance(a, b) -> float:
    """``sqrt(sum((b_i - a_i)^2))`` over all components."""
    d = _vec(b) - _vec(a)
    return math.sqrt(float(np.dot(d, d)))


def match_probe(g: Gallery, probe, threshold: float = DEFAULT_THRESHOLD) -> MatchResult:
    """Nearest entry wins if within ``threshold``; ties go to the smaller label."""
    if not g.entries:
        raise EmptyGallery("cannot match against an empty gallery")
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    best = min(
        ((euclidean_distance(e.encoding, probe), e.label, i) for i, e in enumerate(g.entries)),
    )
    dist, label, _ = best
    return MatchResult(label if dist <= threshold else None, dist)


def enroll(g: Gallery, label: str, encoding: Encoding) -> Gallery:
    return Gallery(g.entries + (GalleryEntry(check_label(label), encoding),))


def save_gallery(g: Gallery) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, len(g.entries))]
    for e in g.entries:
        raw = e.label.encode("utf-8")
        parts.append(bytes([len(raw)]) + raw)
        parts.append(_VECTOR.pack(*e.encoding.values.tolist()))
    return b"".join(parts)


def load_gallery(data: bytes) -> Gallery:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic(f"not an FGAL file (magic {data[:4]!r})")
    if len(data) < _HEADER.size:
        raise TruncatedEntry("header is truncated")
    _, version, count = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersion(f"FGAL version {version} is not supported")
    pos = _HEADER.size
    entries = []
    for i in range(count):
        if pos >= len(data):
            raise TruncatedEntry(f"entry {i}: missing label length")
        n = data[pos]
        pos += 1
        raw = data[pos:pos + n]
        if len(raw) < n:
            raise TruncatedEntry(f"entry {i}: label truncated")
        pos += n
        try:
            label = raw.decode("utf-8")
        except UnicodeDecodeError:
            raise InvalidLabel(f"entry {i}: label is not valid UTF-8") from None
        check_label(label)
        if len(data) - pos < _VECTOR.size:
            raise TruncatedEntry(f"entry {i}: encoding truncated")
        vec = _VECTOR.unpack_from(data, pos)
        pos += _VECTOR.size
        try:
            enc = Encoding(vec)
        except ValueError as exc:
            raise InvalidEncoding(f"entry {i} ({label!r}): {exc}") from None
        entries.append(GalleryEntry(label, enc))
    if pos != len(data):
        raise TrailingBytes(f"{len(data) - pos} unexpected bytes after {count} entries")
    return Gallery(tuple(entries))


def write_gallery_file(path, g: Gallery) -> None:
    """Replace ``path`` atomically (temp file + rename)."""
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".fgal-", dir=folder)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(save_gallery(g))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_gallery_file(path) -> Gallery:
    with open(path, "rb") as fh:
        return load_gallery(fh.read())
