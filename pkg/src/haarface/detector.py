"""Multi-scale sliding-window detection with a boosted Haar cascade.

Features are scaled rather than the image: one pair of integral tables is
built per image and every scale reads from it.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .cascade import CascadeModel
from .errors import ImageTooSmall, WindowOutOfBounds
from .imaging import GrayImage, IntegralImage, Rect, integral, round_half_up

__all__ = [
    "ScanParams",
    "Detection",
    "WindowResult",
    "ScaledCascade",
    "scale_cascade",
    "evaluate_window",
    "iter_scales",
    "detect_raw",
    "detect_multiscale",
    "group_rectangles",
]


@dataclass(frozen=True)
class ScanParams:
    scale_factor: float = 1.1
    stride_factor: float = 2.0
    min_neighbors: int = 3
    min_size: Optional[int] = None
    max_size: Optional[int] = None

    def __post_init__(self):
        if not self.scale_factor > 1:
            raise ValueError(f"scale_factor must be > 1, got {self.scale_factor}")
        if not self.stride_factor > 0:
            raise ValueError(f"stride_factor must be > 0, got {self.stride_factor}")
        if self.min_neighbors < 0:
            raise ValueError("min_neighbors must be >= 0")
        for name in ("min_size", "max_size"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.min_size is not None and self.max_size is not None and self.min_size > self.max_size:
            raise ValueError("min_size must not exceed max_size")


@dataclass(frozen=True, order=True)
class Detection:
    box: Rect
    neighbors: int

    def to_json(self) -> dict:
        return {"box": self.box.as_list(), "neighbors": self.neighbors}


class WindowResult(NamedTuple):
    passed: bool
    stage: int  # first failing stage, or len(stages) when passed
    stage_sums: Tuple[float, ...]


# --------------------------------------------------------------------------
# packed model geometry


class _Packed(NamedTuple):
    base_w: int
    base_h: int
    rects: np.ndarray  # (nfeat, 3, 4) base-window x, y, w, h
    weights: np.ndarray  # (nfeat, 3)
    nrects: np.ndarray
    stump_feat: np.ndarray
    stump_thr: np.ndarray
    stump_left: np.ndarray
    stump_right: np.ndarray
    stage_start: np.ndarray
    stage_thr: np.ndarray


@lru_cache(maxsize=8)
def _pack(model: CascadeModel) -> _Packed:
    nfeat = len(model.features)
    rects = np.zeros((nfeat, 3, 4), dtype=np.int32)
    weights = np.zeros((nfeat, 3), dtype=np.float64)
    nrects = np.zeros(nfeat, dtype=np.int32)
    for k, feat in enumerate(model.features):
        nrects[k] = len(feat.rects)
        for m, wr in enumerate(feat.rects):
            rects[k, m] = wr.rect.as_list()
            weights[k, m] = wr.weight
    stumps = [s for stage in model.stages for s in stage.stumps]
    starts = np.cumsum([0] + [len(s.stumps) for s in model.stages]).astype(np.int32)
    return _Packed(
        model.base_width,
        model.base_height,
        rects,
        weights,
        nrects,
        np.array([s.feature_index for s in stumps], dtype=np.int32),
        np.array([s.threshold for s in stumps], dtype=np.float64),
        np.array([s.left_leaf for s in stumps], dtype=np.float64),
        np.array([s.right_leaf for s in stumps], dtype=np.float64),
        starts,
        np.array([s.stage_threshold for s in model.stages], dtype=np.float64),
    )


class ScaledCascade(NamedTuple):
    """Cascade geometry at one detection scale, relative to the window origin."""

    scale: float
    win_w: int
    win_h: int
    rects: np.ndarray
    weights: np.ndarray
    packed: _Packed


def scale_cascade(model: CascadeModel, scale: float) -> ScaledCascade:
    """Round feature rectangles to integer corners and rebalance rect 0's weight.

    Corners (not extents) are rounded so scaled rects stay inside the scaled
    window. Rect 0's weight is recomputed so the weighted areas sum to zero.
    """
    p = _pack(model)
    b = p.rects.astype(np.float64)
    x0 = round_half_up(b[..., 0] * scale)
    y0 = round_half_up(b[..., 1] * scale)
    x1 = round_half_up((b[..., 0] + b[..., 2]) * scale)
    y1 = round_half_up((b[..., 1] + b[..., 3]) * scale)
    rects = np.stack([x0, y0, x1 - x0, y1 - y0], axis=-1).astype(np.int32)
    present = np.arange(3)[None, :] < p.nrects[:, None]
    rects[~present] = 0
    areas = (rects[..., 2].astype(np.float64) * rects[..., 3]) * present
    weights = p.weights.copy()
    rest = weights[:, 1] * areas[:, 1] + weights[:, 2] * areas[:, 2]
    ok = areas[:, 0] > 0
    weights[ok, 0] = -rest[ok] / areas[ok, 0]
    win_w = round_half_up(p.base_w * scale)
    win_h = round_half_up(p.base_h * scale)
    return ScaledCascade(scale, win_w, win_h, np.ascontiguousarray(rects), weights, p)


def _box(t: np.ndarray, x: int, y: int, w: int, h: int) -> int:
    return int(t[y + h, x + w] - t[y + h, x] - t[y, x + w] + t[y, x])


def evaluate_window(
    model: CascadeModel,
    ii: IntegralImage,
    origin: Tuple[int, int],
    scale: float,
    full: bool = False,
    scaled: Optional[ScaledCascade] = None,
) -> WindowResult:
    """Run the cascade on one window.

    With ``full=True`` every stage is evaluated (no early exit); ``stage``
    still reports the first stage whose sum fell below its threshold.
    """
    sc = scaled if scaled is not None else scale_cascade(model, scale)
    x, y = origin
    if x < 0 or y < 0 or x + sc.win_w > ii.width or y + sc.win_h > ii.height:
        raise WindowOutOfBounds(
            f"{sc.win_w}x{sc.win_h} window at ({x}, {y}) exceeds {ii.width}x{ii.height} image"
        )
    S, SQ = ii.sum, ii.sqsum
    area = float(sc.win_w) * float(sc.win_h)
    mean = float(_box(S, x, y, sc.win_w, sc.win_h)) / area
    var = float(_box(SQ, x, y, sc.win_w, sc.win_h)) / area - mean * mean
    sigma = math.sqrt(var) if var > 0 else 1.0

    p = sc.packed
    sums = []
    first_fail = None
    for st in range(len(p.stage_thr)):
        stage_sum = 0.0
        for k in range(int(p.stage_start[st]), int(p.stage_start[st + 1])):
            f = int(p.stump_feat[k])
            acc = 0.0
            for m in range(int(p.nrects[f])):
                rx, ry, rw, rh = (int(v) for v in sc.rects[f, m])
                acc = acc + float(sc.weights[f, m]) * float(_box(S, x + rx, y + ry, rw, rh))
            nu = acc / area
            if nu < float(p.stump_thr[k]) * sigma:
                stage_sum = stage_sum + float(p.stump_left[k])
            else:
                stage_sum = stage_sum + float(p.stump_right[k])
        sums.append(stage_sum)
        if stage_sum < float(p.stage_thr[st]) and first_fail is None:
            first_fail = st
            if not full:
                break
    if first_fail is None:
        return WindowResult(True, len(p.stage_thr), tuple(sums))
    return WindowResult(False, first_fail, tuple(sums))


# --------------------------------------------------------------------------
# scanning


def iter_scales(model: CascadeModel, width: int, height: int, p: ScanParams):
    """Yield ``(scale, win_w, win_h, stride)`` for every scale that is scanned."""
    k = 0
    while True:
        s = p.scale_factor ** k
        k += 1
        ww = round_half_up(model.base_width * s)
        wh = round_half_up(model.base_height * s)
        if ww > width or wh > height:
            return
        if p.max_size is not None and (ww > p.max_size or wh > p.max_size):
            return
        if p.min_size is not None and (ww < p.min_size or wh < p.min_size):
            continue
        yield s, ww, wh, max(1, round_half_up(p.stride_factor * s))


def _scan_one(model, ii, scale, stride, kernel):
    sc = scale_cascade(model, scale)
    p = sc.packed
    hits = kernel(
        ii.sum, ii.sqsum, sc.win_w, sc.win_h, stride, sc.rects, sc.weights, p.nrects,
        p.stump_feat, p.stump_thr, p.stump_left, p.stump_right, p.stage_start, p.stage_thr,
    )
    return [Rect(int(x), int(y), sc.win_w, sc.win_h) for x, y in hits]


def detect_raw(
    model: CascadeModel,
    img: GrayImage,
    p: ScanParams = ScanParams(),
    workers: Optional[int] = None,
    backend: Optional[str] = None,
    ii: Optional[IntegralImage] = None,
) -> List[Rect]:
    """All passing windows over all scales, before grouping.

    ``workers > 1`` evaluates scales concurrently; results are concatenated in
    scale order so the output does not depend on scheduling.
    """
    if img.width < model.base_width or img.height < model.base_height:
        raise ImageTooSmall(
            f"{img.width}x{img.height} image is smaller than the "
            f"{model.base_width}x{model.base_height} base window"
        )
    kernel = _kernels.available[backend] if backend else _kernels.scan_scale
    if ii is None:
        ii = integral(img)
    scales = list(iter_scales(model, img.width, img.height, p))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_scale = list(pool.map(lambda a: _scan_one(model, ii, a[0], a[3], kernel), scales))
    else:
        per_scale = [_scan_one(model, ii, s, stride, kernel) for s, _, _, stride in scales]
    return [r for rs in per_scale for r in rs]


def detect_multiscale(
    model: CascadeModel,
    img: GrayImage,
    p: ScanParams = ScanParams(),
    workers: Optional[int] = None,
    backend: Optional[str] = None,
) -> List[Detection]:
    raw = detect_raw(model, img, p, workers=workers, backend=backend)
    return group_rectangles(raw, p.min_neighbors)


def _canonical(d: Detection):
    return (d.box.y, d.box.x, d.box.h, d.box.w, -d.neighbors)


def group_rectangles(raw: Sequence[Rect], min_neighbors: int) -> List[Detection]:
    """Cluster similar rectangles and average each sufficiently large cluster.

    Two rects are similar when every coordinate differs by at most
    ``0.2 * (min(w1, w2) + min(h1, h2)) / 2``; clusters are the transitive
    closure. Emitted rects fully inside another emitted rect with at least as
    many neighbours are dropped.
    """
    rects = [Rect.of(r) for r in raw]
    n = len(rects)
    if n == 0:
        return []
    a = np.array([r.as_list() for r in rects], dtype=np.float64)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    # delta(i, j) never exceeds 0.2 * (w_i + h_i) / 2, so only rects inside
    # that x-band around rect i can be similar to it
    order = np.argsort(a[:, 0], kind="stable")
    xs = a[order, 0]
    reach = 0.2 * (a[:, 2] + a[:, 3]) / 2
    lo = np.searchsorted(xs, a[:, 0] - reach, side="left")
    hi = np.searchsorted(xs, a[:, 0] + reach, side="right")
    for i in range(n):
        cand = order[lo[i]:hi[i]]
        cand = cand[cand > i]
        if cand.size == 0:
            continue
        rest = a[cand]
        delta = 0.2 * (np.minimum(a[i, 2], rest[:, 2]) + np.minimum(a[i, 3], rest[:, 3])) / 2
        close = np.all(np.abs(rest - a[i]) <= delta[:, None], axis=1)
        for j in cand[close]:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

    clusters = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(i)
    need = max(1, min_neighbors)
    emitted = []
    for members in clusters.values():
        if len(members) < need:
            continue
        mean = round_half_up(a[members].mean(axis=0))
        emitted.append(Detection(Rect(*(int(v) for v in mean)), len(members)))
    emitted.sort(key=_canonical)

    if not emitted:
        return []
    e = np.array([d.box.as_list() for d in emitted], dtype=np.int64)
    x0, y0, x1, y1 = e[:, 0], e[:, 1], e[:, 0] + e[:, 2], e[:, 1] + e[:, 3]
    nb = np.array([d.neighbors for d in emitted])
    idx = np.arange(len(emitted))
    keep = []
    for i, d in enumerate(emitted):
        outer = (x0 <= x0[i]) & (y0 <= y0[i]) & (x1 >= x1[i]) & (y1 >= y1[i]) & (nb >= nb[i]) & (idx != i)
        # identical boxes with equal support: keep the first one only
        twin = np.all(e == e[i], axis=1) & (nb == nb[i]) & (idx > i)
        if not np.any(outer & ~twin):
            keep.append(d)
    return keep
