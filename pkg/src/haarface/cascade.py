"""Boosted Haar cascade models in the index-based XML interchange format.

Only upright Haar features evaluated by decision stumps are accepted; old
nested-tree documents, tilted features and deeper trees are rejected with
:class:`~haarface.errors.UnsupportedFormat`.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from typing import List, Tuple

from .errors import InvariantViolation, MalformedXml, UnsupportedFormat
from .imaging import Rect

__all__ = [
    "WeightedRect",
    "HaarFeature",
    "Stump",
    "Stage",
    "CascadeModel",
    "parse_cascade_xml",
    "load_cascade",
    "toy_cascade_bytes",
    "validate",
]

ZERO_SUM_RTOL = 1e-6


@dataclass(frozen=True)
class WeightedRect:
    rect: Rect
    weight: float


@dataclass(frozen=True)
class HaarFeature:
    rects: Tuple[WeightedRect, ...]


@dataclass(frozen=True)
class Stump:
    feature_index: int
    threshold: float
    left_leaf: float
    right_leaf: float


@dataclass(frozen=True)
class Stage:
    stumps: Tuple[Stump, ...]
    stage_threshold: float


@dataclass(frozen=True)
class CascadeModel:
    base_width: int
    base_height: int
    stages: Tuple[Stage, ...]
    features: Tuple[HaarFeature, ...]

    @property
    def n_stumps(self) -> int:
        return sum(len(s.stumps) for s in self.stages)


def validate(model: CascadeModel) -> List[str]:
    """Return one message per broken model invariant (empty when valid)."""
    out = []
    bw, bh = model.base_width, model.base_height
    if bw < 1 or bh < 1:
        out.append(f"model: base window {bw}x{bh} must be at least 1x1")
    if not model.stages:
        out.append("model: cascade has no stages")
    nfeat = len(model.features)
    for i, stage in enumerate(model.stages):
        if not stage.stumps:
            out.append(f"stage {i}: no weak classifiers")
        if not math.isfinite(stage.stage_threshold):
            out.append(f"stage {i}: stageThreshold is not finite")
        for j, st in enumerate(stage.stumps):
            if not 0 <= st.feature_index < nfeat:
                out.append(
                    f"stage {i} / stump {j}: feature index {st.feature_index} "
                    f"outside feature table of size {nfeat}"
                )
            if not all(map(math.isfinite, (st.threshold, st.left_leaf, st.right_leaf))):
                out.append(f"stage {i} / stump {j}: threshold or leaf value is not finite")
    for k, feat in enumerate(model.features):
        if not 2 <= len(feat.rects) <= 3:
            out.append(f"feature {k}: has {len(feat.rects)} rects, expected 2 or 3")
        total = 0.0
        scale = 0.0
        for m, wr in enumerate(feat.rects):
            r = wr.rect
            if r.w < 1 or r.h < 1:
                out.append(f"feature {k} / rect {m}: empty rect {r.as_list()}")
            if not r.fits(bw, bh):
                out.append(f"feature {k} / rect {m}: {r.as_list()} outside {bw}x{bh} base window")
            if not math.isfinite(wr.weight):
                out.append(f"feature {k} / rect {m}: weight is not finite")
            total += wr.weight * r.area
            scale += abs(wr.weight * r.area)
        if math.isfinite(total) and abs(total) > ZERO_SUM_RTOL * scale:
            out.append(f"feature {k}: weighted area sums to {total:g}, expected zero-sum")
    return out


# --------------------------------------------------------------------------
# XML parsing


def _child(el, name, path):
    node = el.find(name)
    if node is None:
        raise InvariantViolation(f"{path}: missing <{name}>")
    return node


def _numbers(text, path, count=None):
    parts = (text or "").split()
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise InvariantViolation(f"{path}: non-numeric value in {text.strip()[:40]!r}") from None
    if count is not None and len(values) != count:
        raise InvariantViolation(f"{path}: expected {count} numbers, found {len(values)}")
    return values


def _integer(value, path):
    if not math.isfinite(value) or value != int(value):
        raise InvariantViolation(f"{path}: expected an integer, found {value!r}")
    return int(value)


def _find_cascade(root):
    if root.get("type_id") == "opencv-haar-classifier":
        raise UnsupportedFormat("old-style cascade (type_id=opencv-haar-classifier) is not supported")
    for el in root:
        if el.get("type_id") == "opencv-haar-classifier":
            raise UnsupportedFormat(
                f"old-style cascade <{el.tag}> (type_id=opencv-haar-classifier) is not supported"
            )
    for el in root:
        if el.find("stages") is not None or el.find("featureType") is not None:
            return el
    raise UnsupportedFormat("no new-style <cascade> element with <stages> found")


def _parse_stump(wc, path):
    nodes = _numbers(_child(wc, "internalNodes", path).text, f"{path}/internalNodes")
    leaves = _numbers(_child(wc, "leafValues", path).text, f"{path}/leafValues")
    if len(nodes) != 4 or len(leaves) != 2:
        raise UnsupportedFormat(
            f"{path}: weak classifier with {len(nodes)} internalNodes values and "
            f"{len(leaves)} leafValues is a tree deeper than a stump"
        )
    left, right, idx, thr = nodes
    if left != 0 or right != -1:
        raise UnsupportedFormat(f"{path}: internalNodes child links {left:g} {right:g} describe a tree, not a stump")
    return Stump(_integer(idx, f"{path}/internalNodes"), thr, leaves[0], leaves[1])


def _parse_feature(el, path):
    tilted = el.find("tilted")
    if tilted is not None and (tilted.text or "").strip() not in ("", "0"):
        raise UnsupportedFormat(f"{path}: tilted features are not supported")
    rects = []
    for m, r in enumerate(_child(el, "rects", path).findall("_")):
        rpath = f"{path}/rect {m}"
        x, y, w, h, weight = _numbers(r.text, rpath, 5)
        coords = [_integer(v, rpath) for v in (x, y, w, h)]
        if min(coords) < 0:
            raise InvariantViolation(f"{rpath}: negative coordinate in {coords}")
        rects.append(WeightedRect(Rect(*coords), weight))
    return HaarFeature(tuple(rects))


def parse_cascade_xml(data: bytes) -> CascadeModel:
    """Parse and validate a new-style BOOST/HAAR cascade document."""
    try:
        root = ET.fromstring(data)
    except (ET.ParseError, ValueError, LookupError, UnicodeError) as exc:
        raise MalformedXml(f"cascade is not well-formed XML: {exc}") from None

    casc = _find_cascade(root)
    stage_type = (_child(casc, "stageType", "cascade").text or "").strip()
    if stage_type != "BOOST":
        raise UnsupportedFormat(f"stageType {stage_type!r} is not supported (need BOOST)")
    feature_type = (_child(casc, "featureType", "cascade").text or "").strip()
    if feature_type != "HAAR":
        raise UnsupportedFormat(f"featureType {feature_type!r} is not supported (need HAAR)")
    (height,) = _numbers(_child(casc, "height", "cascade").text, "cascade/height", 1)
    (width,) = _numbers(_child(casc, "width", "cascade").text, "cascade/width", 1)

    stages = []
    for i, st in enumerate(_child(casc, "stages", "cascade").findall("_")):
        path = f"stage {i}"
        thr_el = st.find("stageThreshold")
        if thr_el is None:
            raise InvariantViolation(f"{path}: missing stageThreshold")
        (thr,) = _numbers(thr_el.text, f"{path}/stageThreshold", 1)
        wcs = _child(st, "weakClassifiers", path).findall("_")
        stumps = tuple(_parse_stump(wc, f"{path} / stump {j}") for j, wc in enumerate(wcs))
        mwc = st.find("maxWeakCount")
        if mwc is not None:
            (n,) = _numbers(mwc.text, f"{path}/maxWeakCount", 1)
            if n != len(stumps):
                raise InvariantViolation(f"{path}: maxWeakCount {n:g} but {len(stumps)} weak classifiers")
        stages.append(Stage(stumps, thr))

    features = tuple(
        _parse_feature(f, f"feature {k}")
        for k, f in enumerate(_child(casc, "features", "cascade").findall("_"))
    )
    model = CascadeModel(
        _integer(width, "cascade/width"), _integer(height, "cascade/height"), tuple(stages), features
    )
    problems = validate(model)
    if problems:
        raise InvariantViolation("; ".join(problems[:5]))
    return model


def load_cascade(path) -> CascadeModel:
    with open(path, "rb") as fh:
        return parse_cascade_xml(fh.read())


def toy_cascade_bytes() -> bytes:
    """Bytes of the bundled 4x4 toy cascade fixture."""
    return resources.files("haarface").joinpath("data/toy_cascade.xml").read_bytes()
