"""Detection and recognition accuracy bookkeeping.

Detection accuracy per image is ``100 * detected / total``; recognition
accuracy is ``100 * (a_pp + a_aa) / C`` where ``C`` is the roster size.
Aggregates are unweighted means over images.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import EmptyInput, SchemaError, UnknownLabelInTruth
from .gallery import MatchResult
from .imaging import Rect

__all__ = [
    "GroundTruthFace",
    "GroundTruthImage",
    "Roster",
    "Matching",
    "DetectionReportRow",
    "DetectionReport",
    "RecognitionReportRow",
    "RecognitionReport",
    "iou",
    "match_detections",
    "detection_row",
    "detection_report",
    "recognition_tally",
    "recognition_report",
    "parse_ground_truth",
    "parse_roster",
    "format_table",
]


@dataclass(frozen=True)
class GroundTruthFace:
    box: Rect
    label: Optional[str] = None  # None: stranger


@dataclass(frozen=True)
class GroundTruthImage:
    image: str
    faces: Tuple[GroundTruthFace, ...]


@dataclass(frozen=True)
class Roster:
    labels: FrozenSet[str]

    def __post_init__(self):
        if not self.labels:
            raise ValueError("roster must contain at least one label")

    @property
    def C(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class Matching:
    pairs: Tuple[Tuple[int, int], ...]  # (prediction index, truth index)
    unmatched_pred: Tuple[int, ...]
    unmatched_truth: Tuple[int, ...]


def iou(a: Rect, b: Rect) -> float:
    a, b = Rect.of(a), Rect.of(b)
    iw = min(a.right, b.right) - max(a.x, b.x)
    ih = min(a.bottom, b.bottom) - max(a.y, b.y)
    inter = max(iw, 0) * max(ih, 0)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return inter / union


def match_detections(pred: Sequence[Rect], truth: Sequence[Rect], iou_min: float = 0.5) -> Matching:
    """Greedy one-to-one matching by descending IoU.

    IoU ties are ordered by the (unordered) pair of box coordinates, so the
    result does not change when predictions and truths swap roles.
    """
    pred = [Rect.of(p) for p in pred]
    truth = [Rect.of(t) for t in truth]
    cands = []
    for i, p in enumerate(pred):
        for j, t in enumerate(truth):
            v = iou(p, t)
            if v >= iou_min and v > 0:
                a, b = sorted((p.as_list(), t.as_list()))
                cands.append((-v, a, b, i, j))
    cands.sort()
    used_p, used_t, pairs = set(), set(), []
    for _, _, _, i, j in cands:
        if i in used_p or j in used_t:
            continue
        used_p.add(i)
        used_t.add(j)
        pairs.append((i, j))
    pairs.sort()
    return Matching(
        tuple(pairs),
        tuple(i for i in range(len(pred)) if i not in used_p),
        tuple(j for j in range(len(truth)) if j not in used_t),
    )


# --------------------------------------------------------------------------
# detection


@dataclass(frozen=True)
class DetectionReportRow:
    image: str
    total_faces: int
    detected_faces: int
    fp: int
    tp: int
    fn: int
    accuracy: float

    @classmethod
    def from_counts(cls, image: str, total_faces: int, detected_faces: int, fp: int = 0):
        if total_faces < 0 or not 0 <= detected_faces <= max(total_faces, 0) or fp < 0:
            raise ValueError(
                f"{image}: inconsistent counts total={total_faces} detected={detected_faces} fp={fp}"
            )
        acc = 100.0 * detected_faces / total_faces if total_faces else 100.0
        return cls(image, total_faces, detected_faces, fp, detected_faces,
                   total_faces - detected_faces, acc)


@dataclass(frozen=True)
class DetectionReport:
    rows: Tuple[DetectionReportRow, ...]
    accuracy: float

    def to_json(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "accuracy": self.accuracy}

    def to_table(self) -> str:
        header = ["GP", "FP", "TP", "FN", "Total faces", "Detected faces", "Accuracy"]
        body = [
            [r.image, r.fp, r.tp, r.fn, r.total_faces, r.detected_faces, f"{r.accuracy:.2f}%"]
            for r in self.rows
        ]
        return format_table(header, body, f"Mean accuracy: {self.accuracy:.2f}%")


def detection_row(image: str, m: Matching) -> DetectionReportRow:
    total = len(m.pairs) + len(m.unmatched_truth)
    return DetectionReportRow.from_counts(image, total, len(m.pairs), len(m.unmatched_pred))


def detection_report(items: Iterable[Union[DetectionReportRow, Tuple[str, Matching]]]) -> DetectionReport:
    rows = tuple(it if isinstance(it, DetectionReportRow) else detection_row(*it) for it in items)
    if not rows:
        raise EmptyInput("detection report needs at least one image")
    return DetectionReport(rows, sum(r.accuracy for r in rows) / len(rows))


# --------------------------------------------------------------------------
# recognition


@dataclass(frozen=True)
class RecognitionReportRow:
    image: str
    C: int
    total_faces: int
    a_pp: float
    a_aa: int
    a_ps: int
    a_ap: int
    a_as: int
    accuracy: float

    @classmethod
    def from_counts(cls, image, C, total_faces, a_pp, a_aa, a_ps=0, a_ap=0, a_as=0):
        """Build a row from raw tallies; ``a_pp`` may be fractional."""
        if C < 1:
            raise ValueError(f"{image}: C must be >= 1")
        if min(total_faces, a_pp, a_aa, a_ps, a_ap, a_as) < 0:
            raise ValueError(f"{image}: counts must be non-negative")
        if a_pp > total_faces or a_pp + a_aa > C:
            raise ValueError(
                f"{image}: need a_pp <= total_faces and a_pp + a_aa <= C "
                f"(a_pp={a_pp}, a_aa={a_aa}, total={total_faces}, C={C})"
            )
        acc = 100.0 * (a_pp + a_aa) / C
        return cls(image, C, total_faces, a_pp, a_aa, a_ps, a_ap, a_as, acc)


@dataclass(frozen=True)
class RecognitionReport:
    rows: Tuple[RecognitionReportRow, ...]
    accuracy: float

    def to_json(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "accuracy": self.accuracy}

    def to_table(self) -> str:
        header = ["GP", "C", "Total Faces", "a_pp", "a_aa", "a_ps", "a_ap", "a_as", "Accuracy"]
        body = [
            [r.image, r.C, r.total_faces, f"{r.a_pp:g}", r.a_aa, r.a_ps, r.a_ap, r.a_as,
             f"{r.accuracy:.2f}%"]
            for r in self.rows
        ]
        return format_table(header, body, f"Mean accuracy: {self.accuracy:.2f}%")


def recognition_tally(
    truth: GroundTruthImage,
    predictions: Sequence[Tuple[Rect, MatchResult]],
    roster: Roster,
    iou_min: float = 0.5,
) -> RecognitionReportRow:
    for k, face in enumerate(truth.faces):
        if face.label is not None and face.label not in roster.labels:
            raise UnknownLabelInTruth(
                f"{truth.image}: face {k} label {face.label!r} is not in the roster"
            )
    m = match_detections([p[0] for p in predictions], [f.box for f in truth.faces], iou_min)
    present = {f.label for f in truth.faces if f.label is not None}
    consumed = set()
    a_pp = a_ps = a_ap = a_as = 0
    for pi, ti in m.pairs:
        expected = truth.faces[ti].label
        got = predictions[pi][1].label
        if expected is not None:
            if got == expected:
                a_pp += 1
            else:
                a_ap += 1
        elif got is not None:
            if got in present:
                a_ps += 1
            else:
                a_as += 1
                if got in roster.labels:
                    consumed.add(got)
    a_ap += sum(1 for ti in m.unmatched_truth if truth.faces[ti].label is not None)
    a_aa = roster.C - len(present | consumed)
    return RecognitionReportRow.from_counts(
        truth.image, roster.C, len(truth.faces), a_pp, a_aa, a_ps, a_ap, a_as
    )


def recognition_report(rows: Iterable[RecognitionReportRow]) -> RecognitionReport:
    rows = tuple(rows)
    if not rows:
        raise EmptyInput("recognition report needs at least one row")
    return RecognitionReport(rows, sum(r.accuracy for r in rows) / len(rows))


# --------------------------------------------------------------------------
# JSON inputs and text output


def _box(value, where: str) -> Rect:
    if (
        not isinstance(value, list)
        or len(value) != 4
        or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in value)
    ):
        raise SchemaError(f"{where}: 'box' must be [x, y, w, h] of non-negative integers")
    return Rect(*value)


def parse_ground_truth(doc) -> GroundTruthImage:
    """Validate ``{"image": str, "faces": [{"box": [x,y,w,h], "label": str|null}]}``."""
    if not isinstance(doc, dict):
        raise SchemaError("ground truth: document must be a JSON object")
    image = doc.get("image")
    if not isinstance(image, str):
        raise SchemaError("ground truth: 'image' must be a string")
    faces = doc.get("faces")
    if not isinstance(faces, list):
        raise SchemaError(f"{image}: 'faces' must be a list")
    out = []
    for k, f in enumerate(faces):
        where = f"{image}: faces[{k}]"
        if not isinstance(f, dict):
            raise SchemaError(f"{where}: must be an object")
        label = f.get("label")
        if label is not None and not isinstance(label, str):
            raise SchemaError(f"{where}: 'label' must be a string or null")
        out.append(GroundTruthFace(_box(f.get("box"), where), label))
    return GroundTruthImage(image, tuple(out))


def parse_roster(doc) -> Roster:
    if not isinstance(doc, list) or not doc or not all(isinstance(v, str) for v in doc):
        raise SchemaError("roster: must be a non-empty JSON array of label strings")
    if len(set(doc)) != len(doc):
        raise SchemaError("roster: labels must be distinct")
    return Roster(frozenset(doc))


def format_table(header: List[str], rows: List[list], footer: str = "") -> str:
    cells = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if footer:
        lines.append(footer)
    return "\n".join(lines)


def dumps(report) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
