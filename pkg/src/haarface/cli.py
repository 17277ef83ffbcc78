"""Command-line entry point.

Exit codes: 0 ok, 2 bad flags, 3 unreadable input, 4 cascade parse failure,
5 no face found, 6 empty gallery, 7 JSON schema violation.
"""
from __future__ import annotations

import argparse
import json
import os
import re
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .cascade import parse_cascade_xml
from .detector import ScanParams, detect_multiscale
from .encoder import encode_face
from .errors import (
    CascadeError,
    EmptyInput,
    GalleryError,
    ImageTooSmall,
    NetpbmError,
    RectOutOfBounds,
    SchemaError,
    UnknownLabelInTruth,
)
from .evaluation import (
    DetectionReportRow,
    RecognitionReportRow,
    detection_report,
    match_detections,
    parse_ground_truth,
    parse_roster,
    recognition_report,
    recognition_tally,
)
from .gallery import (
    DEFAULT_THRESHOLD,
    Gallery,
    MatchResult,
    enroll,
    load_gallery,
    match_probe,
    write_gallery_file,
)
from .imaging import GrayImage, Rect, RgbImage, annotate, load_netpbm, save_netpbm, to_gray


EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_MODEL = 4
EXIT_NO_FACE = 5
EXIT_EMPTY_GALLERY = 6
EXIT_SCHEMA = 7

CASCADE_ENV = "FACE_CASCADE"
LOW_RES_SIDE = 64
FLAT_STD = 2.0


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# helpers


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise CliError(EXIT_INPUT, f"cannot read {path}: {exc.strerror or exc}") from None


def _warn(message: str) -> None:
    print(f"haarface: warning: {message}", file=sys.stderr)


def _read_image(path: str):
    try:
        img = load_netpbm(_read_bytes(path))
    except NetpbmError as exc:
        raise CliError(EXIT_INPUT, f"cannot decode {path}: {exc}") from None
    gray = to_gray(img) if isinstance(img, RgbImage) else img
    _quality_warnings(path, gray)
    return img, gray


def _quality_warnings(path: str, gray: GrayImage) -> None:
    side = min(gray.width, gray.height)
    if side < LOW_RES_SIDE:
        _warn(f"{path}: low resolution (shorter side {side} px < {LOW_RES_SIDE}); accuracy may suffer")
    if float(np.std(gray.pixels)) < FLAT_STD:
        _warn(f"{path}: image is nearly constant; faces are unlikely to be found")


def _read_json(path: str):
    try:
        return json.loads(_read_bytes(path).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_INPUT, f"cannot parse JSON in {path}: {exc}") from None


def _cascade_path(args) -> str:
    path = args.cascade or os.environ.get(CASCADE_ENV)
    if not path:
        args._parser.error(f"--cascade is required (or set {CASCADE_ENV})")
    return path


def _load_model(args):
    path = _cascade_path(args)
    data = _read_bytes(path)
    try:
        return parse_cascade_xml(data)
    except CascadeError as exc:
        raise CliError(EXIT_MODEL, f"{path}: {type(exc).__name__}: {exc}") from None


def _load_gallery(path: str, missing_ok: bool = False) -> Gallery:
    if missing_ok and not os.path.exists(path):
        return Gallery()
    data = _read_bytes(path)
    try:
        return load_gallery(data)
    except GalleryError as exc:
        raise CliError(EXIT_INPUT, f"{path}: {type(exc).__name__}: {exc}") from None


def _scan_params(args) -> ScanParams:
    try:
        return ScanParams(args.scale_factor, args.stride_factor, args.min_neighbors,
                          args.min_size, args.max_size)
    except ValueError as exc:
        args._parser.error(str(exc))


def _detect(model, gray, args):
    try:
        return detect_multiscale(model, gray, _scan_params(args), workers=args.workers)
    except ImageTooSmall as exc:
        _warn(str(exc))
        return []


def _parse_box(text: str) -> Rect:
    try:
        parts = [int(v) for v in text.replace(" ", "").split(",")]
        return Rect(*parts)
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"expected x,y,w,h non-negative integers, got {text!r}")


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


_NUMBER_LIST = re.compile(r"\[\s+([-+.\deE]+(?:,\s+[-+.\deE]+)*)\s+\]")


def _dump(obj) -> str:
    """Indented JSON with numeric lists kept on one line."""
    text = json.dumps(obj, indent=2)
    return _NUMBER_LIST.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text)


def _write_annotated(path, img, boxes):
    rgb = img if isinstance(img, RgbImage) else RgbImage.from_gray(img)
    with open(path, "wb") as fh:
        fh.write(save_netpbm(annotate(rgb, boxes)))


# --------------------------------------------------------------------------
# commands


def cmd_detect(args) -> int:
    model = _load_model(args)
    img, gray = _read_image(args.image)
    dets = _detect(model, gray, args)
    _emit(args, _dump({"image": args.image, "detections": [d.to_json() for d in dets]}))
    if args.annotate:
        _write_annotated(args.annotate, img, [(d.box, None) for d in dets])
    return 0


def _largest(dets):
    return max(dets, key=lambda d: (d.box.area, d.neighbors, -d.box.y, -d.box.x)).box


def cmd_enroll(args) -> int:
    gallery = _load_gallery(args.gallery, missing_ok=True)
    img, gray = _read_image(args.image)
    if args.box is not None:
        box = args.box
    else:
        dets = _detect(_load_model(args), gray, args)
        if not dets:
            raise CliError(EXIT_NO_FACE, f"{args.image}: no face found")
        box = _largest(dets)
    try:
        enc = encode_face(gray, box)
        gallery = enroll(gallery, args.label, enc)
    except RectOutOfBounds as exc:
        args._parser.error(str(exc))
    except GalleryError as exc:
        args._parser.error(str(exc))
    except ValueError as exc:
        raise CliError(EXIT_INPUT, f"{args.image}: {exc}") from None
    write_gallery_file(args.gallery, gallery)
    print(f"entries: {len(gallery)}")
    print(f"C: {gallery.distinct_labels}")
    return 0


def cmd_encode(args) -> int:
    img, gray = _read_image(args.image)
    box = args.box if args.box is not None else Rect(0, 0, gray.width, gray.height)
    try:
        enc = encode_face(gray, box)
    except (RectOutOfBounds, ValueError) as exc:
        raise CliError(EXIT_INPUT, f"{args.image}: {exc}") from None
    _emit(args, _dump({"image": args.image, "box": box.as_list(), "encoding": enc.values.tolist()}))
    return 0


def cmd_recognize(args) -> int:
    model = _load_model(args)
    gallery = _load_gallery(args.gallery)
    if not gallery.entries:
        raise CliError(EXIT_EMPTY_GALLERY, f"{args.gallery}: gallery is empty")
    img, gray = _read_image(args.image)
    faces = []
    boxes = []
    for d in _detect(model, gray, args):
        try:
            enc = encode_face(gray, d.box)
        except ValueError:
            res = MatchResult(None, float("inf"))
        else:
            res = match_probe(gallery, enc, args.threshold)
        faces.append({"box": d.box.as_list(), "label": res.label,
                      "distance": res.distance if np.isfinite(res.distance) else None})
        boxes.append((d.box, res.label or "unknown"))
    _emit(args, _dump({"image": args.image, "faces": faces}))
    if args.annotate:
        _write_annotated(args.annotate, img, boxes)
    return 0


def cmd_gallery_list(args) -> int:
    gallery = _load_gallery(args.gallery)
    for i, e in enumerate(gallery.entries):
        print(f"{i}\t{e.label}")
    print(f"entries: {len(gallery)}")
    print(f"C: {gallery.distinct_labels}")
    return 0


def _documents(paths: List[str]):
    docs = []
    for p in paths:
        doc = _read_json(p)
        docs.extend(doc if isinstance(doc, list) else [doc])
    return docs


def _field(doc, name, kind, where, default=None, required=True):
    if name not in doc:
        if required:
            raise SchemaError(f"{where}: missing field '{name}'")
        return default
    v = doc[name]
    if isinstance(v, bool) or not isinstance(v, kind):
        raise SchemaError(f"{where}: field '{name}' has the wrong type")
    return v


def _pred_boxes(doc, where, key):
    items = doc.get(key)
    if not isinstance(items, list):
        raise SchemaError(f"{where}: '{key}' must be a list")
    out = []
    for k, it in enumerate(items):
        if not isinstance(it, dict):
            raise SchemaError(f"{where}: {key}[{k}] must be an object")
        box = it.get("box")
        if not (isinstance(box, list) and len(box) == 4
                and all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in box)):
            raise SchemaError(f"{where}: {key}[{k}].box must be [x, y, w, h]")
        label = it.get("label")
        if label is not None and not isinstance(label, str):
            raise SchemaError(f"{where}: {key}[{k}].label must be a string or null")
        dist = it.get("distance")
        out.append((Rect(*box), MatchResult(label, float(dist) if isinstance(dist, (int, float)) else 0.0)))
    return out


def _index_predictions(docs, key):
    index = {}
    for n, doc in enumerate(docs):
        if not isinstance(doc, dict) or not isinstance(doc.get("image"), str):
            raise SchemaError(f"predictions[{n}]: field 'image' must be a string")
        k = key if key in doc else ("faces" if "faces" in doc else "detections")
        preds = _pred_boxes(doc, doc["image"], k)
        index[doc["image"]] = preds
        index.setdefault(os.path.basename(doc["image"]), preds)
    return index


def _lookup(index, image):
    if image in index:
        return index[image]
    return index.get(os.path.basename(image), [])


def cmd_eval_detect(args) -> int:
    if args.counts:
        rows = []
        for n, doc in enumerate(_documents(args.counts)):
            where = f"counts[{n}]"
            if not isinstance(doc, dict):
                raise SchemaError(f"{where}: must be an object")
            try:
                rows.append(DetectionReportRow.from_counts(
                    str(_field(doc, "image", (str, int), where)),
                    _field(doc, "total_faces", int, where),
                    _field(doc, "detected_faces", int, where),
                    _field(doc, "fp", int, where, 0, required=False),
                ))
            except ValueError as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"{where}: {exc}") from None
        report = detection_report(rows)
    else:
        if not args.truth:
            args._parser.error("either --counts or --truth/--pred is required")
        preds = _index_predictions(_documents(args.pred or []), "detections")
        items = []
        for doc in _documents(args.truth):
            gt = parse_ground_truth(doc)
            boxes = [b for b, _ in _lookup(preds, gt.image)]
            items.append((gt.image, match_detections(boxes, [f.box for f in gt.faces], args.iou_min)))
        report = detection_report(items)
    _emit(args, report.to_table() if args.format == "table" else _dump(report.to_json()))
    return 0


def cmd_eval_recognize(args) -> int:
    if args.counts:
        rows = []
        for n, doc in enumerate(_documents(args.counts)):
            where = f"counts[{n}]"
            if not isinstance(doc, dict):
                raise SchemaError(f"{where}: must be an object")
            try:
                rows.append(RecognitionReportRow.from_counts(
                    str(_field(doc, "image", (str, int), where)),
                    _field(doc, "C", int, where),
                    _field(doc, "total_faces", int, where),
                    _field(doc, "a_pp", (int, float), where),
                    _field(doc, "a_aa", int, where),
                    _field(doc, "a_ps", int, where, 0, required=False),
                    _field(doc, "a_ap", int, where, 0, required=False),
                    _field(doc, "a_as", int, where, 0, required=False),
                ))
            except ValueError as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"{where}: {exc}") from None
        report = recognition_report(rows)
    else:
        if not args.truth or not args.roster:
            args._parser.error("either --counts or --truth/--pred/--roster is required")
        roster = parse_roster(_read_json(args.roster))
        preds = _index_predictions(_documents(args.pred or []), "faces")
        rows = []
        for doc in _documents(args.truth):
            gt = parse_ground_truth(doc)
            rows.append(recognition_tally(gt, _lookup(preds, gt.image), roster, args.iou_min))
        report = recognition_report(rows)
    _emit(args, report.to_table() if args.format == "table" else _dump(report.to_json()))
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _add_scan_flags(p):
    g = p.add_argument_group("detection")
    g.add_argument("--cascade", help=f"cascade XML model (default: ${CASCADE_ENV})")
    g.add_argument("--scale-factor", type=float, default=1.1, help="scale step between passes (default: %(default)s)")
    g.add_argument("--stride-factor", type=float, default=2.0,
                   help="window stride in base-window pixels (default: %(default)s)")
    g.add_argument("--min-neighbors", type=int, default=3, help="minimum cluster support (default: %(default)s)")
    g.add_argument("--min-size", type=int, default=None, help="smallest window side in px (default: none)")
    g.add_argument("--max-size", type=int, default=None, help="largest window side in px (default: none)")
    g.add_argument("--workers", type=int, default=None, help="threads for scanning scales (default: serial)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haarface", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(subparsers, name, func, help):
        p = subparsers.add_parser(name, help=help, description=help,
                                  formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func, _parser=p)
        return p

    p = add(sub, "detect", cmd_detect, "find faces in a Netpbm image")
    p.add_argument("image")
    _add_scan_flags(p)
    p.add_argument("--annotate", metavar="OUT.ppm", help="write a copy with boxes drawn")
    p.add_argument("--output", "-o", help="write JSON here instead of stdout")

    p = add(sub, "enroll", cmd_enroll, "encode a face and add it to a gallery")
    p.add_argument("image")
    p.add_argument("--gallery", required=True, help="FGAL file (created if absent)")
    p.add_argument("--label", required=True, help="identity name")
    p.add_argument("--box", type=_parse_box, help="face box x,y,w,h (skips detection)")
    _add_scan_flags(p)

    p = add(sub, "encode", cmd_encode, "print the 128-d encoding of a face box")
    p.add_argument("image")
    p.add_argument("--box", type=_parse_box, help="face box x,y,w,h (default: whole image)")
    p.add_argument("--output", "-o", help="write JSON here instead of stdout")

    p = add(sub, "recognize", cmd_recognize, "detect faces and label them from a gallery")
    p.add_argument("image")
    p.add_argument("--gallery", required=True, help="FGAL file")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD, help="maximum match distance")
    _add_scan_flags(p)
    p.add_argument("--annotate", metavar="OUT.ppm", help="write a copy with labelled boxes")
    p.add_argument("--output", "-o", help="write JSON here instead of stdout")

    p = add(sub, "eval", None, "accuracy reports")
    esub = p.add_subparsers(dest="eval_command", metavar="KIND")
    esub.required = True
    for name, func, help in (
        ("detect", cmd_eval_detect, "detection accuracy (Total/Detected faces)"),
        ("recognize", cmd_eval_recognize, "recognition accuracy ((a_pp + a_aa) / C)"),
    ):
        e = add(esub, name, func, help)
        e.add_argument("--truth", nargs="+", help="ground-truth JSON files")
        e.add_argument("--pred", nargs="+", help="prediction JSON files (detect/recognize output)")
        e.add_argument("--counts", nargs="+", help="JSON rows of raw counts (bypasses box matching)")
        e.add_argument("--iou-min", type=float, default=0.5, help="IoU needed to match a box")
        e.add_argument("--format", choices=("json", "table"), default="json", help="report format")
        e.add_argument("--output", "-o", help="write the report here instead of stdout")
        if name == "recognize":
            e.add_argument("--roster", help="JSON array of enrolled labels")

    p = add(sub, "gallery", None, "gallery utilities")
    gsub = p.add_subparsers(dest="gallery_command", metavar="ACTION")
    gsub.required = True
    g = add(gsub, "list", cmd_gallery_list, "list gallery entries")
    g.add_argument("--gallery", required=True, help="FGAL file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"haarface: error: {exc}", file=sys.stderr)
        return exc.code
    except (SchemaError, UnknownLabelInTruth, EmptyInput) as exc:
        print(f"haarface: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ValueError, OSError) as exc:
        print(f"haarface: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
