"""Face detection with Haar cascades, compact face encodings and gallery matching."""
from ._kernels import BACKEND
from .cascade import CascadeModel, load_cascade, parse_cascade_xml, toy_cascade_bytes
from .detector import Detection, ScanParams, detect_multiscale, evaluate_window, group_rectangles
from .encoder import Encoding, encode_face
from .gallery import Gallery, MatchResult, enroll, load_gallery, match_probe, save_gallery
from .imaging import GrayImage, Rect, RgbImage, integral, load_netpbm, save_netpbm, to_gray

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "CascadeModel",
    "Detection",
    "Encoding",
    "Gallery",
    "GrayImage",
    "MatchResult",
    "Rect",
    "RgbImage",
    "ScanParams",
    "detect_multiscale",
    "encode_face",
    "enroll",
    "evaluate_window",
    "group_rectangles",
    "integral",
    "load_cascade",
    "load_gallery",
    "load_netpbm",
    "match_probe",
    "parse_cascade_xml",
    "save_gallery",
    "save_netpbm",
    "to_gray",
    "toy_cascade_bytes",
]
