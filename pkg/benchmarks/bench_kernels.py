"""Time the compiled and numpy scan kernels on the same detection workload.

    python3 benchmarks/bench_kernels.py [--size 320x240] [--repeat 5]

"kernel" times only the per-scale window scans; "detect" is the full
detect_multiscale call including rectangle construction and grouping.
"""
import argparse
import time

import numpy as np

from haarface import _kernels
from haarface.cascade import parse_cascade_xml, toy_cascade_bytes
from haarface.detector import ScanParams, detect_multiscale, iter_scales, scale_cascade
from haarface.imaging import GrayImage, integral


def best_of(repeat, fn):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", default="320x240")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--stride-factor", type=float, default=1.0)
    args = ap.parse_args()
    w, h = (int(v) for v in args.size.lower().split("x"))

    model = parse_cascade_xml(toy_cascade_bytes())
    img = GrayImage(np.random.default_rng(0).integers(0, 256, (h, w), dtype=np.uint8))
    ii = integral(img)
    p = ScanParams(stride_factor=args.stride_factor)
    jobs = []
    for s, _, _, stride in iter_scales(model, w, h, p):
        sc = scale_cascade(model, s)
        q = sc.packed
        jobs.append((ii.sum, ii.sqsum, sc.win_w, sc.win_h, stride, sc.rects, sc.weights, q.nrects,
                     q.stump_feat, q.stump_thr, q.stump_left, q.stump_right, q.stage_start, q.stage_thr))

    results = {}
    for name, kernel in sorted(_kernels.available.items()):
        tk, hits = best_of(args.repeat, lambda: [kernel(*job) for job in jobs])
        td, dets = best_of(args.repeat, lambda: detect_multiscale(model, img, p, backend=name))
        results[name] = (tk, [x.tolist() for x in hits], dets)
        total = sum(len(x) for x in hits)
        print(f"{name:>7}: kernel {tk * 1e3:8.2f} ms  detect {td * 1e3:8.2f} ms  "
              f"({len(jobs)} scales, {total} raw windows, {len(dets)} detections)")
    if len(results) == 2:
        c, py = results["cython"], results["python"]
        print(f"kernel speedup {py[0] / c[0]:.1f}x, identical output: {c[1:] == py[1:]}")


if __name__ == "__main__":
    main()
