# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sliding-window cascade scan.

Mirrors ``_pykernels.scan_scale`` operation for operation so both backends
produce bit-identical decisions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

ctypedef long long i64


cdef inline i64 _box(const i64[:, ::1] t, int x, int y, int w, int h) noexcept nogil:
    return t[y + h, x + w] - t[y + h, x] - t[y, x + w] + t[y, x]


def scan_scale(const i64[:, ::1] S, const i64[:, ::1] SQ,
               int win_w, int win_h, int stride,
               const int[:, :, ::1] rects, const double[:, ::1] weights,
               const int[::1] nrects,
               const int[::1] stump_feat, const double[::1] stump_thr,
               const double[::1] stump_left, const double[::1] stump_right,
               const int[::1] stage_start, const double[::1] stage_thr):
    cdef int height = S.shape[0] - 1
    cdef int width = S.shape[1] - 1
    cdef int nstages = stage_thr.shape[0]
    if win_w > width or win_h > height or win_w < 1 or win_h < 1:
        return np.zeros((0, 2), dtype=np.int64)
    cdef int nx = (width - win_w) // stride + 1
    cdef int ny = (height - win_h) // stride + 1
    out_arr = np.empty((<Py_ssize_t>nx * ny, 2), dtype=np.int64)
    cdef i64[:, ::1] out = out_arr
    cdef Py_ssize_t count = 0
    cdef double area = <double>win_w * <double>win_h
    cdef int x, y, ix, iy, st, k, f, m, passed
    cdef double mean, var, sigma, acc, nu, stage_sum

    with nogil:
        for iy in range(ny):
            y = iy * stride
            for ix in range(nx):
                x = ix * stride
                mean = <double>_box(S, x, y, win_w, win_h) / area
                var = <double>_box(SQ, x, y, win_w, win_h) / area - mean * mean
                if var > 0:
                    sigma = sqrt(var)
                else:
                    sigma = 1.0
                passed = 1
                for st in range(nstages):
                    stage_sum = 0.0
                    for k in range(stage_start[st], stage_start[st + 1]):
                        f = stump_feat[k]
                        acc = 0.0
                        for m in range(nrects[f]):
                            acc = acc + weights[f, m] * <double>_box(
                                S, x + rects[f, m, 0], y + rects[f, m, 1],
                                rects[f, m, 2], rects[f, m, 3])
                        nu = acc / area
                        if nu < stump_thr[k] * sigma:
                            stage_sum = stage_sum + stump_left[k]
                        else:
                            stage_sum = stage_sum + stump_right[k]
                    if stage_sum < stage_thr[st]:
                        passed = 0
                        break
                if passed:
                    out[count, 0] = x
                    out[count, 1] = y
                    count += 1
    return out_arr[:count].copy()
