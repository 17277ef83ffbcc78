"""Pure numpy fallback for the compiled scan kernel.

All windows of one scale are evaluated together; a boolean mask of surviving
windows shrinks stage by stage, matching the compiled early exit.
"""
import numpy as np


def _box(t, xs, ys, x, y, w, h):
    x0 = xs + x
    y0 = ys + y
    return t[y0 + h, x0 + w] - t[y0 + h, x0] - t[y0, x0 + w] + t[y0, x0]


def scan_scale(S, SQ, win_w, win_h, stride, rects, weights, nrects,
               stump_feat, stump_thr, stump_left, stump_right, stage_start, stage_thr):
    height = S.shape[0] - 1
    width = S.shape[1] - 1
    if win_w > width or win_h > height or win_w < 1 or win_h < 1:
        return np.zeros((0, 2), dtype=np.int64)
    gy, gx = np.meshgrid(
        np.arange(0, height - win_h + 1, stride, dtype=np.int64),
        np.arange(0, width - win_w + 1, stride, dtype=np.int64),
        indexing="ij",
    )
    xs = gx.ravel()
    ys = gy.ravel()
    area = float(win_w) * float(win_h)
    mean = _box(S, xs, ys, 0, 0, win_w, win_h).astype(np.float64) / area
    var = _box(SQ, xs, ys, 0, 0, win_w, win_h).astype(np.float64) / area - mean * mean
    sigma = np.where(var > 0, np.sqrt(np.maximum(var, 0.0)), 1.0)

    for st in range(len(stage_thr)):
        if xs.size == 0:
            break
        stage_sum = np.zeros(xs.size, dtype=np.float64)
        for k in range(stage_start[st], stage_start[st + 1]):
            f = stump_feat[k]
            acc = np.zeros(xs.size, dtype=np.float64)
            for m in range(nrects[f]):
                rx, ry, rw, rh = (int(v) for v in rects[f, m])
                acc = acc + weights[f, m] * _box(S, xs, ys, rx, ry, rw, rh).astype(np.float64)
            nu = acc / area
            stage_sum = stage_sum + np.where(nu < stump_thr[k] * sigma, stump_left[k], stump_right[k])
        keep = ~(stage_sum < stage_thr[st])
        xs, ys, sigma = xs[keep], ys[keep], sigma[keep]
    return np.stack([xs, ys], axis=1).astype(np.int64)
