"""Independent transcriptions used to freeze expected values in the unit tests.

S-measure and E-measure follow the public MATLAB evaluation code line by line,
except that the S-measure quadrant split is mirror-symmetric: the boundary sits
at the rounded 0-based centroid + 0.5, with ties rounded toward the middle.
Run: python3 tests/oracles/metrics_oracle.py
"""
import math

import numpy as np

EPS = np.finfo(np.float64).eps


def s_object(x, gt):
    def obj(p, mask):
        vals = p[mask]
        if vals.size == 0:
            return 0.0
        mu = vals.mean()
        sd = vals.std(ddof=1) if vals.size > 1 else 0.0
        return 2.0 * mu / (mu * mu + 1.0 + sd + EPS)

    fg = np.where(gt, x, 0.0)
    bg = np.where(gt, 0.0, 1.0 - x)
    u = gt.mean()
    return u * obj(fg, gt) + (1 - u) * obj(bg, ~gt)


def ssim(p, g):
    n = p.size
    if n == 0:
        return 0.0
    x, y = p.mean(), g.mean()
    sx = ((p - x) ** 2).sum() / (n - 1 + EPS)
    sy = ((g - y) ** 2).sum() / (n - 1 + EPS)
    sxy = ((p - x) * (g - y)).sum() / (n - 1 + EPS)
    a = 4 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0:
        return a / (b + EPS)
    if b == 0:
        return 1.0
    return 0.0


def split_index(b, n):
    lo = math.floor(b)
    if b - lo != 0.5:
        return int(math.floor(b + 0.5))
    return int(lo + 1 if b < n / 2 else lo)


def s_region(x, gt):
    rows, cols = gt.shape
    total = gt.sum()
    if total == 0:
        bx, by = cols / 2, rows / 2
    else:
        bx = (gt.sum(axis=0) * (np.arange(cols) + 0.5)).sum() / total
        by = (gt.sum(axis=1) * (np.arange(rows) + 0.5)).sum() / total
    cx, cy = split_index(bx, cols), split_index(by, rows)
    area = rows * cols
    w1 = cx * cy / area
    w2 = (cols - cx) * cy / area
    w3 = cx * (rows - cy) / area
    w4 = 1 - w1 - w2 - w3
    g = gt.astype(np.float64)
    parts = [(slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, cols)),
             (slice(cy, rows), slice(0, cx)), (slice(cy, rows), slice(cx, cols))]
    qs = [ssim(x[r, c], g[r, c]) for r, c in parts]
    return w1 * qs[0] + w2 * qs[1] + w3 * qs[2] + w4 * qs[3]


def s_measure(x, gt):
    y = gt.mean()
    if y == 0:
        q = 1.0 - x.mean()
    elif y == 1:
        q = x.mean()
    else:
        q = 0.5 * s_object(x, gt) + 0.5 * s_region(x, gt)
    return max(q, 0.0)


def e_single(fm, gt):
    fm = fm.astype(np.float64)
    g = gt.astype(np.float64)
    if g.sum() == 0:
        enh = 1.0 - fm
    elif (1 - g).sum() == 0:
        enh = fm
    else:
        af = fm - fm.mean()
        ag = g - g.mean()
        align = 2 * ag * af / (ag * ag + af * af + EPS)
        enh = (align + 1) ** 2 / 4
    return enh.mean()


def max_e(x, gt):
    return max(e_single(x >= i / 255, gt) for i in range(256))


def max_f(x, gt, beta2=0.3):
    best = 0.0
    for i in range(256):
        b = x >= i / 255
        tp = (b & gt).sum()
        if b.sum() == 0 or tp == 0:
            continue
        p, r = tp / b.sum(), tp / gt.sum()
        best = max(best, (1 + beta2) * p * r / (beta2 * p + r))
    return best


def sig(v):
    return 1 / (1 + math.exp(-v))


if __name__ == "__main__":
    gt = np.zeros((4, 4), bool)
    gt[1:3, 1:3] = True
    const = np.full((4, 4), gt.mean())
    print("s_measure const-mean 4x4: %.12f" % s_measure(const, gt))
    print("s_measure complement 4x4: %.12f" % s_measure(1.0 - gt, gt))
    ramp = np.arange(16, dtype=np.float64).reshape(4, 4) / 15.0
    print("s_measure ramp 4x4: %.12f" % s_measure(ramp, gt))
    print("max_e ramp 4x4: %.12f" % max_e(ramp, gt))
    print("max_f ramp 4x4: %.12f" % max_f(ramp, gt))
    g2 = np.array([[1, 0], [0, 1]], bool)
    print("max_e complement 2x2: %.12f" % max_e(1.0 - g2, g2))

    # scalar GRU with hand-set weights: inputs x, h; gates on [x, h]
    x, h = 0.5, -0.3
    wz, bz, wr, br, wc, bc = (0.4, -0.2), 0.1, (-0.3, 0.8), 0.05, (0.7, 0.6), -0.1
    z = sig(wz[0] * x + wz[1] * h + bz)
    r = sig(wr[0] * x + wr[1] * h + br)
    c = math.tanh(wc[0] * x + wc[1] * r * h + bc)
    print("gru scalar: %.12f" % ((1 - z) * h + z * c))
