"""Independent brute-force references used as test oracles.

Everything here is written as straight loops in float64, deliberately sharing
no code with the package implementations.
"""

import numpy as np


def naive_conv2d(x, w, b=None, stride=1, padding=0):
    """Direct 7-loop cross-correlation over an NCHW batch."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, ic, h, wd = x.shape
    oc, ic2, k, _ = w.shape
    assert ic == ic2
    oh = (h + 2 * padding - k) // stride + 1
    ow = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, oc, oh, ow))
    for bi in range(n):
        for o in range(oc):
            for oy in range(oh):
                for ox in range(ow):
                    acc = 0.0
                    for ci in range(ic):
                        for ky in range(k):
                            for kx in range(k):
                                iy = oy * stride + ky - padding
                                ix = ox * stride + kx - padding
                                if 0 <= iy < h and 0 <= ix < wd:
                                    acc += x[bi, ci, iy, ix] * w[o, ci, ky, kx]
                    out[bi, o, oy, ox] = acc
            if b is not None:
                out[bi, o] += np.asarray(b, dtype=np.float64).reshape(-1)[o]
    return out


def naive_conv2d_transpose(x, w, b=None, stride=1, padding=0):
    """Direct scatter implementation of the conv adjoint.

    Weight layout is the conv2d one: (in_channels_of_transpose, out_channels, k, k).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, ic, h, wd = x.shape
    ic2, oc, k, _ = w.shape
    assert ic == ic2
    oh = stride * (h - 1) + k - 2 * padding
    ow = stride * (wd - 1) + k - 2 * padding
    out = np.zeros((n, oc, oh, ow))
    for bi in range(n):
        for ci in range(ic):
            for iy in range(h):
                for ix in range(wd):
                    v = x[bi, ci, iy, ix]
                    for o in range(oc):
                        for ky in range(k):
                            for kx in range(k):
                                oy = iy * stride + ky - padding
                                ox = ix * stride + kx - padding
                                if 0 <= oy < oh and 0 <= ox < ow:
                                    out[bi, o, oy, ox] += v * w[ci, o, ky, kx]
    if b is not None:
        out += np.asarray(b, dtype=np.float64).reshape(1, oc, 1, 1)
    return out


def naive_prelu(x, slope):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, slope * x)


def naive_cubic(x):
    """Scalar Keys cubic, a = -0.5."""
    a = -0.5
    x = abs(float(x))
    if x <= 1:
        return ((a + 2) * x - (a + 3)) * x * x + 1
    if x < 2:
        return ((a * x - 5 * a) * x + 8 * a) * x - 4 * a
    return 0.0


def naive_bicubic_resize(pixels, factor):
    """Per-pixel scalar bicubic with the same conventions as the implementation:
    center mapping (o+0.5)/f - 0.5, kernel stretched by 1/f on downscale,
    weight renormalization, clamped border replication, output clamped to [0,1]."""
    pixels = np.asarray(pixels, dtype=np.float64)
    h, w = pixels.shape
    out_h, out_w = int(round(h * factor)), int(round(w * factor))
    kscale = min(factor, 1.0)
    support = 2.0 / kscale

    def taps(center, length):
        lo = int(np.ceil(center - support))
        hi = int(np.floor(center + support))
        idx, wt = [], []
        for i in range(lo, hi + 1):
            weight = naive_cubic((center - i) * kscale) * kscale
            idx.append(min(max(i, 0), length - 1))
            wt.append(weight)
        wt = np.asarray(wt)
        return idx, wt / wt.sum()

    out = np.zeros((out_h, out_w))
    for oy in range(out_h):
        cy = (oy + 0.5) / factor - 0.5
        ys, wy = taps(cy, h)
        for ox in range(out_w):
            cx = (ox + 0.5) / factor - 0.5
            xs, wx = taps(cx, w)
            acc = 0.0
            for yi, vy in zip(ys, wy):
                for xi, vx in zip(xs, wx):
                    acc += vy * vx * pixels[yi, xi]
            out[oy, ox] = acc
    return np.clip(out, 0.0, 1.0)


def naive_ssim(a, b, max_val=1.0, window=11, sigma=1.5):
    """Sliding-window SSIM computed window by window."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    h, w = a.shape
    t = np.arange(window) - (window - 1) / 2.0
    g1 = np.exp(-(t * t) / (2 * sigma * sigma))
    g1 /= g1.sum()
    g2 = np.outer(g1, g1)
    c1 = (0.01 * max_val) ** 2
    c2 = (0.03 * max_val) ** 2
    vals = []
    for y in range(h - window + 1):
        for x in range(w - window + 1):
            pa = a[y:y + window, x:x + window]
            pb = b[y:y + window, x:x + window]
            mu_a = float((g2 * pa).sum())
            mu_b = float((g2 * pb).sum())
            va = float((g2 * pa * pa).sum()) - mu_a * mu_a
            vb = float((g2 * pb * pb).sum()) - mu_b * mu_b
            cov = float((g2 * pa * pb).sum()) - mu_a * mu_b
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2)
            vals.append(num / den)
    return float(np.mean(vals))
