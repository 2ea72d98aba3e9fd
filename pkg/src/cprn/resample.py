"""Separable bicubic (Catmull-Rom, a = -0.5) resampling for factors 2, 4, 1/2, 1/4.

Output pixel centers map to input coordinate (o + 0.5) / f - 0.5. On downscale
the kernel support is stretched by 1/f (anti-aliasing); weights are renormalized
to sum to one, so constants are reproduced exactly. Borders are handled by
clamped replication, and the result is clamped back to [0,1].
"""

import numpy as np

from .errors import ConfigError
from .image import GrayImage

FACTORS = (0.5, 0.25, 2.0, 4.0)
_A = -0.5  # Catmull-Rom


def cubic_kernel(x):
    """Keys cubic with a = -0.5; support [-2, 2]."""
    x = np.abs(x)
    out = np.zeros_like(x, dtype=np.float64)
    near = x <= 1
    far = (x > 1) & (x < 2)
    out[near] = ((_A + 2) * x[near] - (_A + 3)) * x[near] * x[near] + 1
    out[far] = ((_A * x[far] - 5 * _A) * x[far] + 8 * _A) * x[far] - 4 * _A
    return out


def _axis_weights(in_len, out_len, factor):
    """Per-output-pixel tap indices (clamped) and normalized weights."""
    scale = min(factor, 1.0)  # kernel stretch for downscale
    support = 2.0 / scale
    centers = (np.arange(out_len) + 0.5) / factor - 0.5
    left = np.ceil(centers - support).astype(np.int64)
    ntaps = int(np.floor(2 * support)) + 1
    offsets = np.arange(ntaps)
    idx = left[:, None] + offsets[None, :]
    w = cubic_kernel((centers[:, None] - idx) * scale) * scale
    w /= w.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), w


def _resize_axis(arr, out_len, factor, axis):
    idx, w = _axis_weights(arr.shape[axis], out_len, factor)
    moved = np.moveaxis(arr, axis, 0)
    out = np.einsum("ot,ot...->o...", w, moved[idx])
    return np.moveaxis(out, 0, axis)


def resize_array(pixels, factor):
    """Bicubic resize of a 2-D float array; result clamped to [0,1]."""
    if factor not in FACTORS:
        raise ConfigError(f"factor must be one of {FACTORS}, got {factor}")
    h, w = pixels.shape
    out_h, out_w = h * factor, w * factor
    if out_h != int(out_h) or out_w != int(out_w):
        raise ConfigError(f"{h}x{w} does not scale to integral dims by {factor}; crop first")
    out_h, out_w = int(out_h), int(out_w)
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"output dims {out_h}x{out_w} < 1")
    work = pixels.astype(np.float64)
    work = _resize_axis(work, out_h, factor, axis=0)
    work = _resize_axis(work, out_w, factor, axis=1)
    return np.clip(work, 0.0, 1.0).astype(np.float32)


def bicubic_resize(img, factor):
    """Bicubic resize of a GrayImage by a factor in {1/2, 1/4, 2, 4}."""
    return GrayImage(resize_array(img.pixels, factor), depth=img.depth)
