"""PSNR / SSIM and batch evaluation against a manifest's eval split.

Metrics operate on the normalized [0,1] single-channel domain with
max_val = 1.0 (for published 8-bit numbers, MAX = 255 is the equivalent
convention). Identical images give the +inf PSNR sentinel. No border cropping
is applied.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .image import GrayImage, load_pgm
from .resample import bicubic_resize
from .tensor import Tensor

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _as_pixels(x):
    return x.pixels.astype(np.float64) if isinstance(x, GrayImage) else np.asarray(x, dtype=np.float64)


def psnr(x, y, max_val=1.0):
    """10*log10(max_val^2 / MSE) in dB; identical images return +inf."""
    a, b = _as_pixels(x), _as_pixels(y)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: dims mismatch {a.shape} vs {b.shape}")
    mse = np.mean((a - b) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(max_val * max_val / mse))


def _gaussian_1d(window, sigma):
    t = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    g = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    """Separable valid-region filtering with a 1-D kernel applied on both axes."""
    tmp = sliding_window_view(img, len(g), axis=1) @ g
    return sliding_window_view(tmp, len(g), axis=0) @ g


def ssim(x, y, max_val=1.0, window=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Mean structural similarity over a Gaussian window, valid-region aggregation."""
    a, b = _as_pixels(x), _as_pixels(y)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: dims mismatch {a.shape} vs {b.shape}")
    if a.shape[0] < window or a.shape[1] < window:
        raise ShapeError(
            f"ssim: image {a.shape} smaller than the {window}x{window} window; "
            f"pass a smaller window"
        )
    g = _gaussian_1d(window, sigma)
    c1 = (SSIM_K1 * max_val) ** 2
    c2 = (SSIM_K2 * max_val) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class EvalRow:
    image: str
    scale: int
    psnr_db: float = float("nan")
    ssim: float = float("nan")
    failed: bool = False


@dataclass
class EvalReport:
    rows: list
    mean_psnr: float
    mean_ssim: float
    metadata: dict = field(default_factory=dict)

    @property
    def has_failures(self):
        return any(r.failed for r in self.rows)


def model_upscaler(model):
    """Wrap a model as a GrayImage -> GrayImage upscaler (clamped to [0,1])."""

    def upscale(lr_img):
        x = Tensor(lr_img.pixels[None, None, :, :].astype(np.float32))
        sr = model(x).data[0, 0]
        return GrayImage(np.clip(sr, 0.0, 1.0), depth=lr_img.depth)

    return upscale


def bicubic_upscaler(scale):
    """The no-model baseline: plain bicubic upscaling."""
    return lambda lr_img: bicubic_resize(lr_img, float(scale))


def evaluate(upscaler, manifest, scale, metadata=None):
    """Full-image evaluation over the manifest's eval split.

    For each image: HR is cropped to a multiple of the scale, LR is derived by
    bicubic degradation, SR = upscaler(LR), and PSNR/SSIM are taken against the
    cropped HR. Rows are sorted by image id; failed loads are marked and
    excluded from the aggregates.
    """
    if not manifest.eval_paths:
        raise ShapeError("empty eval split: nothing to evaluate")
    rows = []
    for path in sorted(manifest.eval_paths, key=lambda p: p.name):
        row = EvalRow(image=path.name, scale=scale)
        try:
            hr = load_pgm(path)
            h = hr.h - hr.h % scale
            w = hr.w - hr.w % scale
            hr_c = GrayImage(hr.pixels[:h, :w], depth=hr.depth)
            lr = bicubic_resize(hr_c, 1.0 / scale)
            sr = upscaler(lr)
            row.psnr_db = psnr(sr, hr_c)
            row.ssim = ssim(sr, hr_c)
        except Exception as exc:
            log.error("evaluation failed for %s: %s", path, exc)
            row.failed = True
        rows.append(row)
    good = [r for r in rows if not r.failed]
    mean_psnr = float(np.mean([r.psnr_db for r in good])) if good else float("nan")
    mean_ssim = float(np.mean([r.ssim for r in good])) if good else float("nan")
    return EvalReport(rows=rows, mean_psnr=mean_psnr, mean_ssim=mean_ssim,
                      metadata=dict(metadata or {}))


def _fmt(v):
    if np.isinf(v):
        return "inf"
    if np.isnan(v):
        return "failed"
    return f"{v:.6f}"


def report_csv(report):
    """Render an EvalReport: header, per-image rows, trailing '#mean'/'#meta' comments."""
    lines = ["image,scale,psnr_db,ssim"]
    for r in report.rows:
        lines.append(f"{r.image},{r.scale},{_fmt(r.psnr_db)},{_fmt(r.ssim)}")
    lines.append(f"#mean,,{_fmt(report.mean_psnr)},{_fmt(report.mean_ssim)}")
    for key in sorted(report.metadata):
        lines.append(f"#meta,{key},{report.metadata[key]}")
    return "\n".join(lines) + "\n"
