"""Dataset manifests and aligned LR/HR patch sampling.

A manifest is a UTF-8 text file with one HR image path per line ('#' comments
allowed); relative paths resolve against the manifest's directory. LR images
are always derived by bicubic degradation, never stored as ground truth.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .image import load_pgm
from .resample import resize_array

log = logging.getLogger(__name__)


@dataclass
class DatasetManifest:
    """Validated HR path list plus the degradation scale and the train/eval split."""

    paths: list
    scale: int
    patch_size: int
    seed: int
    eval_fraction: float
    train_paths: list = field(default_factory=list)
    eval_paths: list = field(default_factory=list)


def load_manifest(path, scale, patch_size=48, eval_fraction=0.2, seed=0):
    """Parse and validate a manifest; every listed file must exist and parse."""
    if scale not in (2, 4):
        raise ConfigError(f"scale must be 2 or 4, got {scale}")
    if patch_size % scale != 0:
        raise ConfigError(f"patch size {patch_size} must be divisible by scale {scale}")
    if not 0.0 <= eval_fraction < 1.0:
        raise ConfigError(f"eval fraction must be in [0,1), got {eval_fraction}")
    manifest_path = Path(path)
    try:
        text = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc

    paths = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        entry = line.split("#", 1)[0].strip()
        if not entry:
            continue
        img_path = Path(entry)
        if not img_path.is_absolute():
            img_path = manifest_path.parent / img_path
        if not img_path.exists():
            raise ConfigError(f"{path}:{lineno}: image file not found: {img_path}")
        try:
            load_pgm(img_path)
        except ParseError as exc:
            raise ConfigError(f"{path}:{lineno}: {img_path} does not parse: {exc}") from exc
        paths.append(img_path)
    if not paths:
        raise ConfigError(f"manifest {path} lists no images")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(paths))
    n_eval = int(round(len(paths) * eval_fraction))
    eval_idx = set(perm[:n_eval].tolist())
    train = [p for i, p in enumerate(paths) if i not in eval_idx]
    evals = [p for i, p in enumerate(paths) if i in eval_idx]
    return DatasetManifest(paths=paths, scale=scale, patch_size=patch_size, seed=seed,
                           eval_fraction=eval_fraction, train_paths=train, eval_paths=evals)


def sample_patches(hr, scale, patch, count, seed, lr=None):
    """Draw aligned (lr_patch, hr_patch) float32 pairs from one HR image.

    HR offsets are uniform over positions that are multiples of the scale, so
    the LR offset is exactly hr_offset / scale. ``seed`` may be an int or a
    Generator; pass ``lr`` to reuse a precomputed degraded image.
    """
    if patch % scale != 0:
        raise ConfigError(f"patch size {patch} must be divisible by scale {scale}")
    pixels = hr.pixels if hasattr(hr, "pixels") else np.asarray(hr, dtype=np.float32)
    h, w = pixels.shape
    if h < patch or w < patch:
        log.warning("image %dx%d smaller than patch %d; skipped", h, w, patch)
        return []
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if lr is None:
        lr = resize_array(pixels[: h - h % scale, : w - w % scale], 1.0 / scale)
    lp = patch // scale
    max_y = (h - patch) // scale
    max_x = (w - patch) // scale
    pairs = []
    for _ in range(count):
        ly = int(rng.integers(0, max_y + 1))
        lx = int(rng.integers(0, max_x + 1))
        hy, hx = ly * scale, lx * scale
        pairs.append((lr[ly:ly + lp, lx:lx + lp].copy(),
                      pixels[hy:hy + patch, hx:hx + patch].copy()))
    return pairs
