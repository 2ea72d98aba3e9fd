"""Shared fixtures: synthetic grayscale images and on-disk PGM datasets."""

import numpy as np
import pytest

from cprn.image import GrayImage, save_pgm


def synth_image(seed, size=96):
    """Deterministic synthetic grayscale content: smooth low-frequency background
    plus sharp rectangles and discs (the edge content super-resolution lives on)."""
    rng = np.random.default_rng((8888, seed))
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.full((size, size), 0.5, np.float64)
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 3.0, 2)
        img += rng.uniform(0.05, 0.15) * np.cos(2 * np.pi * (fx * xx + fy * yy) + rng.uniform(0, 2 * np.pi))
    lo = min(4, size // 4)
    hi = max(lo + 1, size - 8)
    for _ in range(8):
        y0 = int(rng.integers(0, hi))
        x0 = int(rng.integers(0, hi))
        h = int(rng.integers(3, max(8, size // 3)))
        w = int(rng.integers(3, max(8, size // 3)))
        img[y0:y0 + h, x0:x0 + w] = rng.uniform(0.05, 0.95)
    for _ in range(4):
        cy = int(rng.integers(lo, hi))
        cx = int(rng.integers(lo, hi))
        r = int(rng.integers(2, max(5, size // 6)))
        mask = (yy * size - cy) ** 2 + (xx * size - cx) ** 2 <= r * r
        img[mask] = rng.uniform(0.05, 0.95)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def write_dataset(root, n_images=4, size=64, seed0=0):
    """Write n synthetic PGMs plus a manifest file; returns the manifest path."""
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for i in range(n_images):
        name = f"img{i:03d}.pgm"
        save_pgm(GrayImage(synth_image(seed0 + i, size)), root / name)
        names.append(name)
    manifest = root / "manifest.txt"
    manifest.write_text("# synthetic test set\n" + "\n".join(names) + "\n", encoding="utf-8")
    return manifest


@pytest.fixture
def dataset(tmp_path):
    return write_dataset(tmp_path / "data")
