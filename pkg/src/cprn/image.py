"""Grayscale images on [0,1] and binary PGM (P5) I/O.

8-bit and 16-bit maxvals only; 16-bit payloads are big-endian per the PGM
standard. save_pgm writes a canonical header, so files it produced round-trip
byte for byte; foreign files round-trip pixel-exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParseError, ShapeError

_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass
class GrayImage:
    """h x w float32 pixels in [0,1] plus the source bit depth (8 or 16)."""

    pixels: np.ndarray
    depth: int = 8

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ShapeError(f"GrayImage needs a 2-D h x w array, got shape {px.shape}")
        if self.depth not in (8, 16):
            raise ShapeError(f"bit depth must be 8 or 16, got {self.depth}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ShapeError(f"pixel values outside [0,1]: min {px.min()}, max {px.max()}")
        self.pixels = px

    @property
    def h(self):
        return self.pixels.shape[0]

    @property
    def w(self):
        return self.pixels.shape[1]


class _PgmScanner:
    """Tokenizer over the PGM header; '#' starts a comment running to end of line."""

    def __init__(self, data):
        self.data = data
        self.pos = 0

    def _skip_space_and_comments(self):
        while self.pos < len(self.data):
            b = self.data[self.pos:self.pos + 1]
            if b in (b"#",):
                nl = self.data.find(b"\n", self.pos)
                self.pos = len(self.data) if nl < 0 else nl + 1
            elif b and b in _WHITESPACE:
                self.pos += 1
            else:
                return

    def token(self, what):
        self._skip_space_and_comments()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1] not in _WHITESPACE:
            self.pos += 1
        if self.pos == start:
            raise ParseError(f"missing {what}", offset=start)
        return self.data[start:self.pos], start

    def int_token(self, what):
        tok, off = self.token(what)
        try:
            return int(tok), off
        except ValueError:
            raise ParseError(f"invalid {what} {tok!r}", offset=off) from None


def load_pgm(path):
    """Read a binary PGM (P5) file; values are scaled to [0,1] by the maxval."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ParseError(f"bad magic {data[:2]!r}, expected b'P5'", offset=0)
    scan = _PgmScanner(data)
    scan.pos = 2
    w, off_w = scan.int_token("width")
    h, off_h = scan.int_token("height")
    if w < 1 or h < 1:
        raise ParseError(f"non-positive image size {w}x{h}", offset=off_w)
    maxval, off_m = scan.int_token("maxval")
    if maxval not in (255, 65535):
        raise ParseError(f"unsupported maxval {maxval}; only 255 and 65535", offset=off_m)
    # exactly one whitespace byte separates the header from the payload
    if scan.pos >= len(data) or data[scan.pos:scan.pos + 1] not in _WHITESPACE:
        raise ParseError("missing whitespace before payload", offset=scan.pos)
    payload_start = scan.pos + 1
    depth = 8 if maxval == 255 else 16
    dtype = np.uint8 if depth == 8 else np.dtype(">u2")
    need = h * w * dtype.itemsize if depth == 16 else h * w
    payload = data[payload_start:payload_start + need]
    if len(payload) < need:
        raise ParseError(
            f"truncated payload: need {need} bytes, found {len(payload)}",
            offset=payload_start + len(payload),
        )
    raw = np.frombuffer(payload, dtype=dtype).reshape(h, w)
    return GrayImage(raw.astype(np.float32) / maxval, depth=depth)


def save_pgm(img, path, depth=None):
    """Write a binary PGM; quantization is round(v * maxval), the exact inverse
    of load_pgm's scaling for representable values."""
    depth = img.depth if depth is None else depth
    if depth not in (8, 16):
        raise ShapeError(f"bit depth must be 8 or 16, got {depth}")
    maxval = 255 if depth == 8 else 65535
    q = np.rint(np.clip(img.pixels, 0.0, 1.0).astype(np.float64) * maxval)
    raw = q.astype(np.uint8) if depth == 8 else q.astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.w} {img.h}\n{maxval}\n".encode("ascii"))
        fh.write(raw.tobytes())
