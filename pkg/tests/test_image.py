"""PGM parsing/writing and the GrayImage invariants."""

import numpy as np
import pytest

from cprn.errors import ParseError, ShapeError
from cprn.image import GrayImage, load_pgm, save_pgm


def write(tmp_path, blob, name="img.pgm"):
    path = tmp_path / name
    path.write_bytes(blob)
    return path


class TestLoad:
    def test_scales_by_maxval(self, tmp_path):
        path = write(tmp_path, b"P5\n2 2\n255\n" + bytes([0, 128, 255, 64]))
        img = load_pgm(path)
        assert img.depth == 8
        np.testing.assert_allclose(img.pixels.ravel(),
                                   [0.0, 128 / 255, 1.0, 64 / 255], rtol=1e-6)

    def test_16_bit_big_endian(self, tmp_path):
        payload = (0).to_bytes(2, "big") + (65535).to_bytes(2, "big") \
            + (256).to_bytes(2, "big") + (1).to_bytes(2, "big")
        img = load_pgm(write(tmp_path, b"P5\n2 2\n65535\n" + payload))
        assert img.depth == 16
        np.testing.assert_allclose(img.pixels.ravel(),
                                   [0.0, 1.0, 256 / 65535, 1 / 65535], rtol=1e-6)

    def test_header_comments_ignored(self, tmp_path):
        blob = b"P5\n# a comment\n2 1 # trailing\n255\n" + bytes([7, 9])
        img = load_pgm(write(tmp_path, blob))
        assert (img.h, img.w) == (1, 2)

    def test_bad_magic(self, tmp_path):
        with pytest.raises(ParseError, match="magic"):
            load_pgm(write(tmp_path, b"P6\n1 1\n255\n\x00"))

    def test_unsupported_maxval(self, tmp_path):
        with pytest.raises(ParseError, match="maxval 100"):
            load_pgm(write(tmp_path, b"P5\n1 1\n100\n\x00"))

    def test_truncated_payload_reports_offset(self, tmp_path):
        with pytest.raises(ParseError, match="offset"):
            load_pgm(write(tmp_path, b"P5\n2 2\n255\n" + bytes([1, 2])))


class TestRoundTrip:
    @pytest.mark.parametrize("depth", [8, 16])
    def test_save_load_save_byte_identical(self, tmp_path, depth):
        rng = np.random.default_rng(depth)
        img = GrayImage(rng.random((5, 7)).astype(np.float32), depth=depth)
        p1, p2 = tmp_path / "a.pgm", tmp_path / "b.pgm"
        save_pgm(img, p1)
        save_pgm(load_pgm(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_quantization_inverts_loading(self, tmp_path):
        # every representable 8-bit value survives a load/save cycle
        values = np.arange(256, dtype=np.uint8).reshape(16, 16)
        path = write(tmp_path, b"P5\n16 16\n255\n" + values.tobytes())
        out = tmp_path / "out.pgm"
        save_pgm(load_pgm(path), out)
        assert out.read_bytes()[-256:] == values.tobytes()


class TestGrayImage:
    def test_rejects_out_of_range(self):
        with pytest.raises(ShapeError):
            GrayImage(np.array([[1.5]], np.float32))

    def test_rejects_bad_depth(self):
        with pytest.raises(ShapeError):
            GrayImage(np.zeros((2, 2), np.float32), depth=12)

    def test_rejects_non_2d(self):
        with pytest.raises(ShapeError):
            GrayImage(np.zeros((2, 2, 2), np.float32))
