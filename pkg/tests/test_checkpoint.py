"""Checkpoint format: bit-exact round trips and malformed-file rejection."""

import struct

import numpy as np
import pytest

from cprn.checkpoint import OptimizerState, load_checkpoint, save_checkpoint
from cprn.errors import CheckpointError
from cprn.model import ModelConfig, build
from cprn.tensor import Tensor

CFG = ModelConfig(variant="CPRN_S", N=2, M=2, sc=4, dc=8)


def make_model(seed=3):
    model = build(CFG, seed=seed)
    rng = np.random.default_rng(99)
    for t in model.params.values():
        t.data = rng.standard_normal(t.dims).astype(np.float32)
    return model


def make_optimizer(model):
    opt = OptimizerState.fresh(model.params)
    rng = np.random.default_rng(7)
    for k in opt.m:
        opt.m[k] = rng.standard_normal(opt.m[k].shape).astype(np.float32)
        opt.v[k] = np.abs(rng.standard_normal(opt.v[k].shape)).astype(np.float32)
    opt.step = 42
    return opt


class TestRoundTrip:
    def test_params_bit_equal(self, tmp_path):
        model = make_model()
        path = tmp_path / "m.cprn"
        save_checkpoint(path, model)
        loaded = load_checkpoint(path)
        assert loaded.model.config == model.config
        for name, t in model.params.items():
            np.testing.assert_array_equal(loaded.model.params[name].data, t.data)

    def test_optimizer_and_trainer_state(self, tmp_path):
        model = make_model()
        opt = make_optimizer(model)
        trainer = {"epoch": 3, "cursor": 1, "rng": {"state": "12345678901234567890"}}
        path = tmp_path / "m.cprn"
        save_checkpoint(path, model, opt, trainer)
        loaded = load_checkpoint(path)
        assert loaded.optimizer.step == 42
        for k in opt.m:
            np.testing.assert_array_equal(loaded.optimizer.m[k], opt.m[k])
            np.testing.assert_array_equal(loaded.optimizer.v[k], opt.v[k])
        assert loaded.trainer_state == trainer

    def test_save_load_save_byte_identical(self, tmp_path):
        model = make_model()
        opt = make_optimizer(model)
        p1, p2 = tmp_path / "a.cprn", tmp_path / "b.cprn"
        save_checkpoint(p1, model, opt, {"epoch": 0, "cursor": 0, "rng": None})
        loaded = load_checkpoint(p1)
        save_checkpoint(p2, loaded.model, loaded.optimizer, loaded.trainer_state)
        assert p1.read_bytes() == p2.read_bytes()


class TestRejection:
    def _save(self, tmp_path):
        path = tmp_path / "m.cprn"
        save_checkpoint(path, make_model())
        return path

    def test_corrupted_magic(self, tmp_path):
        path = self._save(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="magic|checksum"):
            load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        path = self._save(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 99)
        body = bytes(raw[:-4])
        import zlib
        path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncated_file(self, tmp_path):
        path = self._save(tmp_path)
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) // 2])
        with pytest.raises(CheckpointError, match="checksum|truncated"):
            load_checkpoint(path)

    def test_flipped_payload_byte_fails_crc(self, tmp_path):
        path = self._save(tmp_path)
        raw = bytearray(path.read_bytes())
        raw[len(raw) // 2] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path)

    def test_unknown_parameter_name(self, tmp_path):
        model = make_model()
        model.params["bogus.weight"] = Tensor(np.zeros((1, 1, 1, 1), np.float32))
        path = tmp_path / "m.cprn"
        save_checkpoint(path, model)
        with pytest.raises(CheckpointError, match="unknown parameter name bogus.weight"):
            load_checkpoint(path)

    def test_missing_parameter(self, tmp_path):
        model = make_model()
        del model.params["recon.deep.bias"]
        path = tmp_path / "m.cprn"
        save_checkpoint(path, model)
        with pytest.raises(CheckpointError, match="missing"):
            load_checkpoint(path)
