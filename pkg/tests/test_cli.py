"""End-to-end CLI: exit codes, artifacts, determinism."""

import json

import numpy as np
import pytest

from cprn.checkpoint import load_checkpoint, save_checkpoint
from cprn.cli import main
from cprn.image import GrayImage, load_pgm, save_pgm
from cprn.model import ModelConfig, build

from conftest import synth_image, write_dataset

TINY = {"variant": "CPRN", "N": 1, "M": 1, "sc": 2, "dc": 4}


def write_config(tmp_path, manifest, **extra):
    cfg = {
        "model": dict(TINY),
        "train": {"lr": 1e-3, "batch_size": 4, "epochs": 2, "seed": 3, "patches_per_image": 2},
        "data": {"manifest": str(manifest), "patch_size": 8},
        "out_dir": str(tmp_path / "run"),
    }
    for key, value in extra.items():
        cfg.setdefault(key, {}).update(value) if isinstance(value, dict) else cfg.update({key: value})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestTrainCommand:
    def test_missing_manifest_is_usage_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"model": dict(TINY)}))
        assert main(["train", "--config", str(cfg)]) == 2
        assert "manifest" in capsys.readouterr().err

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"model": {"variannt": "CPRN"}}))
        assert main(["train", "--config", str(cfg)]) == 2
        assert "model.variannt" in capsys.readouterr().err

    def test_smoke_run_writes_artifacts(self, tmp_path):
        manifest = write_dataset(tmp_path / "d", n_images=2, size=16)
        cfg = write_config(tmp_path, manifest)
        assert main(["train", "--config", str(cfg)]) == 0
        out = tmp_path / "run"
        assert (out / "config.json").exists()
        assert (out / "loss.csv").exists()
        assert (out / "ckpt_final.cprn").exists()
        lines = (out / "loss.csv").read_text().strip().split("\n")
        assert lines[0] == "step,epoch,loss,learning_rate,wall_ms"
        assert len(lines) == 3  # 2 epochs x 1 step

    def test_override_builds_stepwise_variant(self, tmp_path):
        manifest = write_dataset(tmp_path / "d", n_images=2, size=16)
        cfg = write_config(tmp_path, manifest)
        code = main(["train", "--config", str(cfg),
                     "--override", "model.M=1", "model.variant=CPRN_S"])
        assert code == 0
        loaded = load_checkpoint(tmp_path / "run" / "ckpt_final.cprn")
        assert loaded.model.config.variant == "CPRN_S"
        assert any(n.startswith("stepwise.") for n in loaded.model.params)

    def test_echoed_config_reproduces_run(self, tmp_path):
        manifest = write_dataset(tmp_path / "d", n_images=2, size=16)
        cfg = write_config(tmp_path, manifest)
        assert main(["train", "--config", str(cfg)]) == 0
        first_losses = (tmp_path / "run" / "loss.csv").read_text()
        echo = tmp_path / "run" / "config.json"
        assert main(["train", "--config", str(echo), "--out-dir", str(tmp_path / "run2")]) == 0
        second = (tmp_path / "run2" / "loss.csv").read_text()
        # identical losses; wall-clock column may differ
        strip = lambda text: [",".join(l.split(",")[:4]) for l in text.strip().split("\n")]
        assert strip(first_losses) == strip(second)

    def test_numerical_abort_exit_code(self, tmp_path):
        manifest = write_dataset(tmp_path / "d", n_images=2, size=16)
        cfg = write_config(tmp_path, manifest)
        assert main(["train", "--config", str(cfg), "--override", "train.max_steps=1",
                     "--out-dir", str(tmp_path / "seedrun")]) == 0
        # poison the trained checkpoint so the resumed forward overflows
        loaded = load_checkpoint(tmp_path / "seedrun" / "ckpt_final.cprn")
        loaded.model.params["head.conv1.weight"].data[:] = np.float32(1e38)
        bad = tmp_path / "bad.cprn"
        save_checkpoint(bad, loaded.model, loaded.optimizer, loaded.trainer_state)
        code = main(["train", "--config", str(cfg), "--resume", str(bad),
                     "--out-dir", str(tmp_path / "run3")])
        assert code == 3


class TestEvalCommand:
    def test_bicubic_baseline_without_checkpoint(self, tmp_path, capsys):
        manifest = write_dataset(tmp_path / "d", n_images=5, size=32)
        code = main(["eval", "--manifest", str(manifest), "--scale", "2",
                     "--baseline", "bicubic", "--eval-fraction", "0.4"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("image,scale,psnr_db,ssim")
        assert "#mean," in out

    def test_eval_twice_is_byte_identical(self, tmp_path, capsys):
        manifest = write_dataset(tmp_path / "d", n_images=5, size=32)
        args = ["eval", "--manifest", str(manifest), "--scale", "2",
                "--baseline", "bicubic", "--eval-fraction", "0.4"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first

    def test_scale_mismatch_is_usage_error(self, tmp_path, capsys):
        manifest = write_dataset(tmp_path / "d", n_images=3, size=32)
        ckpt = tmp_path / "m.cprn"
        save_checkpoint(ckpt, build(ModelConfig(scale=2, **{k: v for k, v in TINY.items() if k != 'variant'}), seed=0))
        code = main(["eval", "--checkpoint", str(ckpt), "--manifest", str(manifest),
                     "--scale", "4", "--eval-fraction", "0.4"])
        assert code == 2
        err = capsys.readouterr().err
        assert "2" in err and "4" in err

    def test_checkpoint_eval_writes_csv(self, tmp_path, capsys):
        manifest = write_dataset(tmp_path / "d", n_images=5, size=32)
        ckpt = tmp_path / "m.cprn"
        save_checkpoint(ckpt, build(ModelConfig(**TINY), seed=0))
        out_dir = tmp_path / "eval"
        code = main(["eval", "--checkpoint", str(ckpt), "--manifest", str(manifest),
                     "--scale", "2", "--eval-fraction", "0.4", "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "eval.csv").read_text() == capsys.readouterr().out


class TestSrCommand:
    def test_upscales_pgm(self, tmp_path):
        ckpt = tmp_path / "m.cprn"
        save_checkpoint(ckpt, build(ModelConfig(**TINY), seed=0))
        src = tmp_path / "in.pgm"
        save_pgm(GrayImage(synth_image(0, 24)), src)
        dst = tmp_path / "out.pgm"
        assert main(["sr", "--checkpoint", str(ckpt), "--input", str(src),
                     "--output", str(dst)]) == 0
        out = load_pgm(dst)
        assert (out.h, out.w) == (48, 48)

    def test_zero_parameter_checkpoint_maps_constant_to_zero(self, tmp_path):
        model = build(ModelConfig(**TINY), seed=0)
        for t in model.params.values():
            t.data = np.zeros_like(t.data)
        ckpt = tmp_path / "zero.cprn"
        save_checkpoint(ckpt, model)
        src = tmp_path / "in.pgm"
        save_pgm(GrayImage(np.full((12, 12), 0.5, np.float32)), src)
        dst = tmp_path / "out.pgm"
        assert main(["sr", "--checkpoint", str(ckpt), "--input", str(src),
                     "--output", str(dst)]) == 0
        out = load_pgm(dst)
        np.testing.assert_array_equal(out.pixels, np.zeros((24, 24), np.float32))

    def test_malformed_pgm_is_usage_error(self, tmp_path, capsys):
        ckpt = tmp_path / "m.cprn"
        save_checkpoint(ckpt, build(ModelConfig(**TINY), seed=0))
        bad = tmp_path / "bad.pgm"
        bad.write_bytes(b"P5\n4 4\n255\n\x00")
        assert main(["sr", "--checkpoint", str(ckpt), "--input", str(bad),
                     "--output", str(tmp_path / "o.pgm")]) == 2
        assert "offset" in capsys.readouterr().err


class TestOtherCommands:
    def test_gradcheck_fast(self, capsys):
        assert main(["gradcheck", "--seeds", "1", "--mode", "32"]) == 0
        out = capsys.readouterr().out
        assert "conv2d" in out and "PASS" in out

    def test_degrade_halves_dims(self, tmp_path):
        src = tmp_path / "in.pgm"
        save_pgm(GrayImage(synth_image(1, 48)), src)
        dst = tmp_path / "out.pgm"
        assert main(["degrade", "--input", str(src), "--output", str(dst),
                     "--factor", "0.5"]) == 0
        out = load_pgm(dst)
        assert (out.h, out.w) == (24, 24)

    def test_params_reports_ratio(self, capsys):
        assert main(["params", "--N", "6", "--sc", "4", "--dc", "8"]) == 0
        out = capsys.readouterr().out
        assert "CPRN_S/CPRN residual-block ratio: 0.3750" in out
        assert "total ratio" in out
