"""Command-line interface.

Subcommands: train, eval, sr, gradcheck, degrade, params.
Exit codes: 0 success, 1 check/evaluation failure, 2 usage or config error,
3 numerical abort. The output directory defaults to $CPRN_OUT_DIR or ./runs.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as runcfg
from . import gradcheck as gc
from .checkpoint import load_checkpoint
from .data import load_manifest
from .errors import CheckpointError, ConfigError, NumericalError, ParseError, ShapeError
from .image import load_pgm, save_pgm
from .metrics import bicubic_upscaler, evaluate, model_upscaler, report_csv
from .model import ModelConfig, build, count_params, param_count
from .resample import bicubic_resize
from .train import train, write_loss_csv

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("cprn")


def _build_parser():
    parser = argparse.ArgumentParser(prog="cprn", description="coupled-projection super-resolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a JSON run config")
    p.add_argument("--config", help="JSON run config path")
    p.add_argument("--override", nargs="+", default=[], metavar="KEY=VALUE",
                   help="dotted-path overrides, e.g. model.M=6 model.variant=CPRN_S")
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--out-dir", help="output directory (overrides config/$CPRN_OUT_DIR)")

    p = sub.add_parser("eval", help="evaluate a checkpoint (or the bicubic baseline)")
    p.add_argument("--checkpoint")
    p.add_argument("--manifest", required=True)
    p.add_argument("--scale", type=int, choices=(2, 4), required=True)
    p.add_argument("--baseline", choices=("bicubic",), help="evaluate a baseline instead of a checkpoint")
    p.add_argument("--eval-fraction", type=float, default=0.2)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--out-dir")

    p = sub.add_parser("sr", help="super-resolve one PGM image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    p = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--mode", choices=("32", "64", "both"), default="both")

    p = sub.add_parser("degrade", help="bicubic resize of a PGM file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--factor", type=float, required=True, choices=(0.5, 0.25, 2.0, 4.0))

    p = sub.add_parser("params", help="parameter counts per variant")
    p.add_argument("--scale", type=int, choices=(2, 4), default=2)
    p.add_argument("--N", type=int, default=6)
    p.add_argument("--sc", type=int, default=32)
    p.add_argument("--dc", type=int, default=64)
    return parser


def cmd_train(args):
    cfg = runcfg.load_run_config(args.config, args.override)
    if args.out_dir:
        cfg["out_dir"] = args.out_dir
    if not cfg["data"]["manifest"]:
        raise ConfigError("data.manifest is required for training")
    out_dir = runcfg.resolve_out_dir(cfg)
    runcfg.echo_config(cfg, out_dir)
    model_cfg = runcfg.model_config_from(cfg)
    train_cfg = runcfg.train_config_from(cfg)
    manifest = load_manifest(cfg["data"]["manifest"], scale=model_cfg.scale,
                             patch_size=cfg["data"]["patch_size"],
                             eval_fraction=cfg["data"]["eval_fraction"],
                             seed=cfg["seed"])
    model = build(model_cfg, seed=cfg["seed"])
    if args.resume:
        result = train(model, manifest, train_cfg, out_dir=out_dir, resume=args.resume)
    else:
        result = train(model, manifest, train_cfg, out_dir=out_dir)
    write_loss_csv(result.history, out_dir / "loss.csv")
    log.info("trained %d steps; final loss %.6g", result.final_step,
             result.history[-1][2] if result.history else float("nan"))
    return EXIT_OK


def cmd_eval(args):
    if args.baseline == "bicubic":
        upscaler = bicubic_upscaler(args.scale)
        meta = {"model": "bicubic-baseline", "checkpoint": "none", "seed": args.split_seed}
    else:
        if not args.checkpoint:
            raise ConfigError("either --checkpoint or --baseline bicubic is required")
        loaded = load_checkpoint(args.checkpoint)
        ckpt_scale = loaded.model.config.scale
        if ckpt_scale != args.scale:
            raise ConfigError(f"checkpoint was trained for scale {ckpt_scale}, requested {args.scale}")
        upscaler = model_upscaler(loaded.model)
        meta = {"model": loaded.model.config.variant, "checkpoint": Path(args.checkpoint).name,
                "seed": args.split_seed}
    manifest = load_manifest(args.manifest, scale=args.scale,
                             eval_fraction=args.eval_fraction, seed=args.split_seed)
    report = evaluate(upscaler, manifest, args.scale, metadata=meta)
    text = report_csv(report)
    sys.stdout.write(text)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "eval.csv").write_text(text, encoding="utf-8")
    return EXIT_CHECK_FAILED if report.has_failures else EXIT_OK


def cmd_sr(args):
    loaded = load_checkpoint(args.checkpoint)
    img = load_pgm(args.input)
    sr = model_upscaler(loaded.model)(img)
    save_pgm(sr, args.output, depth=img.depth)
    return EXIT_OK


def cmd_gradcheck(args):
    modes = {"32": [(np.float32, gc.TOL_F32)], "64": [(np.float64, gc.TOL_F64)],
             "both": [(np.float32, gc.TOL_F32), (np.float64, gc.TOL_F64)]}[args.mode]
    ok = True
    for dtype, tol in modes:
        bits = 32 if dtype is np.float32 else 64
        results = gc.run_suite(seeds=args.seeds, dtype=dtype)
        for op, err in results.items():
            passed = err < tol
            ok = ok and passed
            print(f"gradcheck[{bits}-bit] {op:<18} max_rel_err={err:.3e} tol={tol:.0e} "
                  f"{'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_degrade(args):
    img = load_pgm(args.input)
    save_pgm(bicubic_resize(img, args.factor), args.output)
    return EXIT_OK


def cmd_params(args):
    counts = {}
    for variant in ("CPRN", "CPRN_S", "Pa_CPRN", "CP_SD", "RN_SD"):
        model = build(ModelConfig(variant=variant, scale=args.scale, N=args.N,
                                  sc=args.sc, dc=args.dc), seed=0)
        total, groups = param_count(model)
        counts[variant] = (total, groups, count_params(model, "deep.res"))
        group_text = ", ".join(f"{k}={v:,}" for k, v in sorted(groups.items()))
        print(f"{variant:<8} total={total:,}  ({group_text})")
    cprn_total, _, cprn_res = counts["CPRN"]
    s_total, _, s_res = counts["CPRN_S"]
    print(f"CPRN_S/CPRN total ratio:          {s_total / cprn_total:.4f}")
    print(f"CPRN_S/CPRN residual-block ratio: {s_res / cprn_res:.4f} (= {s_res}/{cprn_res})")
    return EXIT_OK


_HANDLERS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sr": cmd_sr,
    "gradcheck": cmd_gradcheck,
    "degrade": cmd_degrade,
    "params": cmd_params,
}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (ConfigError, ParseError, ShapeError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
