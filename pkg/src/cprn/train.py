"""L1 + Adam training loop with deterministic, resumable batching.

Weight decay is decoupled (applied to the weights before the Adam term) and
skipped for biases, PReLU slopes and BN parameters. Given (seed, config, data)
the whole loss history is bit-exact, including across checkpoint/resume.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import LoadedCheckpoint, OptimizerState, load_checkpoint, save_checkpoint
from .data import sample_patches
from .errors import ConfigError, NumericalError
from .image import load_pgm
from .resample import resize_array
from .tensor import Tape, Tensor, backward, l1_loss

log = logging.getLogger(__name__)

_NO_DECAY_SUFFIXES = (".bias", ".slope", ".gamma", ".beta")


@dataclass
class TrainConfig:
    lr: float = 1e-4
    batch_size: int = 16
    epochs: int = 300
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    seed: int = 0
    checkpoint_interval: int = 0  # steps; 0 = only the final checkpoint
    max_steps: int = None
    patches_per_image: int = 4

    def validate(self):
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be > 0, got {self.lr}")
        for label, b in (("beta1", self.beta1), ("beta2", self.beta2)):
            if not 0.0 <= b < 1.0:
                raise ConfigError(f"{label} must be in [0,1), got {b}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1 or self.epochs < 1 or self.patches_per_image < 1:
            raise ConfigError("batch_size, epochs and patches_per_image must be >= 1")
        return self


def adam_step(params, opt, cfg):
    """One bias-corrected Adam step over all parameters; aborts untouched on
    any non-finite gradient, naming the parameter."""
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {name}; step aborted")
    opt.step += 1
    t = opt.step
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if cfg.weight_decay > 0 and not name.endswith(_NO_DECAY_SUFFIXES):
            p.data -= cfg.lr * cfg.weight_decay * p.data
        m = opt.m[name]
        v = opt.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        p.data -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)


@dataclass
class TrainResult:
    history: list  # rows of (step, epoch, loss, lr, wall_ms)
    model: object
    optimizer: OptimizerState
    final_step: int = 0


@dataclass
class _EpochPlan:
    batches: list
    rng_state_at_start: dict


def _load_training_images(manifest):
    images = []
    for path in manifest.train_paths:
        img = load_pgm(path)
        h = img.h - img.h % manifest.scale
        w = img.w - img.w % manifest.scale
        hr = img.pixels[:h, :w]
        images.append((hr, resize_array(hr, 1.0 / manifest.scale)))
    return images


def _plan_epoch(images, manifest, cfg, rng, warned):
    state = rng.bit_generator.state
    pool = []
    for hr, lr in images:
        pool.extend(sample_patches(hr, manifest.scale, manifest.patch_size,
                                   cfg.patches_per_image, rng, lr=lr))
    if not pool:
        raise ConfigError("no usable training patches (all images smaller than the patch size?)")
    if len(pool) < cfg.batch_size and not warned[0]:
        log.warning("only %d patches available for batch size %d; using smaller batches",
                    len(pool), cfg.batch_size)
        warned[0] = True
    order = rng.permutation(len(pool))
    batches = [[pool[i] for i in order[o:o + cfg.batch_size]]
               for o in range(0, len(order), cfg.batch_size)]
    return _EpochPlan(batches=batches, rng_state_at_start=state)


def _batch_tensors(batch):
    lr = np.stack([p[0] for p in batch])[:, None, :, :]
    hr = np.stack([p[1] for p in batch])[:, None, :, :]
    return Tensor(lr), Tensor(hr)


def train(model, manifest, cfg, out_dir=None, resume=None):
    """Run the training loop; returns the loss history and final state.

    ``resume`` may be a checkpoint path or a LoadedCheckpoint; the resumed run
    is bit-identical to the uninterrupted one. When ``out_dir`` is given,
    checkpoints and loss.csv land there.
    """
    cfg.validate()
    if not manifest.train_paths:
        raise ConfigError("manifest has no training images")
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(cfg.seed)
    start_epoch, start_cursor = 0, 0
    if resume is not None:
        if not isinstance(resume, LoadedCheckpoint):
            resume = load_checkpoint(resume)
        model = resume.model
        if resume.optimizer is None or resume.trainer_state is None:
            raise ConfigError("checkpoint has no trainer state; cannot resume from it")
        opt = resume.optimizer
        ts = resume.trainer_state
        if not ts.get("rng"):
            raise ConfigError("checkpoint trainer state has no RNG snapshot; cannot resume")
        start_epoch, start_cursor = ts["epoch"], ts["cursor"]
        rng.bit_generator.state = _decode_rng(ts["rng"])
    else:
        opt = OptimizerState.fresh(model.params)

    images = _load_training_images(manifest)
    history = []
    warned = [False]

    def checkpoint(tag, epoch, cursor, plan):
        if out_path is None:
            return
        trainer_state = {"epoch": epoch, "cursor": cursor, "rng": _encode_rng(plan.rng_state_at_start)}
        save_checkpoint(out_path / f"ckpt_{tag}.cprn", model, opt, trainer_state)

    try:
        for epoch in range(start_epoch, cfg.epochs):
            plan = _plan_epoch(images, manifest, cfg, rng, warned)
            cursor = start_cursor if epoch == start_epoch else 0
            for bi in range(cursor, len(plan.batches)):
                t0 = time.perf_counter()
                x, y = _batch_tensors(plan.batches[bi])
                model.zero_grads()
                with Tape() as tape:
                    loss = l1_loss(model(x), y)
                loss_val = loss.item()
                if not np.isfinite(loss_val):
                    raise NumericalError(
                        f"loss became non-finite at step {opt.step + 1}; last checkpoint retained"
                    )
                backward(tape, loss)
                adam_step(model.params, opt, cfg)
                wall_ms = (time.perf_counter() - t0) * 1000.0
                history.append((opt.step, epoch, loss_val, cfg.lr, wall_ms))
                if cfg.checkpoint_interval > 0 and opt.step % cfg.checkpoint_interval == 0:
                    checkpoint(f"{opt.step:06d}", epoch, bi + 1, plan)
                if cfg.max_steps is not None and opt.step >= cfg.max_steps:
                    checkpoint("final", epoch, bi + 1, plan)
                    return TrainResult(history, model, opt, final_step=opt.step)
            start_cursor = 0
        checkpoint("final", cfg.epochs, 0, _EpochPlan([], rng.bit_generator.state))
        return TrainResult(history, model, opt, final_step=opt.step)
    finally:
        if out_path is not None and history:
            write_loss_csv(history, out_path / "loss.csv")


def _encode_rng(state):
    """JSON-safe copy of a bit generator state (PCG64 uses 128-bit ints)."""
    return _map_ints(state, str)


def _decode_rng(state):
    return _map_ints(state, int)


def _map_ints(obj, conv):
    if isinstance(obj, dict):
        return {k: _map_ints(v, conv) for k, v in obj.items()}
    if isinstance(obj, (int, str)) and not isinstance(obj, bool):
        try:
            return conv(obj)
        except (TypeError, ValueError):
            return obj
    return obj


def write_loss_csv(history, path):
    """Emit the loss history as CSV: step, epoch, loss, learning_rate, wall_ms."""
    lines = ["step,epoch,loss,learning_rate,wall_ms"]
    for step, epoch, loss, lr, wall in history:
        lines.append(f"{step},{epoch},{loss:.8g},{lr:g},{wall:.3f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
