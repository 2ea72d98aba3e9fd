"""Finite-difference gradient checking.

The analytic side runs at the requested compute dtype (float32 by default, the
training dtype; float64 in high-precision mode). The central-difference oracle
always evaluates the op in float64 so the reference itself is not the noise
floor. Tolerances: 1e-3 for the float32 mode, 1e-6 for the float64 mode.
"""

from dataclasses import dataclass, field

import numpy as np

from . import blocks
from .errors import NumericalError
from .tensor import ConvSpec, Tape, Tensor, add, backward
from .tensor import conv2d, conv2d_transpose, l1_loss, prelu, relu, weighted_sum

TOL_F32 = 1e-3
TOL_F64 = 1e-6


@dataclass
class CheckResult:
    """Per-parameter max relative errors of one gradcheck run."""

    name: str
    errors: dict = field(default_factory=dict)  # param -> (max_rel_err, flat index)

    @property
    def max_error(self):
        return max((e for e, _ in self.errors.values()), default=0.0)

    def passed(self, tol):
        return self.max_error < tol


def _rel_err(a, n):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)


def gradcheck(forward_fn, params, *, eps=1e-5, dtype=np.float32, name="op"):
    """Compare tape gradients of a scalar loss against central finite differences.

    forward_fn() must rebuild the loss from the live ``params`` tensors on every
    call; params maps name -> Tensor (inputs under test included). Tensor data
    is temporarily re-cast and mutated, then restored.

    Each coordinate is differenced at eps and 10*eps and scored by the closer
    estimate: the small step avoids activation-kink crossings, the large one
    beats the roundoff floor on tiny-magnitude coordinates. A wrong backward
    rule disagrees with both.

    Raises NumericalError naming the offending coordinate if anything non-finite
    shows up.
    """
    if eps <= 0:
        raise ValueError("epsilon must be > 0")
    saved = {k: t.data for k, t in params.items()}
    saved_req = {k: t.requires_grad for k, t in params.items()}
    result = CheckResult(name=name)
    try:
        # analytic pass at the compute dtype
        for t in params.values():
            t.data = t.data.astype(dtype)
            t.requires_grad = True
            t._track = True
            t.zero_grad()
        with Tape() as tape:
            loss = forward_fn()
        backward(tape, loss)
        analytic = {}
        for key, t in params.items():
            g = np.asarray(t.grad, dtype=np.float64)
            if not np.all(np.isfinite(g)):
                bad = int(np.flatnonzero(~np.isfinite(g))[0])
                raise NumericalError(f"{name}: non-finite analytic gradient at {key}[{bad}]")
            analytic[key] = g

        # float64 finite-difference oracle
        for key, t in params.items():
            t.data = np.asarray(saved[key], dtype=np.float64)
        for key, t in params.items():
            flat = t.data.reshape(-1)
            err = np.empty(flat.size, dtype=np.float64)
            for i in range(flat.size):
                orig = flat[i]
                a_i = analytic[key].reshape(-1)[i]
                best = np.inf
                for step in (eps, 10 * eps):
                    flat[i] = orig + step
                    hi = forward_fn().item()
                    flat[i] = orig - step
                    lo = forward_fn().item()
                    flat[i] = orig
                    if not (np.isfinite(hi) and np.isfinite(lo)):
                        raise NumericalError(f"{name}: non-finite loss while perturbing {key}[{i}]")
                    best = min(best, _rel_err(a_i, (hi - lo) / (2 * step)))
                err[i] = best
            worst = int(np.argmax(err))
            result.errors[key] = (float(err[worst]), worst)
    finally:
        for key, t in params.items():
            t.data = saved[key]
            t.requires_grad = saved_req[key]
            t._track = saved_req[key]
            t.grad = None
    return result


# ---------------------------------------------------------------------------
# standard check suite over the ops the network is built from


def _check_conv2d(seed, dtype):
    rng = np.random.default_rng((1, seed))
    spec = ConvSpec(2, 3, 3, 1, 1)
    x = tensor_from(rng, (1, 2, 5, 5))
    w = tensor_from(rng, (3, 2, 3, 3))
    b = tensor_from(rng, (1, 3, 1, 1))
    coeffs = rng.standard_normal((1, 3, 5, 5))
    return gradcheck(lambda: weighted_sum(conv2d(x, w, b, spec), coeffs),
                     {"x": x, "w": w, "b": b}, dtype=dtype, name="conv2d")


def _check_conv2d_transpose(seed, dtype):
    rng = np.random.default_rng((2, seed))
    spec = ConvSpec(2, 3, 6, 2, 2)
    x = tensor_from(rng, (1, 2, 4, 4))
    w = tensor_from(rng, (2, 3, 6, 6))
    b = tensor_from(rng, (1, 3, 1, 1))
    coeffs = rng.standard_normal((1, 3, 8, 8))
    return gradcheck(lambda: weighted_sum(conv2d_transpose(x, w, b, spec), coeffs),
                     {"x": x, "w": w, "b": b}, dtype=dtype, name="conv2d_transpose")


def _check_activation(seed, dtype):
    rng = np.random.default_rng((3, seed))
    x = tensor_from(rng, (1, 2, 4, 4))
    slope = Tensor(np.full((1, 1, 1, 1), 0.25, dtype=np.float32))
    c1 = rng.standard_normal((1, 2, 4, 4))
    c2 = rng.standard_normal((1, 2, 4, 4))

    def loss():
        return add(weighted_sum(relu(x), c1), weighted_sum(prelu(x, slope), c2))

    return gradcheck(loss, {"x": x, "slope": slope}, dtype=dtype, name="activation")


def _check_l1_loss(seed, dtype):
    rng = np.random.default_rng((4, seed))
    pred = tensor_from(rng, (1, 1, 4, 4))
    target = tensor_from(rng, (1, 1, 4, 4))
    return gradcheck(lambda: l1_loss(pred, target),
                     {"pred": pred, "target": target}, dtype=dtype, name="l1_loss")


def _block_params(block, extra):
    params = dict(extra)
    params.update(block.params())
    return params


def _check_residual_block(seed, dtype):
    rng = np.random.default_rng((5, seed))
    block = blocks.ResidualBlock("res", 3, bn=False, seed=seed)
    x = tensor_from(rng, (1, 3, 5, 5))
    coeffs = rng.standard_normal((1, 3, 5, 5))
    return gradcheck(lambda: weighted_sum(block(x), coeffs),
                     _block_params(block, {"x": x}), dtype=dtype, name="residual_block")


def _check_up_projection(seed, dtype):
    rng = np.random.default_rng((16, seed))
    proj = blocks.ProjectionSpec(channels=2, kernel=6, stride=2, padding=2)
    block = blocks.UpProjection("up", proj, seed=seed)
    x = tensor_from(rng, (1, 2, 4, 4))
    coeffs = rng.standard_normal((1, 2, 8, 8))
    return gradcheck(lambda: weighted_sum(block(x), coeffs),
                     _block_params(block, {"x": x}), dtype=dtype, name="up_projection")


def _check_down_projection(seed, dtype):
    rng = np.random.default_rng((7, seed))
    proj = blocks.ProjectionSpec(channels=2, kernel=6, stride=2, padding=2)
    block = blocks.DownProjection("down", proj, seed=seed)
    x = tensor_from(rng, (1, 2, 8, 8))
    coeffs = rng.standard_normal((1, 2, 4, 4))
    return gradcheck(lambda: weighted_sum(block(x), coeffs),
                     _block_params(block, {"x": x}), dtype=dtype, name="down_projection")


def tensor_from(rng, dims):
    return Tensor(rng.standard_normal(dims).astype(np.float32))


SUITE = {
    "conv2d": _check_conv2d,
    "conv2d_transpose": _check_conv2d_transpose,
    "activation": _check_activation,
    "residual_block": _check_residual_block,
    "up_projection": _check_up_projection,
    "down_projection": _check_down_projection,
    "l1_loss": _check_l1_loss,
}


def run_suite(seeds=20, dtype=np.float32):
    """Run every op check over `seeds` seeded instances; returns {op: max_rel_err}."""
    out = {}
    for op, fn in SUITE.items():
        worst = 0.0
        for seed in range(seeds):
            worst = max(worst, fn(seed, dtype).max_error)
        out[op] = worst
    return out
