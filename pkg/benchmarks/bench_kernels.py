#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the raw im2col/col2im kernels on the network's hot shapes, then a full
training step (forward + backward + Adam) with each backend swapped in.

Usage: python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from cprn import kernels
from cprn.kernels import numpy_backend

try:
    from cprn.kernels import _convkernels
except ImportError:
    _convkernels = None

# (label, batch, channels, h, w, k, s, p) — the projection and residual geometries
SHAPES = [
    ("proj x2 down 48->24", 1, 32, 48, 48, 6, 2, 2),
    ("proj x4 down 48->12", 1, 32, 48, 48, 8, 4, 2),
    ("residual 3x3 b16", 16, 64, 24, 24, 3, 1, 1),
    ("residual 3x3 b1", 1, 16, 24, 24, 3, 1, 1),
]


def timeit(fn, repeats):
    fn()  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats):
    print(f"{'shape':<22} {'kernel':<8} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, n, c, h, w, k, s, p in SHAPES:
        x = np.random.default_rng(0).standard_normal((n, c, h, w)).astype(np.float32)
        oh = (h + 2 * p - k) // s + 1
        ow = (w + 2 * p - k) // s + 1
        cols = np.random.default_rng(1).standard_normal((n, c * k * k, oh * ow)).astype(np.float32)
        rows = [("im2col", lambda b: b.im2col(x, k, s, p)),
                ("col2im", lambda b: b.col2im(cols, h, w, k, s, p))]
        for name, call in rows:
            t_np = timeit(lambda: call(numpy_backend), repeats)
            if _convkernels is not None:
                t_c = timeit(lambda: call(_convkernels), repeats)
                print(f"{label:<22} {name:<8} {t_np * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms {t_np / t_c:>7.2f}x")
            else:
                print(f"{label:<22} {name:<8} {t_np * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")


def bench_training_step(repeats):
    from cprn.checkpoint import OptimizerState
    from cprn.model import ModelConfig, build
    from cprn.tensor import Tape, Tensor, backward, l1_loss
    from cprn.train import TrainConfig, adam_step

    rng = np.random.default_rng(0)
    x = Tensor(rng.random((1, 1, 24, 24)).astype(np.float32))
    y = Tensor(rng.random((1, 1, 48, 48)).astype(np.float32))

    def step_with(backend):
        saved = (kernels.im2col, kernels.col2im)
        kernels.im2col, kernels.col2im = backend.im2col, backend.col2im
        try:
            model = build(ModelConfig(variant="CPRN", scale=2, N=2, M=4, sc=8, dc=16), seed=0)
            opt = OptimizerState.fresh(model.params)
            cfg = TrainConfig(lr=1e-3)

            def one_step():
                model.zero_grads()
                with Tape() as tape:
                    loss = l1_loss(model(x), y)
                backward(tape, loss)
                adam_step(model.params, opt, cfg)

            return timeit(one_step, repeats)
        finally:
            kernels.im2col, kernels.col2im = saved

    t_np = step_with(numpy_backend)
    print(f"\nfull training step (CPRN N=2 M=4 sc=8 dc=16, 24->48):")
    print(f"  numpy    {t_np * 1e3:8.2f} ms")
    if _convkernels is not None:
        t_c = step_with(_convkernels)
        print(f"  compiled {t_c * 1e3:8.2f} ms   ({t_np / t_c:.2f}x)")
    else:
        print("  compiled   not built")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    print(f"selected backend at import: {kernels.BACKEND}\n")
    bench_kernels(args.repeats)
    bench_training_step(args.repeats)


if __name__ == "__main__":
    main()
