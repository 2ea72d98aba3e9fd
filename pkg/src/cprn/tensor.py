"""NCHW tensors, the differentiable primitive ops, and tape-based reverse mode.

Every value is a 4-D float32 array (float64 only inside the high-precision
gradient checker). Ops record their backward rule on the currently active
``Tape``; without an active tape they run as plain inference.

Convolution uses the cross-correlation convention (no kernel flip).
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeError, UsageError

_SUPPORTED_DTYPES = (np.float32, np.float64)


class Tensor:
    """4-D NCHW value with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_track")

    def __init__(self, data, requires_grad=False):
        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError(f"tensors are 4-D NCHW, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ShapeError(f"all dims must be >= 1, got {data.shape}")
        if data.dtype.type not in _SUPPORTED_DTYPES:
            data = data.astype(np.float32)
        self.data = data
        self.grad = None
        self.requires_grad = requires_grad
        self._track = requires_grad  # True once a gradient must flow into this tensor

    @property
    def dims(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got dims {self.dims}")
        return float(self.data.reshape(()))

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(dims={self.dims}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad=False, dtype=np.float32):
    """Wrap an array-like as a 4-D Tensor, reshaping scalars/2-D images as needed."""
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1, 1, 1)
    elif arr.ndim == 2:
        arr = arr.reshape(1, 1, *arr.shape)
    return Tensor(arr, requires_grad=requires_grad)


@dataclass(frozen=True)
class ConvSpec:
    """Geometry of one convolution: square kernel k, stride s, zero padding p."""

    in_channels: int
    out_channels: int
    kernel: int
    stride: int = 1
    padding: int = 0
    bias: bool = True

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.padding < 0:
            raise ConfigError(f"invalid conv geometry k={self.kernel}, s={self.stride}, p={self.padding}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigError(f"channel counts must be >= 1, got {self.in_channels}->{self.out_channels}")

    def out_size(self, size):
        """Spatial output size of the forward convolution."""
        return (size + 2 * self.padding - self.kernel) // self.stride + 1

    def transpose_out_size(self, size):
        """Spatial output size of the transposed convolution."""
        return self.stride * (size - 1) + self.kernel - 2 * self.padding


_TAPE_STACK = []


class Tape:
    """Ordered record of executed ops; replayed in reverse by backward()."""

    def __init__(self):
        self._records = []

    def __enter__(self):
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPE_STACK.pop()
        return False

    def record(self, backward_fn):
        self._records.append(backward_fn)

    def __len__(self):
        return len(self._records)


def _active_tape():
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _record(out, inputs, backward_fn):
    tape = _active_tape()
    if tape is None or not any(t._track for t in inputs):
        return
    out._track = True
    tape.record(backward_fn)


def _accum(t, g):
    if not t._track:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(tape, loss):
    """Replay the tape in reverse, accumulating gradients from a scalar loss."""
    if len(tape) == 0:
        raise UsageError("backward called before any recorded forward operation")
    if loss.dims != (1, 1, 1, 1):
        raise ShapeError(f"loss must be scalar (1,1,1,1), got {loss.dims}")
    loss.grad = np.ones_like(loss.data)
    for fn in reversed(tape._records):
        fn()


# ---------------------------------------------------------------------------
# primitive ops


def conv2d(x, w, b, spec):
    """Strided 2-D convolution of an NCHW batch (cross-correlation, zero padding)."""
    k, s, p = spec.kernel, spec.stride, spec.padding
    oc, ic = spec.out_channels, spec.in_channels
    if w.dims != (oc, ic, k, k):
        raise ConfigError(f"conv2d: weight dims {w.dims} do not match spec ({oc},{ic},{k},{k})")
    if x.dims[1] != ic:
        raise ConfigError(f"conv2d: input dims {x.dims} incompatible with weight dims {w.dims}")
    n, _, h, wd = x.dims
    oh, ow = spec.out_size(h), spec.out_size(wd)
    if oh < 1 or ow < 1:
        raise ConfigError(f"conv2d: output size {oh}x{ow} < 1 for input {h}x{wd}, k={k}, s={s}, p={p}")
    if b is not None and b.dims != (1, oc, 1, 1):
        raise ConfigError(f"conv2d: bias dims {b.dims}, expected (1,{oc},1,1)")

    cols = kernels.im2col(x.data, k, s, p)
    w2 = w.data.reshape(oc, ic * k * k)
    out_data = np.matmul(w2, cols).reshape(n, oc, oh, ow)
    if b is not None:
        out_data = out_data + b.data
    out = Tensor(out_data)

    def _bw():
        gy = out.grad.reshape(n, oc, oh * ow)
        if w._track:
            gw = np.matmul(gy, cols.transpose(0, 2, 1)).sum(axis=0)
            _accum(w, gw.reshape(w.dims))
        if b is not None and b._track:
            _accum(b, out.grad.sum(axis=(0, 2, 3)).reshape(1, oc, 1, 1))
        if x._track:
            gcols = np.matmul(w2.T, gy)
            _accum(x, kernels.col2im(gcols, h, wd, k, s, p))

    _record(out, [x, w] + ([b] if b is not None else []), _bw)
    return out


def conv2d_transpose(x, w, b, spec):
    """Transposed convolution: the exact linear adjoint of conv2d with the same geometry.

    The weight keeps the conv2d layout (spec.in_channels, spec.out_channels, k, k),
    i.e. conv2d_transpose(y, w) with the weight of conv2d(x, w) maps gradients back
    from the conv output domain to its input domain.
    """
    k, s, p = spec.kernel, spec.stride, spec.padding
    ic, oc = spec.in_channels, spec.out_channels
    if w.dims != (ic, oc, k, k):
        raise ConfigError(f"conv2d_transpose: weight dims {w.dims} do not match spec ({ic},{oc},{k},{k})")
    if x.dims[1] != ic:
        raise ConfigError(f"conv2d_transpose: input dims {x.dims} incompatible with weight dims {w.dims}")
    n, _, h, wd = x.dims
    oh, ow = spec.transpose_out_size(h), spec.transpose_out_size(wd)
    if oh < 1 or ow < 1:
        raise ConfigError(
            f"conv2d_transpose: output size {oh}x{ow} < 1 for input {h}x{wd}, k={k}, s={s}, p={p}"
        )
    if b is not None and b.dims != (1, oc, 1, 1):
        raise ConfigError(f"conv2d_transpose: bias dims {b.dims}, expected (1,{oc},1,1)")

    w2 = w.data.reshape(ic, oc * k * k)
    gcols = np.matmul(w2.T, x.data.reshape(n, ic, h * wd))
    out_data = kernels.col2im(gcols, oh, ow, k, s, p)
    if b is not None:
        out_data = out_data + b.data
    out = Tensor(out_data)

    def _bw():
        cols = kernels.im2col(out.grad, k, s, p)
        if w._track:
            gw = np.matmul(x.data.reshape(n, ic, h * wd), cols.transpose(0, 2, 1)).sum(axis=0)
            _accum(w, gw.reshape(w.dims))
        if b is not None and b._track:
            _accum(b, out.grad.sum(axis=(0, 2, 3)).reshape(1, oc, 1, 1))
        if x._track:
            _accum(x, np.matmul(w2, cols).reshape(n, ic, h, wd))

    _record(out, [x, w] + ([b] if b is not None else []), _bw)
    return out


def add(a, b):
    if a.dims != b.dims:
        raise ShapeError(f"add: dims mismatch {a.dims} vs {b.dims}")
    out = Tensor(a.data + b.data)

    def _bw():
        _accum(a, out.grad)
        _accum(b, out.grad)

    _record(out, [a, b], _bw)
    return out


def sub(a, b):
    if a.dims != b.dims:
        raise ShapeError(f"sub: dims mismatch {a.dims} vs {b.dims}")
    out = Tensor(a.data - b.data)

    def _bw():
        _accum(a, out.grad)
        _accum(b, -out.grad)

    _record(out, [a, b], _bw)
    return out


def scale(a, factor):
    factor = float(factor)
    out = Tensor(a.data * factor)

    def _bw():
        _accum(a, out.grad * factor)

    _record(out, [a], _bw)
    return out


def elementwise(op, a, b):
    """Dispatch helper: op in {"add", "sub", "scale"}; scale takes a scalar b."""
    if op == "add":
        return add(a, b)
    if op == "sub":
        return sub(a, b)
    if op == "scale":
        return scale(a, b)
    raise ConfigError(f"unknown elementwise op {op!r}")


def abs_val(x):
    """Elementwise |x|; subgradient at 0 is 0."""
    out = Tensor(np.abs(x.data))

    def _bw():
        _accum(x, out.grad * np.sign(x.data))

    _record(out, [x], _bw)
    return out


def relu(x):
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, x.data.dtype.type(0)))

    def _bw():
        _accum(x, out.grad * mask)

    _record(out, [x], _bw)
    return out


def prelu(x, slope):
    """PReLU with one learnable scalar slope per layer."""
    if slope.dims != (1, 1, 1, 1):
        raise ShapeError(f"prelu slope must be scalar (1,1,1,1), got {slope.dims}")
    mask = x.data > 0
    a = slope.data.reshape(())
    out = Tensor(np.where(mask, x.data, a * x.data))

    def _bw():
        _accum(x, out.grad * np.where(mask, x.data.dtype.type(1), a))
        if slope._track:
            ga = np.sum(out.grad * np.where(mask, x.data.dtype.type(0), x.data))
            _accum(slope, ga.reshape(1, 1, 1, 1))

    _record(out, [x, slope], _bw)
    return out


def activation(x, kind, slope=None):
    if kind == "relu":
        return relu(x)
    if kind == "prelu":
        if slope is None:
            raise ConfigError("prelu activation needs a slope tensor")
        return prelu(x, slope)
    raise ConfigError(f"unknown activation {kind!r}")


def batch_norm(x, gamma, beta, eps=1e-5):
    """Per-channel batch normalization over (N, H, W) with learnable scale/shift."""
    c = x.dims[1]
    if gamma.dims != (1, c, 1, 1) or beta.dims != (1, c, 1, 1):
        raise ShapeError(f"batch_norm: gamma/beta must be (1,{c},1,1), got {gamma.dims}/{beta.dims}")
    m = x.data.shape[0] * x.data.shape[2] * x.data.shape[3]
    mu = x.data.mean(axis=(0, 2, 3), keepdims=True)
    var = x.data.var(axis=(0, 2, 3), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + x.data.dtype.type(eps))
    xhat = (x.data - mu) * inv_std
    out = Tensor(gamma.data * xhat + beta.data)

    def _bw():
        gy = out.grad
        if gamma._track:
            _accum(gamma, np.sum(gy * xhat, axis=(0, 2, 3), keepdims=True))
        if beta._track:
            _accum(beta, np.sum(gy, axis=(0, 2, 3), keepdims=True))
        if x._track:
            gxhat = gy * gamma.data
            t1 = np.sum(gxhat, axis=(0, 2, 3), keepdims=True)
            t2 = np.sum(gxhat * xhat, axis=(0, 2, 3), keepdims=True)
            _accum(x, inv_std / m * (m * gxhat - t1 - xhat * t2))

    _record(out, [x, gamma, beta], _bw)
    return out


def sum_all(x):
    """Sum of all elements as a scalar tensor."""
    out = Tensor(np.sum(x.data).reshape(1, 1, 1, 1).astype(x.data.dtype))

    def _bw():
        _accum(x, np.full_like(x.data, out.grad.reshape(())))

    _record(out, [x], _bw)
    return out


def weighted_sum(x, coeffs):
    """sum(x * coeffs) with constant coefficients; used for well-conditioned check losses."""
    coeffs = np.asarray(coeffs, dtype=x.data.dtype)
    if coeffs.shape != x.dims:
        raise ShapeError(f"weighted_sum: coeffs shape {coeffs.shape} != {x.dims}")
    out = Tensor(np.sum(x.data * coeffs).reshape(1, 1, 1, 1).astype(x.data.dtype))

    def _bw():
        _accum(x, coeffs * out.grad.reshape(()))

    _record(out, [x], _bw)
    return out


def l1_loss(pred, target):
    """Mean absolute error; the subgradient at zero difference is 0."""
    if pred.dims != target.dims:
        raise ShapeError(f"l1_loss: dims mismatch {pred.dims} vs {target.dims}")
    diff = pred.data - target.data
    out = Tensor(np.mean(np.abs(diff)).reshape(1, 1, 1, 1).astype(pred.data.dtype))

    def _bw():
        g = np.sign(diff) * (out.grad.reshape(()) / diff.size)
        g = g.astype(pred.data.dtype)
        _accum(pred, g)
        _accum(target, -g)

    _record(out, [pred, target], _bw)
    return out
