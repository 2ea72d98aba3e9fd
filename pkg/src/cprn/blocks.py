"""Composite building blocks: conv/deconv layers with Gaussian init, BN-free
residual blocks (BN available as an ablation switch), the error-feedback
up/down projection blocks, and the coupled-projection chain.

Blocks are pure functions of (input, parameters); parameters are plain Tensors
owned by the block and reachable through params().
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import ConvSpec, Tensor
from .tensor import abs_val, add, batch_norm, conv2d, conv2d_transpose, prelu, relu, sub

PRELU_INIT = 0.25


def _param_rng(seed, name):
    """Independent RNG per parameter, keyed by (seed, name) so that shared
    sub-networks draw identical values regardless of construction order."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence((seed, int.from_bytes(digest[:8], "little"))))


def gaussian_weight(name, shape, fan_in, seed):
    """Gaussian init with std sqrt(2 / fan_in); biases start at zero elsewhere."""
    rng = _param_rng(seed, name)
    std = np.sqrt(2.0 / fan_in)
    return Tensor((rng.standard_normal(shape) * std).astype(np.float32), requires_grad=True)


def _zeros_param(shape):
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)


def _const_param(shape, value):
    return Tensor(np.full(shape, value, dtype=np.float32), requires_grad=True)


@dataclass
class LayerParams:
    """Named parameter set of one conv/deconv layer."""

    name: str
    weight: Tensor
    bias: Tensor = None
    prelu_slope: Tensor = None

    def tensors(self):
        yield f"{self.name}.weight", self.weight
        if self.bias is not None:
            yield f"{self.name}.bias", self.bias
        if self.prelu_slope is not None:
            yield f"{self.name}.slope", self.prelu_slope


class BatchNormLayer:
    """Per-channel batch normalization (ablation switch; off in the default nets)."""

    def __init__(self, name, channels):
        self.name = name
        self.gamma = _const_param((1, channels, 1, 1), 1.0)
        self.beta = _zeros_param((1, channels, 1, 1))

    def __call__(self, x):
        return batch_norm(x, self.gamma, self.beta)

    def params(self):
        return {f"{self.name}.gamma": self.gamma, f"{self.name}.beta": self.beta}


class _ConvBase:
    """Shared plumbing of conv and deconv layers: params, optional BN, activation."""

    def __init__(self, name, spec, activation, bn, seed, weight_shape, fan_in, out_channels):
        self.name = name
        self.spec = spec
        self.activation = activation
        weight = gaussian_weight(f"{name}.weight", weight_shape, fan_in, seed)
        bias = _zeros_param((1, out_channels, 1, 1)) if spec.bias else None
        slope = _const_param((1, 1, 1, 1), PRELU_INIT) if activation == "prelu" else None
        self.layer = LayerParams(name, weight, bias, slope)
        self.bn = BatchNormLayer(f"{name}.bn", out_channels) if bn else None

    def _finish(self, y):
        if self.bn is not None:
            y = self.bn(y)
        if self.activation == "prelu":
            y = prelu(y, self.layer.prelu_slope)
        elif self.activation == "relu":
            y = relu(y)
        return y

    def params(self):
        out = dict(self.layer.tensors())
        if self.bn is not None:
            out.update(self.bn.params())
        return out


class ConvLayer(_ConvBase):
    def __init__(self, name, in_c, out_c, k, s, p, *, bias=True, activation=None, bn=False, seed=0):
        spec = ConvSpec(in_c, out_c, k, s, p, bias)
        super().__init__(name, spec, activation, bn, seed,
                         weight_shape=(out_c, in_c, k, k), fan_in=in_c * k * k, out_channels=out_c)

    def __call__(self, x):
        return self._finish(conv2d(x, self.layer.weight, self.layer.bias, self.spec))


class DeconvLayer(_ConvBase):
    """Transposed convolution layer; weight keeps the (in, out, k, k) adjoint layout."""

    def __init__(self, name, in_c, out_c, k, s, p, *, bias=True, activation=None, bn=False, seed=0):
        spec = ConvSpec(in_c, out_c, k, s, p, bias)
        super().__init__(name, spec, activation, bn, seed,
                         weight_shape=(in_c, out_c, k, k), fan_in=in_c * k * k, out_channels=out_c)

    def __call__(self, x):
        return self._finish(conv2d_transpose(x, self.layer.weight, self.layer.bias, self.spec))


@dataclass(frozen=True)
class ProjectionSpec:
    """Geometry of the projection layers; (k, s, p) must scale by exactly s."""

    channels: int
    kernel: int
    stride: int
    padding: int

    def __post_init__(self):
        if self.kernel - 2 * self.padding != self.stride:
            raise ConfigError(
                f"projection (k={self.kernel}, s={self.stride}, p={self.padding}) does not "
                f"scale by an exact integer factor; need k - 2p == s"
            )

    @property
    def scale_factor(self):
        return self.stride


def projection_spec_for_scale(channels, scale):
    """The default projection geometries: x2 -> (6,2,2), x4 -> (8,4,2)."""
    table = {2: (6, 2, 2), 4: (8, 4, 2)}
    if scale not in table:
        raise ConfigError(f"unsupported scale {scale}; expected one of {sorted(table)}")
    k, s, p = table[scale]
    return ProjectionSpec(channels, k, s, p)


class UpProjection:
    """LR -> HR projection with error feedback.

    deconv lifts the input, conv maps it back down, the (signed) residual
    against the input is lifted again and added to the first estimate.
    """

    def __init__(self, name, proj, *, abs_residual=False, bn=False, seed=0):
        c, k, s, p = proj.channels, proj.kernel, proj.stride, proj.padding
        self.name = name
        self.abs_residual = abs_residual
        self.deconv = DeconvLayer(f"{name}.deconv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)
        self.conv = ConvLayer(f"{name}.conv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)
        self.err_deconv = DeconvLayer(f"{name}.err_deconv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)

    def __call__(self, l_prev):
        h = self.deconv(l_prev)
        l = self.conv(h)
        e = sub(l, l_prev)
        if self.abs_residual:
            e = abs_val(e)
        h_err = self.err_deconv(e)
        return add(h_err, h)

    def params(self):
        out = {}
        for unit in (self.deconv, self.conv, self.err_deconv):
            out.update(unit.params())
        return out


class DownProjection:
    """HR -> LR projection with error feedback: two convolutions and one deconvolution."""

    def __init__(self, name, proj, *, abs_residual=False, bn=False, seed=0):
        c, k, s, p = proj.channels, proj.kernel, proj.stride, proj.padding
        self.name = name
        self.stride = s
        self.kernel = k
        self.padding = p
        self.abs_residual = abs_residual
        self.conv = ConvLayer(f"{name}.conv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)
        self.deconv = DeconvLayer(f"{name}.deconv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)
        self.err_conv = ConvLayer(f"{name}.err_conv", c, c, k, s, p, activation="prelu", bn=bn, seed=seed)

    def __call__(self, h_next):
        h, w = h_next.dims[2], h_next.dims[3]
        for size in (h, w):
            if (size + 2 * self.padding - self.kernel) % self.stride != 0:
                raise ConfigError(
                    f"{self.name}: HR size {h}x{w} does not divide into integral LR dims "
                    f"for k={self.kernel}, s={self.stride}, p={self.padding}"
                )
        l = self.conv(h_next)
        h_back = self.deconv(l)
        e = sub(h_back, h_next)
        if self.abs_residual:
            e = abs_val(e)
        l_err = self.err_conv(e)
        return add(l_err, l)

    def params(self):
        out = {}
        for unit in (self.conv, self.deconv, self.err_conv):
            out.update(unit.params())
        return out


class CoupledChain:
    """N coupled (up, down) projection pairs plus a terminal up-projection.

    Each up-projection consumes the input features plus the sum of every
    previous down-projection output; each down-projection consumes the sum of
    every up-projection output so far. Returns the HR feature map and the list
    of all N down-projection outputs (consumed by the step-wise variant).
    """

    def __init__(self, name, proj, n_blocks, *, abs_residual=False, bn=False, seed=0):
        if n_blocks < 1:
            raise ConfigError(f"coupled chain needs at least 1 block, got {n_blocks}")
        self.name = name
        self.n_blocks = n_blocks
        kw = dict(abs_residual=abs_residual, bn=bn, seed=seed)
        self.ups = [UpProjection(f"{name}.up{j + 1}", proj, **kw) for j in range(n_blocks + 1)]
        self.downs = [DownProjection(f"{name}.down{j + 1}", proj, **kw) for j in range(n_blocks)]

    def __call__(self, f1, stage_hook=None):
        hook = stage_hook if stage_hook is not None else (lambda name, t: t)
        up_in = f1
        down_in = None
        down_outs = []
        for j in range(self.n_blocks):
            h = hook(self.ups[j].name, self.ups[j](up_in))
            down_in = h if down_in is None else add(down_in, h)
            d = hook(self.downs[j].name, self.downs[j](down_in))
            down_outs.append(d)
            up_in = add(up_in, d)
        return hook(self.ups[self.n_blocks].name, self.ups[self.n_blocks](up_in)), down_outs

    def params(self):
        out = {}
        for unit in self.ups + self.downs:
            out.update(unit.params())
        return out


class ResidualBlock:
    """Shape-preserving conv-ReLU-conv block with identity skip; no BN by default."""

    def __init__(self, name, channels, *, bn=False, seed=0):
        self.name = name
        self.conv1 = ConvLayer(f"{name}.conv1", channels, channels, 3, 1, 1,
                               activation="relu", bn=bn, seed=seed)
        self.conv2 = ConvLayer(f"{name}.conv2", channels, channels, 3, 1, 1,
                               activation=None, bn=bn, seed=seed)

    def __call__(self, x):
        if x.dims[1] != self.conv1.spec.in_channels:
            raise ShapeError(f"{self.name}: expected {self.conv1.spec.in_channels} channels, got {x.dims}")
        return add(self.conv2(self.conv1(x)), x)

    def params(self):
        out = dict(self.conv1.params())
        out.update(self.conv2.params())
        return out


def stepwise_fuse(s_d, d_res, adapter):
    """Fuse a down-projection output into the deep branch: adapter(s_d) + d_res.

    The adapter is a 1x1 conv lifting the shallow channel count to the deep one.
    """
    if s_d.dims[2:] != d_res.dims[2:]:
        raise ShapeError(
            f"stepwise_fuse: spatial mismatch between down-projection output {s_d.dims} "
            f"and residual features {d_res.dims}"
        )
    return add(adapter(s_d), d_res)
