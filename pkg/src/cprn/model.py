"""Assembles the network variants, counts parameters, runs the forward pass.

Variants:
  CPRN     shallow coupled-projection chain feeding the deep residual branch,
           reconstructions of both branches summed
  CPRN_S   CPRN plus step-wise fusion of each down-projection output into the
           matching residual block
  Pa_CPRN  shallow and deep branches run in parallel from the head; their
           reconstructed images are averaged
  CP_SD    shallow branch alone
  RN_SD    deep residual branch alone
"""

from dataclasses import asdict, dataclass

import numpy as np

from .blocks import ConvLayer, CoupledChain, DeconvLayer, ResidualBlock
from .blocks import projection_spec_for_scale, stepwise_fuse
from .errors import ConfigError, NumericalError, ShapeError
from .tensor import Tensor, add, scale

VARIANTS = ("CPRN", "CPRN_S", "Pa_CPRN", "CP_SD", "RN_SD")


@dataclass
class ModelConfig:
    """Variant selector plus the structural hyperparameters.

    N: coupled-projection blocks; M: residual blocks (defaults to 16, or 6 for
    CPRN_S); sc/dc: shallow/deep channel counts; scale: upsampling factor.
    """

    variant: str = "CPRN"
    scale: int = 2
    N: int = 6
    M: int = None
    sc: int = 32
    dc: int = 64
    bn_shallow: bool = False
    bn_deep: bool = False
    abs_residual: bool = False

    def __post_init__(self):
        if self.M is None:
            self.M = 6 if self.variant == "CPRN_S" else 16

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.scale not in (2, 4):
            raise ConfigError(f"scale must be 2 or 4, got {self.scale}")
        for label, value in (("N", self.N), ("M", self.M), ("sc", self.sc), ("dc", self.dc)):
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{label} must be a positive integer, got {value!r}")
        if self.variant == "CPRN_S" and self.M > self.N:
            raise ConfigError(
                f"CPRN_S pairs each residual block with one down-projection output, "
                f"so M <= N is required; got M={self.M}, N={self.N}"
            )
        return self

    def to_dict(self):
        return asdict(self)


def _needs_shallow(variant):
    return variant != "RN_SD"


def _needs_deep(variant):
    return variant != "CP_SD"


def _deep_from_head(variant):
    """Parallel-style deep branch taking the head features directly (LR scale)."""
    return variant in ("Pa_CPRN", "RN_SD")


class Model:
    """A built network: layer objects plus the flat named parameter dict."""

    def __init__(self, config, seed=0):
        config.validate()
        self.config = config
        self.seed = seed
        c = config
        proj = projection_spec_for_scale(c.sc, c.scale)
        k, s, p = proj.kernel, proj.stride, proj.padding

        self.head1 = ConvLayer("head.conv1", 1, c.dc, 3, 1, 1, activation="prelu", seed=seed)
        self.head2 = ConvLayer("head.conv2", c.dc, c.sc, 1, 1, 0, activation="prelu", seed=seed)

        self.chain = None
        self.recon_shallow = None
        if _needs_shallow(c.variant):
            self.chain = CoupledChain("shallow", proj, c.N, abs_residual=c.abs_residual,
                                      bn=c.bn_shallow, seed=seed)
            self.recon_shallow = ConvLayer("recon.shallow", c.sc, 1, 3, 1, 1, seed=seed)

        self.entry = None
        self.res_blocks = []
        self.exit = None
        self.recon_deep = None
        self.adapters = []
        if _needs_deep(c.variant):
            if _deep_from_head(c.variant):
                self.entry = ConvLayer("deep.entry", c.sc, c.dc, 3, 1, 1, activation="prelu", seed=seed)
            else:
                self.entry = ConvLayer("deep.entry", c.sc, c.dc, k, s, p, activation="prelu", seed=seed)
            self.res_blocks = [ResidualBlock(f"deep.res{i + 1}", c.dc, bn=c.bn_deep, seed=seed)
                               for i in range(c.M)]
            self.exit = DeconvLayer("deep.exit", c.dc, c.dc, k, s, p, activation="prelu", seed=seed)
            self.recon_deep = ConvLayer("recon.deep", c.dc, 1, 3, 1, 1, seed=seed)
        if c.variant == "CPRN_S":
            self.adapters = [ConvLayer(f"stepwise.adapt{i + 1}", c.sc, c.dc, 1, 1, 0, seed=seed)
                             for i in range(c.M)]

        self.params = {}
        for unit in self._units():
            for name, t in unit.params().items():
                if name in self.params:
                    raise ConfigError(f"duplicate parameter name {name}")
                self.params[name] = t

    def _units(self):
        units = [self.head1, self.head2]
        if self.chain is not None:
            units += [self.chain, self.recon_shallow]
        if self.entry is not None:
            units += [self.entry] + self.res_blocks + [self.exit, self.recon_deep]
        units += self.adapters
        return units

    @property
    def scale(self):
        return self.config.scale

    def zero_grads(self):
        for t in self.params.values():
            t.zero_grad()

    def __call__(self, x):
        return self.forward(x)

    def forward(self, x):
        return self.forward_parts(x)["sr"]

    def forward_parts(self, x):
        """Run the network; returns sr plus per-branch reconstructions when present."""
        if not isinstance(x, Tensor):
            raise ShapeError(f"forward expects a Tensor, got {type(x).__name__}")
        if x.dims[1] != 1:
            raise ShapeError(f"input must be single-channel NCHW, got {x.dims}")
        c = self.config.variant

        f1 = self._checked("head.conv2", self.head2(self._checked("head.conv1", self.head1(x))))

        shallow_img = None
        sr_s = None
        s_d = []
        if self.chain is not None:
            sr_s, s_d = self.chain(f1, stage_hook=self._checked)
            shallow_img = self._checked("recon.shallow", self.recon_shallow(sr_s))

        deep_img = None
        if self.entry is not None:
            deep_in = f1 if _deep_from_head(c) else sr_s
            feat = self._checked("deep.entry", self.entry(deep_in))
            for i, block in enumerate(self.res_blocks):
                if self.adapters:
                    feat = stepwise_fuse(s_d[i], feat, self.adapters[i])
                feat = self._checked(block.name, block(feat))
            feat = self._checked("deep.exit", self.exit(feat))
            deep_img = self._checked("recon.deep", self.recon_deep(feat))

        if c == "CP_SD":
            sr = shallow_img
        elif c == "RN_SD":
            sr = deep_img
        elif c == "Pa_CPRN":
            sr = scale(add(shallow_img, deep_img), 0.5)
        else:
            sr = add(shallow_img, deep_img)
        return {"sr": sr, "shallow_image": shallow_img, "deep_image": deep_img}

    @staticmethod
    def _checked(name, t):
        if not np.all(np.isfinite(t.data)):
            raise NumericalError(f"non-finite activations after layer {name}")
        return t


def build(config, seed=0):
    """Build a model; identical (config, seed) gives bit-identical parameters."""
    return Model(config, seed)


def param_count(model):
    """Exact parameter counts: total plus per top-level submodule."""
    groups = {}
    total = 0
    for name, t in model.params.items():
        size = int(np.prod(t.dims))
        total += size
        group = name.split(".", 1)[0]
        groups[group] = groups.get(group, 0) + size
    return total, groups


def count_params(model, prefix):
    """Parameter count restricted to names starting with a prefix (e.g. 'deep.res')."""
    return sum(int(np.prod(t.dims)) for name, t in model.params.items() if name.startswith(prefix))
