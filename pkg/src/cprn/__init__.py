"""Coupled-projection residual network for grayscale single-image super-resolution.

A desk-scale implementation: minimal NCHW tensor/autodiff core, error-feedback
up/down-projection blocks, a BN-free residual deep branch, the step-wise
variant, L1+Adam training, and PSNR/SSIM evaluation.
"""

from .kernels import BACKEND as KERNEL_BACKEND
from .model import ModelConfig, build, count_params, param_count
from .tensor import ConvSpec, Tape, Tensor, backward

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "ModelConfig",
    "build",
    "count_params",
    "param_count",
    "ConvSpec",
    "Tape",
    "Tensor",
    "backward",
    "__version__",
]
