"""Depthwise-separable convolutional front-end.

A 3x3 stem convolution lifts the (1, 80, T) feature map to 32 channels;
four residual blocks built from depthwise-separable convolutions then
halve the frequency extent three times (80 -> 40 -> 20 -> 10) while the
time extent is preserved, and the final (64, 10, T) map is flattened
channel-major to (640, T).

All convolutions use 3x3 kernels with padding 1 (shortcut projections are
1x1 with padding 0); strides apply to the frequency axis only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .audio import FbankFeatures
from .tensor_ops import (BatchNormParams, Conv2dSpec, as_tensor, batchnorm_infer,
                         conv2d, depthwise_separable, relu)

KERNEL = (3, 3)
PADDING = (1, 1)


@dataclass(frozen=True)
class DsmConfig:
    stem_channels: int = 32
    block_channels: tuple[int, ...] = (32, 32, 64, 64)
    freq_strides: tuple[int, ...] = (1, 2, 2, 2)

    def __post_init__(self):
        if len(self.block_channels) != 4 or len(self.freq_strides) != 4:
            raise ValueError("DsmConfig: exactly 4 blocks required")
        if math.prod(self.freq_strides) != 8:
            raise ValueError("DsmConfig: frequency strides must multiply to 8")

    def out_channels(self, mel_bins: int = 80) -> int:
        return self.block_channels[-1] * (mel_bins // math.prod(self.freq_strides))


@dataclass
class ConvParams:
    weight: np.ndarray
    bias: np.ndarray


@dataclass
class DsConvParams:
    """One depthwise-separable convolution: per-channel 3x3 + mixing 1x1."""

    dw_weight: np.ndarray
    dw_bias: np.ndarray
    pw_weight: np.ndarray
    pw_bias: np.ndarray

    @property
    def in_channels(self) -> int:
        return self.dw_weight.shape[0]

    @property
    def out_channels(self) -> int:
        return self.pw_weight.shape[0]


@dataclass
class ResBlockParams:
    ds1: DsConvParams
    bn1: BatchNormParams
    ds2: DsConvParams
    bn2: BatchNormParams
    freq_stride: int = 1
    shortcut: ConvParams | None = None
    shortcut_bn: BatchNormParams | None = None


@dataclass
class DsmParams:
    stem: ConvParams
    stem_bn: BatchNormParams
    blocks: list[ResBlockParams] = field(default_factory=list)


def ds_conv(x, p: DsConvParams, freq_stride: int = 1) -> np.ndarray:
    spec = Conv2dSpec(p.in_channels, p.in_channels, KERNEL,
                      stride=(freq_stride, 1), padding=PADDING, groups=p.in_channels)
    return depthwise_separable(x, p.dw_weight, p.dw_bias, p.pw_weight, p.pw_bias, spec)


def dsm_resblock(x, p: ResBlockParams) -> np.ndarray:
    """Main path DSConv/BN/ReLU/DSConv/BN plus a (projected) shortcut,
    joined by ReLU(main + shortcut). Frequency shrinks by ``p.freq_stride``;
    time is untouched."""
    x = as_tensor(x)
    main = ds_conv(x, p.ds1, freq_stride=p.freq_stride)
    main = relu(batchnorm_infer(main, p.bn1))
    main = ds_conv(main, p.ds2, freq_stride=1)
    main = batchnorm_infer(main, p.bn2)

    if p.shortcut is None:
        if x.shape != main.shape:
            raise ValueError(
                f"dsm_resblock: identity shortcut needs matching shapes, "
                f"got {x.shape} vs {main.shape}")
        short = x
    else:
        c_out = p.shortcut.weight.shape[0]
        spec = Conv2dSpec(x.shape[0], c_out, (1, 1), stride=(p.freq_stride, 1))
        short = conv2d(x, p.shortcut.weight, p.shortcut.bias, spec)
        short = batchnorm_infer(short, p.shortcut_bn)
    return relu(main + short)


def dsm_forward(feats: FbankFeatures | np.ndarray, params: DsmParams) -> np.ndarray:
    """(T, 80) features -> (640, T): stem conv/BN/ReLU, four residual
    blocks, then channel-major flattening of the (64, 10, T) map."""
    frames = feats.frames if isinstance(feats, FbankFeatures) else np.asarray(feats)
    if frames.ndim != 2 or frames.shape[1] != 80:
        raise ValueError(f"dsm_forward: expected (T, 80) features, got {frames.shape}")

    x = as_tensor(frames).T[None, :, :]  # (1, 80, T)
    stem_out = params.stem.weight.shape[0]
    spec = Conv2dSpec(1, stem_out, KERNEL, stride=(1, 1), padding=PADDING)
    x = relu(batchnorm_infer(conv2d(x, params.stem.weight, params.stem.bias, spec),
                             params.stem_bn))
    for block in params.blocks:
        x = dsm_resblock(x, block)
    c, f, t = x.shape
    return x.reshape(c * f, t)  # channel index varies slowest
