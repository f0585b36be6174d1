"""Densely connected TDNN backbone with context-aware masking.

Each layer maps (C_in, T) to (C_in + 32, T): a per-frame FNN reduces the
input to 128 hidden channels, a dilated kernel-3 TDNN produces 32 new
channels, and a sigmoid mask predicted from pooled global plus segment
context (100-frame segments) gates those channels before they are
concatenated back onto the input. Transitions between blocks halve the
channel count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_ops import (BatchNormParams, as_tensor, batchnorm_infer, conv1d,
                         linear_over_time, relu, sigmoid)

SEGMENT_LENGTH = 100


@dataclass
class CamParams:
    """Mask-predictor weights: bottleneck FNN (w1, b1) then expansion to the
    growth-rate channels (w2, b2). ``segment_length`` is 100 frames in the
    production configuration; smaller values are allowed for testing."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    segment_length: int = SEGMENT_LENGTH

    def __post_init__(self):
        self.w1, self.b1 = as_tensor(self.w1), as_tensor(self.b1)
        self.w2, self.b2 = as_tensor(self.w2), as_tensor(self.b2)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("CamParams: w1 and w2 must be matrices")
        if self.b1.shape != (self.w1.shape[0],) or self.b2.shape != (self.w2.shape[0],):
            raise ValueError("CamParams: bias extents must match weight rows")
        if self.w2.shape[1] != self.w1.shape[0]:
            raise ValueError(
                f"CamParams: w2 inner extent {self.w2.shape[1]} != bottleneck "
                f"{self.w1.shape[0]}")
        if self.segment_length < 1:
            raise ValueError("CamParams: segment_length must be >= 1")


@dataclass
class ContextVectors:
    """Global mean plus per-segment means of a (h, T) sequence.

    ``starts`` holds the K+1 segment boundaries (0-based, half-open), so
    segment k covers frames [starts[k], starts[k+1]).
    """

    e_g: np.ndarray
    e_s: np.ndarray
    starts: np.ndarray


def global_avg_pool(x) -> np.ndarray:
    """Mean over time of a (h, T) sequence."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"global_avg_pool: expected (h, T >= 1), got {x.shape}")
    return x.mean(axis=1)


def segment_avg_pool(x, segment_length: int = SEGMENT_LENGTH) -> ContextVectors:
    """Split (h, T) into ceil(T / segment_length) contiguous segments (the
    last may be shorter) and average each; also carries the global mean."""
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError(f"segment_avg_pool: expected (h, T >= 1), got {x.shape}")
    if segment_length < 1:
        raise ValueError("segment_avg_pool: segment_length must be >= 1")
    h, t = x.shape
    starts = np.arange(0, t + segment_length, segment_length)
    starts[-1] = min(starts[-1], t)  # the last segment may be shorter
    e_s = np.stack([x[:, s:e].mean(axis=1) for s, e in zip(starts[:-1], starts[1:])])
    return ContextVectors(e_g=x.mean(axis=1), e_s=e_s, starts=starts)


def cam_mask(x_fnn, p: CamParams) -> np.ndarray:
    """Sigmoid mask (g, T), piecewise-constant over segments: each segment's
    column is sigmoid(w2 @ relu(w1 @ (e_g + e_s_k) + b1) + b2)."""
    x_fnn = as_tensor(x_fnn)
    if x_fnn.ndim != 2:
        raise ValueError(f"cam_mask: expected (h, T), got {x_fnn.shape}")
    if x_fnn.shape[0] != p.w1.shape[1]:
        raise ValueError(
            f"cam_mask: hidden extent {x_fnn.shape[0]} != w1 inner extent {p.w1.shape[1]}")
    ctx = segment_avg_pool(x_fnn, p.segment_length)
    g, t = p.w2.shape[0], x_fnn.shape[1]
    mask = np.empty((g, t), dtype=np.float32)
    for k, (s, e) in enumerate(zip(ctx.starts[:-1], ctx.starts[1:])):
        z = relu(p.w1 @ (ctx.e_g + ctx.e_s[k]) + p.b1)
        mask[:, s:e] = sigmoid(p.w2 @ z + p.b2)[:, None]
    return mask


@dataclass
class DtdnnLayerParams:
    fnn_weight: np.ndarray
    fnn_bias: np.ndarray
    fnn_bn: BatchNormParams
    tdnn_weight: np.ndarray
    tdnn_bias: np.ndarray
    cam: CamParams
    dilation: int = 1


def dtdnn_layer(x, p: DtdnnLayerParams) -> np.ndarray:
    """One dense layer: FNN hidden features drive both the TDNN and its
    context mask; the masked TDNN output is concatenated onto the input."""
    x = as_tensor(x)
    hidden = relu(batchnorm_infer(linear_over_time(x, p.fnn_weight, p.fnn_bias), p.fnn_bn))
    k = p.tdnn_weight.shape[2]
    padding = p.dilation * (k - 1) // 2  # same-length output for odd k
    new = conv1d(hidden, p.tdnn_weight, p.tdnn_bias, dilation=p.dilation, padding=padding)
    mask = cam_mask(hidden, p.cam)
    return np.concatenate([x, mask * new], axis=0)


def dense_block(x, layers: list[DtdnnLayerParams]) -> np.ndarray:
    """Sequential dense layers; channels grow by the growth rate per layer."""
    for layer in layers:
        x = dtdnn_layer(x, layer)
    return x


@dataclass
class TransitionParams:
    bn: BatchNormParams
    weight: np.ndarray
    bias: np.ndarray


def transition(x, p: TransitionParams) -> np.ndarray:
    """BN -> ReLU -> per-frame linear map halving the channel count."""
    x = as_tensor(x)
    c = x.shape[0]
    if c % 2 != 0:
        raise ValueError(f"transition: channel extent {c} must be even")
    if p.weight.shape != (c // 2, c):
        raise ValueError(f"transition: weight shape {p.weight.shape} != ({c // 2}, {c})")
    return linear_over_time(relu(batchnorm_infer(x, p.bn)), p.weight, p.bias)
