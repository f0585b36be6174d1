"""Dense float32 tensor primitives: convolutions, inference-mode batch
normalization, activations, and affine maps.

Tensors are numpy float32 arrays in row-major layout with the channel axis
first: 2-D feature maps are (C, F, T), time sequences are (C, T).
Convolution is cross-correlation (no kernel flip) with zero padding.
All functions are pure; inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Conv2dSpec",
    "BatchNormParams",
    "as_tensor",
    "conv_out_extent",
    "conv2d",
    "depthwise_separable",
    "conv1d",
    "batchnorm_infer",
    "relu",
    "sigmoid",
    "linear",
    "linear_over_time",
]


def as_tensor(x) -> np.ndarray:
    """Coerce to a float32 ndarray (no copy when already float32)."""
    return np.asarray(x, dtype=np.float32)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


def conv_out_extent(size: int, kernel: int, stride: int = 1, padding: int = 0,
                    dilation: int = 1) -> int:
    """Output extent of a convolution along one axis (floor rule)."""
    return (size + 2 * padding - dilation * (kernel - 1) - 1) // stride + 1


@dataclass(frozen=True)
class Conv2dSpec:
    """Shape contract of one 2-D convolution."""

    in_channels: int
    out_channels: int
    kernel: tuple[int, int]
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    groups: int = 1

    def __post_init__(self):
        _require(self.in_channels >= 1 and self.out_channels >= 1,
                 "Conv2dSpec: channel extents must be >= 1")
        _require(all(k >= 1 for k in self.kernel), "Conv2dSpec: kernel extents must be >= 1")
        _require(all(s >= 1 for s in self.stride), "Conv2dSpec: strides must be >= 1")
        _require(all(p >= 0 for p in self.padding), "Conv2dSpec: padding must be >= 0")
        _require(self.groups >= 1, "Conv2dSpec: groups must be >= 1")
        _require(self.in_channels % self.groups == 0,
                 f"Conv2dSpec: groups={self.groups} does not divide in_channels={self.in_channels}")
        _require(self.out_channels % self.groups == 0,
                 f"Conv2dSpec: groups={self.groups} does not divide out_channels={self.out_channels}")

    @property
    def is_depthwise(self) -> bool:
        return self.groups == self.in_channels == self.out_channels

    @property
    def is_pointwise(self) -> bool:
        return self.kernel == (1, 1) and self.groups == 1


@dataclass
class BatchNormParams:
    """Per-channel inference-mode normalization parameters.

    ``epsilon`` may be zero; identity normalization (gamma=1, beta=0,
    mean=0, var=1, eps=0) then reproduces the input bit-for-bit.
    """

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    epsilon: float = 1e-5

    def __post_init__(self):
        self.gamma = as_tensor(self.gamma)
        self.beta = as_tensor(self.beta)
        self.running_mean = as_tensor(self.running_mean)
        self.running_var = as_tensor(self.running_var)
        c = self.gamma.shape
        _require(self.gamma.ndim == 1, "BatchNormParams: parameters must be vectors")
        _require(self.beta.shape == c and self.running_mean.shape == c
                 and self.running_var.shape == c,
                 "BatchNormParams: all four vectors must share the channel extent")
        _require(bool((self.running_var >= 0).all()),
                 "BatchNormParams: running_var must be >= 0 elementwise")
        _require(self.epsilon >= 0, "BatchNormParams: epsilon must be >= 0")

    @property
    def num_channels(self) -> int:
        return self.gamma.shape[0]


def conv2d(x, w, b, spec: Conv2dSpec) -> np.ndarray:
    """Grouped 2-D cross-correlation over a (C, F, T) map with zero padding."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(x.ndim == 3, f"conv2d: input must be (C, F, T), got {x.ndim} axes")
    c_in, f_in, t_in = x.shape
    kf, kt = spec.kernel
    _require(c_in == spec.in_channels,
             f"conv2d: channel axis has extent {c_in}, spec expects {spec.in_channels}")
    want_w = (spec.out_channels, spec.in_channels // spec.groups, kf, kt)
    _require(w.shape == want_w, f"conv2d: weight shape {w.shape} != expected {want_w}")
    _require(b.shape == (spec.out_channels,),
             f"conv2d: bias shape {b.shape} != ({spec.out_channels},)")

    f_out = conv_out_extent(f_in, kf, spec.stride[0], spec.padding[0])
    t_out = conv_out_extent(t_in, kt, spec.stride[1], spec.padding[1])
    _require(f_out >= 1, f"conv2d: non-positive output extent on frequency axis ({f_out})")
    _require(t_out >= 1, f"conv2d: non-positive output extent on time axis ({t_out})")

    pf, pt = spec.padding
    xp = np.pad(x, ((0, 0), (pf, pf), (pt, pt)))
    # Window view (C_in, F_out*, T_out*, kf, kt) subsampled by the strides.
    win = sliding_window_view(xp, (kf, kt), axis=(1, 2))[:, ::spec.stride[0], ::spec.stride[1]]
    g = spec.groups
    wg = w.reshape(g, spec.out_channels // g, spec.in_channels // g, kf, kt)
    xg = win.reshape(g, spec.in_channels // g, f_out, t_out, kf, kt)
    y = np.einsum("gpiuv,giftuv->gpft", wg, xg, optimize=True)
    y = y.reshape(spec.out_channels, f_out, t_out) + b[:, None, None]
    y = y.astype(np.float32, copy=False)
    assert np.isfinite(y).all(), "conv2d: non-finite output"
    return y


def depthwise_separable(x, dw_w, dw_b, pw_w, pw_b, spec: Conv2dSpec) -> np.ndarray:
    """Depthwise 2-D convolution (one kernel per input channel, carries the
    stride) followed by a stride-1 pointwise 1x1 convolution mixing channels.

    ``spec`` describes the depthwise stage, which keeps the channel count,
    so it must satisfy groups == in_channels == out_channels; the pointwise
    output extent comes from ``pw_w``. Equivalent to ``conv2d`` with the
    rank-factored kernel w[o, i, u, v] = pw_w[o, i] * dw_w[i, u, v]
    whenever dw_b is zero.
    """
    x, pw_w = as_tensor(x), as_tensor(pw_w)
    _require(x.ndim == 3, f"depthwise_separable: input must be (C, F, T), got {x.ndim} axes")
    _require(spec.groups == spec.in_channels == spec.out_channels,
             f"depthwise_separable: groups={spec.groups} must equal "
             f"in_channels={spec.in_channels} in the depthwise stage, which keeps "
             f"the channel count (out_channels={spec.out_channels})")
    _require(pw_w.ndim == 4 and pw_w.shape[1:] == (spec.in_channels, 1, 1),
             f"depthwise_separable: pointwise weight shape {pw_w.shape} != "
             f"(C_out, {spec.in_channels}, 1, 1)")
    pw_spec = Conv2dSpec(spec.in_channels, pw_w.shape[0], (1, 1))
    mid = conv2d(x, dw_w, dw_b, spec)
    return conv2d(mid, pw_w, pw_b, pw_spec)


def conv1d(x, w, b, dilation: int = 1, padding: int = 0) -> np.ndarray:
    """Dilated 1-D cross-correlation over (C, T) with full channel mixing."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(x.ndim == 2, f"conv1d: input must be (C, T), got {x.ndim} axes")
    _require(w.ndim == 3, f"conv1d: weight must be (C_out, C_in, k), got {w.ndim} axes")
    c_in, t_in = x.shape
    c_out, w_cin, k = w.shape
    _require(w_cin == c_in, f"conv1d: channel axis has extent {c_in}, weight expects {w_cin}")
    _require(b.shape == (c_out,), f"conv1d: bias shape {b.shape} != ({c_out},)")
    _require(dilation >= 1 and padding >= 0, "conv1d: dilation >= 1 and padding >= 0 required")

    t_out = t_in + 2 * padding - dilation * (k - 1)
    _require(t_out >= 1, f"conv1d: non-positive output extent on time axis ({t_out})")
    xp = np.pad(x, ((0, 0), (padding, padding)))
    win = np.stack([xp[:, u * dilation: u * dilation + t_out] for u in range(k)], axis=2)
    y = np.tensordot(w, win, axes=([1, 2], [0, 2])) + b[:, None]
    y = y.astype(np.float32, copy=False)
    assert np.isfinite(y).all(), "conv1d: non-finite output"
    return y


def batchnorm_infer(x, p: BatchNormParams) -> np.ndarray:
    """Per-channel affine normalization with frozen running statistics.

    The channel axis is axis 0; any number of trailing axes is allowed.
    """
    x = as_tensor(x)
    _require(x.ndim >= 1 and x.shape[0] == p.num_channels,
             f"batchnorm_infer: channel axis has extent {x.shape[0] if x.ndim else 0}, "
             f"params expect {p.num_channels}")
    shape = (p.num_channels,) + (1,) * (x.ndim - 1)
    scale = (p.gamma / np.sqrt(p.running_var + np.float32(p.epsilon))).reshape(shape)
    shift = p.beta.reshape(shape)
    mean = p.running_mean.reshape(shape)
    y = (x - mean) * scale + shift
    assert np.isfinite(y).all(), "batchnorm_infer: non-finite output"
    return y


def relu(x) -> np.ndarray:
    return np.maximum(as_tensor(x), np.float32(0.0))


def sigmoid(x) -> np.ndarray:
    """Numerically stable logistic function (no overflow warnings)."""
    x = as_tensor(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    assert np.isfinite(out).all(), "sigmoid: non-finite output"
    return out


def linear(x, w, b) -> np.ndarray:
    """Affine map over the last axis: (..., D_in) -> (..., D_out)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(w.ndim == 2, f"linear: weight must be (D_out, D_in), got {w.ndim} axes")
    _require(x.shape[-1] == w.shape[1],
             f"linear: inner axis has extent {x.shape[-1]}, weight expects {w.shape[1]}")
    _require(b.shape == (w.shape[0],), f"linear: bias shape {b.shape} != ({w.shape[0]},)")
    y = np.einsum("...i,oi->...o", x, w, optimize=True) + b
    y = y.astype(np.float32, copy=False)
    assert np.isfinite(y).all(), "linear: non-finite output"
    return y


def linear_over_time(x, w, b) -> np.ndarray:
    """Affine map over the channel axis of a (C_in, T) sequence, per frame."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    _require(x.ndim == 2, f"linear_over_time: input must be (C, T), got {x.ndim} axes")
    _require(w.ndim == 2 and x.shape[0] == w.shape[1],
             f"linear_over_time: channel axis has extent {x.shape[0]}, weight expects "
             f"{w.shape[1] if w.ndim == 2 else w.shape}")
    _require(b.shape == (w.shape[0],),
             f"linear_over_time: bias shape {b.shape} != ({w.shape[0]},)")
    y = w @ x + b[:, None]
    assert np.isfinite(y).all(), "linear_over_time: non-finite output"
    return y
