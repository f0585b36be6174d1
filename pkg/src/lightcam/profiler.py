"""Analytical parameter/FLOPs accounting and the single-thread RTF benchmark.

Counting conventions (frozen for reproducibility):

* FLOPs = 2 x multiply-accumulates; a convolution with bias adds one FLOP
  per output element, so a conv costs
  2 * (C_in / groups) * C_out * k_f * k_t * F_out * T_out (+ C_out * F_out * T_out).
* A per-frame linear map costs 2 * D_in * D_out * T (bias adds not counted).
* Batch normalization, activations, masks, pooling, and residual additions
  are counted as one FLOP per element processed.
* The context-mask predictor is counted per segment (ceil(T / 100)
  segments), so its cost is piecewise-linear in T; all convolutional rows
  scale exactly linearly because every convolution is same-length in time.
* Totals are reported for an explicit frame count (default 100 frames,
  i.e. one second of audio); statistics pooling and the embedding head add
  a constant per-utterance term.

Parameter counts cover stored weight scalars (conv kernels, biases, BN
gamma/beta); BN running statistics are stored in weight files but are not
learned and are excluded.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field

from .model import ModelConfig, weight_specs
from .tensor_ops import conv_out_extent


@dataclass
class LayerProfile:
    name: str
    params: int = 0
    flops: int = 0


@dataclass
class ProfileReport:
    total_params: int
    total_flops: int
    frames: int
    rows: list[LayerProfile] = field(default_factory=list)
    rtf: float | None = None


# -- FLOPs primitives ---------------------------------------------------------

def flops_conv2d(c_in: int, c_out: int, k_f: int, k_t: int, out_f: int, out_t: int,
                 groups: int = 1, bias: bool = True) -> int:
    n = 2 * (c_in // groups) * c_out * k_f * k_t * out_f * out_t
    return n + (c_out * out_f * out_t if bias else 0)


def flops_depthwise_separable(c_in: int, c_out: int, k_f: int, k_t: int,
                              out_f: int, out_t: int, bias: bool = True) -> int:
    dw = flops_conv2d(c_in, c_in, k_f, k_t, out_f, out_t, groups=c_in, bias=bias)
    pw = flops_conv2d(c_in, c_out, 1, 1, out_f, out_t, bias=bias)
    return dw + pw


def flops_conv1d(c_in: int, c_out: int, k: int, out_t: int, bias: bool = True) -> int:
    n = 2 * c_in * c_out * k * out_t
    return n + (c_out * out_t if bias else 0)


def flops_linear(d_in: int, d_out: int, frames: int = 1) -> int:
    return 2 * d_in * d_out * frames


def flops_elementwise(*extents: int) -> int:
    return math.prod(extents)


def flops_cam(hidden: int, bottleneck: int, growth: int, frames: int,
              segment_length: int) -> int:
    segments = -(-frames // segment_length)
    pooling = 2 * hidden * frames                     # global + segment means
    per_segment = (hidden                             # e_g + e_s
                   + flops_linear(hidden, bottleneck) + bottleneck
                   + flops_linear(bottleneck, growth) + growth)
    return pooling + segments * per_segment


def flops_tstp(channels: int, frames: int) -> int:
    return 3 * channels * frames + 2 * channels


# -- model walkers ------------------------------------------------------------

def count_params(cfg: ModelConfig, store=None) -> tuple[int, list[LayerProfile]]:
    """Learned-parameter count per layer. With a store given, every tensor
    is cross-checked against the expected shape."""
    rows: dict[str, LayerProfile] = {}
    total = 0
    for spec in weight_specs(cfg):
        if store is not None:
            if spec.name not in store:
                raise ValueError(f"count_params: store is missing {spec.name}")
            if store[spec.name].shape != spec.shape:
                raise ValueError(f"count_params: {spec.name} has shape "
                                 f"{store[spec.name].shape}, expected {spec.shape}")
        if spec.is_running_stat:
            continue
        row = rows.setdefault(spec.layer, LayerProfile(spec.layer))
        row.params += spec.size
        total += spec.size
    return total, list(rows.values())


def count_flops(cfg: ModelConfig, frames: int = 100,
                front_end: str = "separable") -> tuple[int, list[LayerProfile]]:
    """Forward-pass FLOPs per layer for one utterance of ``frames`` frames.

    ``front_end="regular"`` prices the front-end with ordinary convolutions
    of identical shapes in place of the depthwise-separable ones (the
    heavier architecture this design replaces).
    """
    if frames < 1:
        raise ValueError("count_flops: frames must be >= 1")
    if front_end not in ("separable", "regular"):
        raise ValueError(f"count_flops: unknown front_end {front_end!r}")
    rows: list[LayerProfile] = []

    def add(name: str, flops: int) -> None:
        rows.append(LayerProfile(name, flops=flops))

    def front_conv(c_in, c_out, out_f):
        if front_end == "separable":
            return flops_depthwise_separable(c_in, c_out, 3, 3, out_f, frames)
        return flops_conv2d(c_in, c_out, 3, 3, out_f, frames)

    # front-end: stem is a regular conv either way
    f_extent = cfg.mel_bins
    stem_c = cfg.dsm.stem_channels
    add("dsm.stem", flops_conv2d(1, stem_c, 3, 3, f_extent, frames)
        + 2 * flops_elementwise(stem_c, f_extent, frames))           # bn + relu

    in_c = stem_c
    for i, (out_c, stride) in enumerate(zip(cfg.dsm.block_channels, cfg.dsm.freq_strides), 1):
        f_out = conv_out_extent(f_extent, 3, stride, 1)
        n = front_conv(in_c, out_c, f_out)                            # ds1 (strided)
        n += 2 * flops_elementwise(out_c, f_out, frames)              # bn1 + relu
        n += front_conv(out_c, out_c, f_out)                          # ds2
        n += flops_elementwise(out_c, f_out, frames)                  # bn2
        if stride != 1 or in_c != out_c:
            n += flops_conv2d(in_c, out_c, 1, 1, f_out, frames)       # projection
            n += flops_elementwise(out_c, f_out, frames)              # its bn
        n += 2 * flops_elementwise(out_c, f_out, frames)              # add + relu
        add(f"dsm.block{i}", n)
        in_c, f_extent = out_c, f_out

    h = cfg.fnn_hidden
    add("backbone.stem", flops_conv1d(cfg.dsm_out_channels, h, cfg.stem_kernel, frames)
        + 2 * flops_elementwise(h, frames))

    c = h
    for b, depth in enumerate(cfg.block_depths, 1):
        for l in range(1, depth + 1):
            n = flops_linear(c, h, frames)                            # fnn
            n += 2 * flops_elementwise(h, frames)                     # bn + relu
            n += flops_conv1d(h, cfg.growth, cfg.tdnn_kernel, frames)
            n += flops_cam(h, cfg.cam_bottleneck, cfg.growth, frames, cfg.segment_length)
            n += flops_elementwise(cfg.growth, frames)                # mask multiply
            add(f"backbone.block{b}.layer{l:02d}", n)
            c += cfg.growth
        if b < len(cfg.block_depths):
            add(f"backbone.transition{b}",
                2 * flops_elementwise(c, frames) + flops_linear(c, c // 2, frames))
            c //= 2

    add("mfa", flops_elementwise(cfg.mfa_channels, frames))           # bn after concat
    add("tstp", flops_tstp(cfg.mfa_channels, frames))
    add("head", flops_elementwise(cfg.stats_dim)
        + flops_linear(cfg.stats_dim, cfg.embedding_dim)
        + flops_elementwise(cfg.embedding_dim))
    return sum(r.flops for r in rows), rows


def profile_model(cfg: ModelConfig, store=None, frames: int = 100) -> ProfileReport:
    """Merged per-layer parameter and FLOPs breakdown."""
    total_params, param_rows = count_params(cfg, store)
    total_flops, flop_rows = count_flops(cfg, frames)
    params_by_layer = {r.name: r.params for r in param_rows}
    rows = [LayerProfile(r.name, params_by_layer.pop(r.name, 0), r.flops)
            for r in flop_rows]
    assert not params_by_layer, f"unpriced layers: {sorted(params_by_layer)}"
    return ProfileReport(total_params=total_params, total_flops=total_flops,
                         frames=frames, rows=rows)


# -- empirical benchmark ------------------------------------------------------

@dataclass
class RtfResult:
    """Real-time factor samples: processing time / audio duration."""

    duration_s: float
    rtf_values: list[float]

    @property
    def median(self) -> float:
        return statistics.median(self.rtf_values)

    @property
    def spread(self) -> tuple[float, float]:
        return min(self.rtf_values), max(self.rtf_values)


def measure_rtf(forward, duration_s: float, repetitions: int = 3,
                timer=time.perf_counter, warmup: bool = True) -> RtfResult:
    """Wall-clock RTF of ``forward()`` (a no-argument callable that processes
    ``duration_s`` seconds of audio). One untimed warm-up pass by default;
    the caller is responsible for pinning execution to a single thread.
    """
    if repetitions < 1:
        raise ValueError("measure_rtf: repetitions must be >= 1")
    if duration_s <= 0:
        raise ValueError("measure_rtf: duration must be positive")
    if warmup:
        forward()
    values = []
    for _ in range(repetitions):
        start = timer()
        forward()
        values.append((timer() - start) / duration_s)
    return RtfResult(duration_s=duration_s, rtf_values=values)


# -- rendering ----------------------------------------------------------------

def render_report(report: ProfileReport) -> str:
    """Fixed-width text table with one row per layer plus totals."""
    width = max(len(r.name) for r in report.rows) + 2
    lines = [f"{'layer':<{width}}{'params':>12}  {'flops@{}f'.format(report.frames):>14}"]
    for r in report.rows:
        lines.append(f"{r.name:<{width}}{r.params:>12}  {r.flops:>14}")
    lines.append(f"{'total':<{width}}{report.total_params:>12}  {report.total_flops:>14}")
    if report.rtf is not None:
        lines.append(f"rtf (median): {report.rtf:.4f}")
    return "\n".join(lines) + "\n"


def report_as_dict(report: ProfileReport) -> dict:
    out = {"frames": report.frames,
           "total_params": report.total_params,
           "total_flops": report.total_flops,
           "rows": [{"name": r.name, "params": r.params, "flops": r.flops}
                    for r in report.rows]}
    if report.rtf is not None:
        out["rtf"] = report.rtf
    return out
