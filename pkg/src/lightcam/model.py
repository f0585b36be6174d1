"""Model configuration, deterministic initialization, and the assembled
forward pass.

Weight naming convention (dotted, canonical forward order):

* ``dsm.stem.conv.{weight,bias}``, ``dsm.stem.bn.*``
* ``dsm.block{1-4}.ds{1,2}.{dw,pw}.{weight,bias}``, ``.bn{1,2}.*``,
  ``.shortcut.conv.{weight,bias}``, ``.shortcut.bn.*`` (projected blocks only)
* ``backbone.stem.conv.{weight,bias}``, ``backbone.stem.bn.*``
* ``backbone.block{1-3}.layer{NN}.fnn.{weight,bias}``, ``.fnn_bn.*``,
  ``.tdnn.{weight,bias}``, ``.cam.{w1,b1,w2,b2}``
* ``backbone.transition{1,2}.bn.*``, ``.linear.{weight,bias}``
* ``mfa.bn.*``, ``head.bn1.*``, ``head.fc.{weight,bias}``, ``head.bn2.*``

BN parameter leaves are ``gamma``, ``beta``, ``running_mean``,
``running_var``; the running statistics are stored for inference but are
not learned parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .audio import FbankFeatures, NUM_FILTERS
from .dsm import (ConvParams, DsConvParams, DsmConfig, DsmParams, ResBlockParams,
                  dsm_forward)
from .dtdnn import (CamParams, DtdnnLayerParams, TransitionParams, dense_block,
                    transition)
from .embedder import HeadParams, embedding_head, mfa_concat, tstp
from .errors import ConfigError, WeightFormatError
from .tensor_ops import BatchNormParams, batchnorm_infer, conv1d, relu
from .weights import WeightStore

BN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    """Every architecture hyperparameter in one place."""

    mel_bins: int = NUM_FILTERS
    dsm: DsmConfig = field(default_factory=DsmConfig)
    stem_kernel: int = 5
    fnn_hidden: int = 128
    block_depths: tuple[int, ...] = (12, 24, 16)
    growth: int = 32
    cam_bottleneck: int = 64
    segment_length: int = 100
    tdnn_kernel: int = 3
    tdnn_dilations: tuple[int, ...] = (1, 2, 2)
    embedding_dim: int = 192
    aam_margin: float = 0.2
    aam_scale: float = 32.0

    def __post_init__(self):
        names = ("mel_bins", "stem_kernel", "fnn_hidden", "growth", "cam_bottleneck",
                 "segment_length", "tdnn_kernel", "embedding_dim")
        if any(getattr(self, n) < 1 for n in names):
            raise ValueError("ModelConfig: all extents must be positive")
        if len(self.block_depths) != 3 or len(self.tdnn_dilations) != 3:
            raise ValueError("ModelConfig: exactly three dense blocks required")
        if any(d < 1 for d in self.block_depths) or any(d < 1 for d in self.tdnn_dilations):
            raise ValueError("ModelConfig: depths and dilations must be positive")

    @property
    def dsm_out_channels(self) -> int:
        return self.dsm.out_channels(self.mel_bins)

    @property
    def block_in_channels(self) -> tuple[int, ...]:
        chans, c = [], self.fnn_hidden
        for depth in self.block_depths:
            chans.append(c)
            c = (c + depth * self.growth) // 2
        return tuple(chans)

    @property
    def block_out_channels(self) -> tuple[int, ...]:
        return tuple(c + d * self.growth
                     for c, d in zip(self.block_in_channels, self.block_depths))

    @property
    def mfa_channels(self) -> int:
        return sum(self.block_out_channels)

    @property
    def stats_dim(self) -> int:
        return 2 * self.mfa_channels

    def validate(self, override: bool = False) -> None:
        """Reject any deviation from the pinned architecture constants
        unless ``override`` is set (guards against silent drift)."""
        if override:
            return
        pinned = ModelConfig()
        drift = [name for name in self.__dataclass_fields__
                 if getattr(self, name) != getattr(pinned, name)]
        if drift:
            raise ConfigError(
                f"configuration deviates from pinned constants in: {', '.join(drift)} "
                f"(pass --override to accept)")


@dataclass(frozen=True)
class WeightSpec:
    """Shape, grouping label, and initialization rule of one tensor."""

    name: str
    shape: tuple[int, ...]
    layer: str
    fan_in: int | None = None   # uniform +-1/sqrt(fan_in) when set
    fill: float = 0.0           # constant init otherwise

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_running_stat(self) -> bool:
        return self.name.endswith(".running_mean") or self.name.endswith(".running_var")


def _conv(name, layer, out_c, in_c_per_group, *kernel):
    fan_in = in_c_per_group * math.prod(kernel)
    return [WeightSpec(f"{name}.weight", (out_c, in_c_per_group, *kernel), layer, fan_in),
            WeightSpec(f"{name}.bias", (out_c,), layer)]


def _lin(name, layer, out_d, in_d):
    return [WeightSpec(f"{name}.weight", (out_d, in_d), layer, in_d),
            WeightSpec(f"{name}.bias", (out_d,), layer)]


def _bn(name, layer, c):
    return [WeightSpec(f"{name}.gamma", (c,), layer, fill=1.0),
            WeightSpec(f"{name}.beta", (c,), layer),
            WeightSpec(f"{name}.running_mean", (c,), layer),
            WeightSpec(f"{name}.running_var", (c,), layer, fill=1.0)]


def weight_specs(cfg: ModelConfig) -> list[WeightSpec]:
    """All tensors of the model in canonical forward-pass order."""
    specs: list[WeightSpec] = []
    kf, kt = 3, 3

    stem_c = cfg.dsm.stem_channels
    specs += _conv("dsm.stem.conv", "dsm.stem", stem_c, 1, kf, kt)
    specs += _bn("dsm.stem.bn", "dsm.stem", stem_c)
    in_c = stem_c
    for i, (out_c, stride) in enumerate(zip(cfg.dsm.block_channels, cfg.dsm.freq_strides), 1):
        layer = f"dsm.block{i}"
        specs += _conv(f"{layer}.ds1.dw", layer, in_c, 1, kf, kt)
        specs += _conv(f"{layer}.ds1.pw", layer, out_c, in_c, 1, 1)
        specs += _bn(f"{layer}.bn1", layer, out_c)
        specs += _conv(f"{layer}.ds2.dw", layer, out_c, 1, kf, kt)
        specs += _conv(f"{layer}.ds2.pw", layer, out_c, out_c, 1, 1)
        specs += _bn(f"{layer}.bn2", layer, out_c)
        if stride != 1 or in_c != out_c:
            specs += _conv(f"{layer}.shortcut.conv", layer, out_c, in_c, 1, 1)
            specs += _bn(f"{layer}.shortcut.bn", layer, out_c)
        in_c = out_c

    h = cfg.fnn_hidden
    specs += [WeightSpec("backbone.stem.conv.weight",
                         (h, cfg.dsm_out_channels, cfg.stem_kernel), "backbone.stem",
                         cfg.dsm_out_channels * cfg.stem_kernel),
              WeightSpec("backbone.stem.conv.bias", (h,), "backbone.stem")]
    specs += _bn("backbone.stem.bn", "backbone.stem", h)

    c = h
    for b, depth in enumerate(cfg.block_depths, 1):
        for l in range(1, depth + 1):
            layer = f"backbone.block{b}.layer{l:02d}"
            specs += _lin(f"{layer}.fnn", layer, h, c)
            specs += _bn(f"{layer}.fnn_bn", layer, h)
            specs += [WeightSpec(f"{layer}.tdnn.weight", (cfg.growth, h, cfg.tdnn_kernel),
                                 layer, h * cfg.tdnn_kernel),
                      WeightSpec(f"{layer}.tdnn.bias", (cfg.growth,), layer)]
            specs += [WeightSpec(f"{layer}.cam.w1", (cfg.cam_bottleneck, h), layer, h),
                      WeightSpec(f"{layer}.cam.b1", (cfg.cam_bottleneck,), layer),
                      WeightSpec(f"{layer}.cam.w2", (cfg.growth, cfg.cam_bottleneck),
                                 layer, cfg.cam_bottleneck),
                      WeightSpec(f"{layer}.cam.b2", (cfg.growth,), layer)]
            c += cfg.growth
        if b < len(cfg.block_depths):
            layer = f"backbone.transition{b}"
            specs += _bn(f"{layer}.bn", layer, c)
            specs += _lin(f"{layer}.linear", layer, c // 2, c)
            c //= 2

    specs += _bn("mfa.bn", "mfa", cfg.mfa_channels)
    specs += _bn("head.bn1", "head", cfg.stats_dim)
    specs += _lin("head.fc", "head", cfg.embedding_dim, cfg.stats_dim)
    specs += _bn("head.bn2", "head", cfg.embedding_dim)
    return specs


def init_weights(cfg: ModelConfig, seed: int) -> WeightStore:
    """Deterministic pseudo-random initialization: conv/linear weights from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases and BN means zero, BN gamma
    and variances one. Same seed, same bytes."""
    rng = np.random.default_rng(seed)
    store = WeightStore()
    for spec in weight_specs(cfg):
        if spec.fan_in is not None:
            bound = 1.0 / math.sqrt(spec.fan_in)
            arr = rng.uniform(-bound, bound, size=spec.shape)
        else:
            arr = np.full(spec.shape, spec.fill)
        store.add(spec.name, arr.astype(np.float32))
    return store


@dataclass
class ForwardTrace:
    """Intermediate activations of one forward pass (taps share storage
    with the computation; do not mutate)."""

    dsm_out: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    mfa_out: np.ndarray
    stats: np.ndarray
    embedding: np.ndarray


class Model:
    """Configuration plus materialized parameter bundles, ready to run."""

    def __init__(self, cfg: ModelConfig, dsm_params: DsmParams, stem: ConvParams,
                 stem_bn: BatchNormParams, blocks: list[list[DtdnnLayerParams]],
                 transitions: list[TransitionParams], mfa_bn: BatchNormParams,
                 head: HeadParams):
        self.cfg = cfg
        self.dsm_params = dsm_params
        self.stem = stem
        self.stem_bn = stem_bn
        self.blocks = blocks
        self.transitions = transitions
        self.mfa_bn = mfa_bn
        self.head = head

    @classmethod
    def build(cls, cfg: ModelConfig, store: WeightStore) -> "Model":
        """Bind a weight store to parameter bundles, verifying that the
        store holds exactly the expected tensors at the expected shapes."""
        specs = weight_specs(cfg)
        expected = {s.name: s.shape for s in specs}
        store_names = set(store.names)
        missing = sorted(set(expected) - store_names)
        if missing:
            raise WeightFormatError("missing-tensor", ", ".join(missing[:5]))
        extra = sorted(store_names - set(expected))
        if extra:
            raise WeightFormatError("unexpected-tensor", ", ".join(extra[:5]))
        for name, shape in expected.items():
            if store[name].shape != shape:
                raise WeightFormatError(
                    "bad-shape", f"{name}: {store[name].shape}, expected {shape}")

        def bn(prefix):
            return BatchNormParams(store[f"{prefix}.gamma"], store[f"{prefix}.beta"],
                                   store[f"{prefix}.running_mean"],
                                   store[f"{prefix}.running_var"], epsilon=BN_EPS)

        def conv(prefix):
            return ConvParams(store[f"{prefix}.weight"], store[f"{prefix}.bias"])

        def dsconv(prefix):
            return DsConvParams(store[f"{prefix}.dw.weight"], store[f"{prefix}.dw.bias"],
                                store[f"{prefix}.pw.weight"], store[f"{prefix}.pw.bias"])

        blocks4 = []
        for i, (stride, out_c) in enumerate(zip(cfg.dsm.freq_strides,
                                                cfg.dsm.block_channels), 1):
            p = f"dsm.block{i}"
            has_shortcut = f"{p}.shortcut.conv.weight" in store
            blocks4.append(ResBlockParams(
                ds1=dsconv(f"{p}.ds1"), bn1=bn(f"{p}.bn1"),
                ds2=dsconv(f"{p}.ds2"), bn2=bn(f"{p}.bn2"),
                freq_stride=stride,
                shortcut=conv(f"{p}.shortcut.conv") if has_shortcut else None,
                shortcut_bn=bn(f"{p}.shortcut.bn") if has_shortcut else None))
        dsm_params = DsmParams(stem=conv("dsm.stem.conv"), stem_bn=bn("dsm.stem.bn"),
                               blocks=blocks4)

        blocks = []
        for b, (depth, dilation) in enumerate(zip(cfg.block_depths, cfg.tdnn_dilations), 1):
            layers = []
            for l in range(1, depth + 1):
                p = f"backbone.block{b}.layer{l:02d}"
                layers.append(DtdnnLayerParams(
                    fnn_weight=store[f"{p}.fnn.weight"], fnn_bias=store[f"{p}.fnn.bias"],
                    fnn_bn=bn(f"{p}.fnn_bn"),
                    tdnn_weight=store[f"{p}.tdnn.weight"], tdnn_bias=store[f"{p}.tdnn.bias"],
                    cam=CamParams(store[f"{p}.cam.w1"], store[f"{p}.cam.b1"],
                                  store[f"{p}.cam.w2"], store[f"{p}.cam.b2"],
                                  segment_length=cfg.segment_length),
                    dilation=dilation))
            blocks.append(layers)
        transitions = [TransitionParams(bn=bn(f"backbone.transition{b}.bn"),
                                        weight=store[f"backbone.transition{b}.linear.weight"],
                                        bias=store[f"backbone.transition{b}.linear.bias"])
                       for b in (1, 2)]

        head = HeadParams(bn1=bn("head.bn1"), weight=store["head.fc.weight"],
                          bias=store["head.fc.bias"], bn2=bn("head.bn2"))
        return cls(cfg, dsm_params, conv("backbone.stem.conv"), bn("backbone.stem.bn"),
                   blocks, transitions, bn("mfa.bn"), head)

    @classmethod
    def from_file(cls, path, cfg: ModelConfig | None = None) -> "Model":
        return cls.build(cfg or ModelConfig(), WeightStore.load(path))

    def forward_trace(self, feats: FbankFeatures) -> ForwardTrace:
        cfg = self.cfg
        dsm_out = dsm_forward(feats, self.dsm_params)
        pad = (cfg.stem_kernel - 1) // 2
        x = relu(batchnorm_infer(
            conv1d(dsm_out, self.stem.weight, self.stem.bias, padding=pad), self.stem_bn))
        d1 = dense_block(x, self.blocks[0])
        d2 = dense_block(transition(d1, self.transitions[0]), self.blocks[1])
        d3 = dense_block(transition(d2, self.transitions[1]), self.blocks[2])
        out_channels = cfg.block_out_channels
        assert (d1.shape[0], d2.shape[0], d3.shape[0]) == out_channels, \
            f"dense-block taps {d1.shape[0]}/{d2.shape[0]}/{d3.shape[0]} != {out_channels}"
        mfa_out = mfa_concat(d1, d2, d3, self.mfa_bn)
        stats = tstp(mfa_out)
        emb = embedding_head(stats, self.head)
        assert emb.shape == (cfg.embedding_dim,)
        return ForwardTrace(dsm_out=dsm_out, d1=d1, d2=d2, d3=d3, mfa_out=mfa_out,
                            stats=stats, embedding=emb)

    def embed(self, feats: FbankFeatures) -> np.ndarray:
        """Fixed-dimensional speaker embedding for one utterance."""
        return self.forward_trace(feats).embedding


def config_with_overrides(**kwargs) -> ModelConfig:
    """Default configuration with selected fields replaced."""
    return replace(ModelConfig(), **kwargs)


# -- flat structured-text configuration ----------------------------------------
#
# One `key = value` pair per line; '#' starts a comment. Integer tuples are
# comma-separated. DSM fields are flattened with a `dsm_` prefix.

_TUPLE_FIELDS = {"block_depths", "tdnn_dilations", "dsm_block_channels",
                 "dsm_freq_strides"}
_FLOAT_FIELDS = {"aam_margin", "aam_scale"}
_SCALAR_FIELDS = {"mel_bins", "stem_kernel", "fnn_hidden", "growth", "cam_bottleneck",
                  "segment_length", "tdnn_kernel", "embedding_dim", "dsm_stem_channels"}


def config_to_text(cfg: ModelConfig) -> str:
    """Serialize a configuration as flat ``key = value`` lines."""
    def fmt(value):
        return ", ".join(str(v) for v in value) if isinstance(value, tuple) else str(value)

    pairs = {name: getattr(cfg, name) for name in cfg.__dataclass_fields__ if name != "dsm"}
    pairs["dsm_stem_channels"] = cfg.dsm.stem_channels
    pairs["dsm_block_channels"] = cfg.dsm.block_channels
    pairs["dsm_freq_strides"] = cfg.dsm.freq_strides
    return "".join(f"{k} = {fmt(v)}\n" for k, v in pairs.items())


def config_from_text(text: str) -> ModelConfig:
    """Parse the flat ``key = value`` format back into a ModelConfig.

    Unknown keys and malformed values are rejected; omitted keys keep their
    defaults. Cross-checking against the pinned constants stays with
    ``ModelConfig.validate``.
    """
    fields: dict = {}
    dsm_fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        try:
            if key in _TUPLE_FIELDS:
                parsed = tuple(int(v.strip()) for v in value.split(","))
            elif key in _FLOAT_FIELDS:
                parsed = float(value)
            elif key in _SCALAR_FIELDS:
                parsed = int(value)
            else:
                raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        except ValueError as e:
            raise ConfigError(f"config line {lineno}: bad value for {key!r}: {value!r}") from e
        if key.startswith("dsm_"):
            dsm_fields[key[len("dsm_"):]] = parsed
        else:
            fields[key] = parsed
    try:
        if dsm_fields:
            fields["dsm"] = DsmConfig(**dsm_fields)
        return replace(ModelConfig(), **fields)
    except ValueError as e:
        raise ConfigError(f"config rejected: {e}") from e
