"""Multi-scale aggregation, statistics pooling, the embedding head, and the
end-to-end wav-bytes -> embedding pipeline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import compute_fbank, read_wav
from .errors import ExtractionError, LightCamError
from .tensor_ops import BatchNormParams, as_tensor, batchnorm_infer, linear

VARIANCE_FLOOR = 1e-10


@dataclass
class Embedding:
    vector: np.ndarray
    utterance: str = ""

    def __post_init__(self):
        self.vector = as_tensor(self.vector)
        if self.vector.ndim != 1 or not np.isfinite(self.vector).all():
            raise ValueError("Embedding: vector must be 1-D and finite")

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def mfa_concat(d1, d2, d3, bn: BatchNormParams) -> np.ndarray:
    """Channel-axis concatenation of the three dense-block outputs (in block
    order; the position of each input matters) followed by batch norm."""
    d1, d2, d3 = as_tensor(d1), as_tensor(d2), as_tensor(d3)
    for name, d in (("d1", d1), ("d2", d2), ("d3", d3)):
        if d.ndim != 2:
            raise ValueError(f"mfa_concat: {name} must be (C, T), got {d.shape}")
    if not (d1.shape[1] == d2.shape[1] == d3.shape[1]):
        raise ValueError(
            f"mfa_concat: time extents differ: {d1.shape[1]}, {d2.shape[1]}, {d3.shape[1]}")
    out = np.concatenate([d1, d2, d3], axis=0)
    if out.shape[0] != bn.num_channels:
        raise ValueError(
            f"mfa_concat: {out.shape[0]} concatenated channels, norm expects {bn.num_channels}")
    return batchnorm_infer(out, bn)


def tstp(d) -> np.ndarray:
    """Temporal statistics pooling: per-channel mean and population standard
    deviation over time, concatenated to a 2C vector. A 1e-10 variance floor
    keeps constant channels finite."""
    d = as_tensor(d)
    if d.ndim != 2 or d.shape[1] < 1:
        raise ValueError(f"tstp: expected (C, T >= 1), got {d.shape}")
    x = d.astype(np.float64)
    mean = x.mean(axis=1)
    var = np.maximum((x * x).mean(axis=1) - mean * mean, 0.0)
    std = np.sqrt(var + VARIANCE_FLOOR)
    return np.concatenate([mean, std]).astype(np.float32)


@dataclass
class HeadParams:
    bn1: BatchNormParams
    weight: np.ndarray
    bias: np.ndarray
    bn2: BatchNormParams


def embedding_head(stats, p: HeadParams) -> np.ndarray:
    """BN -> fully connected -> BN over the pooled statistics vector."""
    stats = as_tensor(stats)
    if stats.ndim != 1:
        raise ValueError(f"embedding_head: expected a vector, got {stats.shape}")
    if stats.shape[0] != p.bn1.num_channels:
        raise ValueError(
            f"embedding_head: {stats.shape[0]} statistics, head expects {p.bn1.num_channels}")
    return batchnorm_infer(linear(batchnorm_infer(stats, p.bn1), p.weight, p.bias), p.bn2)


def extract_embedding(data: bytes, model, utterance: str = "<utterance>") -> Embedding:
    """Decode WAV bytes, compute features, and run the full forward pass.

    Deterministic: identical bytes and weights give a bit-identical vector.
    Any upstream rejection is re-raised as ExtractionError carrying the
    utterance id.
    """
    try:
        feats = compute_fbank(read_wav(data))
        vector = model.embed(feats)
    except (LightCamError, ValueError) as e:
        raise ExtractionError(utterance, e) from e
    return Embedding(vector=vector, utterance=utterance)


def write_embeddings(path, embeddings) -> None:
    """One utterance per line: ``<utt-id>\\t<dims space-separated decimals>``
    with 9 significant digits."""
    with open(path, "w", encoding="utf-8") as f:
        for emb in embeddings:
            f.write(format_embedding_line(emb) + "\n")


def format_embedding_line(emb: Embedding) -> str:
    return emb.utterance + "\t" + " ".join(f"{v:.8e}" for v in emb.vector)


def read_embeddings(path) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                utt, values = line.split("\t", 1)
                vec = np.array([float(v) for v in values.split()], dtype=np.float32)
            except ValueError as e:
                raise LightCamError(f"{path}:{lineno}: malformed embedding line") from e
            if utt in out:
                raise LightCamError(f"{path}:{lineno}: duplicate utterance id {utt!r}")
            out[utt] = vec
    return out
