"""WAV decoding and 80-bin log-mel filterbank features.

Frozen frontend conventions (changing any of these changes the features
bit-for-bit, so they are constants rather than knobs):

* input: 16 kHz, 16-bit, mono PCM-WAV; samples mapped to s / 32768
* framing: 25 ms window (400 samples) every 10 ms (160 samples),
  trailing partial window dropped
* per-frame pre-emphasis 0.97 (first sample scaled by 1 - 0.97)
* Hamming window, 512-point magnitude-squared FFT
* 80 triangular mel filters spanning 20 Hz - 7600 Hz on the HTK mel
  scale 2595 * log10(1 + f / 700)
* natural log with floor log(1e-10), then per-utterance mean
  subtraction over time in each bin
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import UtteranceTooShortError, WavReadError

SAMPLE_RATE = 16000
FRAME_LENGTH = 400   # 25 ms
FRAME_SHIFT = 160    # 10 ms
NUM_FILTERS = 80
FFT_SIZE = 512
PREEMPHASIS = 0.97
MEL_LOW_HZ = 20.0
MEL_HIGH_HZ = 7600.0
LOG_FLOOR = 1e-10


@dataclass
class Waveform:
    """Mono PCM audio, samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError("Waveform: samples must be a non-empty 1-D sequence")
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"Waveform: sample_rate must be {SAMPLE_RATE}")
        if not np.isfinite(self.samples).all() or float(np.abs(self.samples).max()) > 1.0:
            raise ValueError("Waveform: samples must be finite and within [-1, 1]")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class FbankFeatures:
    """Log-mel energies, one row per frame."""

    frames: np.ndarray
    frame_shift_ms: int = field(default=10)
    frame_length_ms: int = field(default=25)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2 or self.frames.shape[1] != NUM_FILTERS or self.frames.shape[0] < 1:
            raise ValueError(f"FbankFeatures: frames must be (T >= 1, {NUM_FILTERS})")
        if not np.isfinite(self.frames).all():
            raise ValueError("FbankFeatures: non-finite values")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def read_wav(data: bytes) -> Waveform:
    """Decode a canonical RIFF/WAVE container holding 16 kHz/16-bit/mono PCM.

    Raises WavReadError with a distinct ``reason`` for each rejection:
    bad-magic, truncated-chunk, missing-fmt-chunk, unsupported-format-code,
    unsupported-channel-count, unsupported-sample-rate,
    unsupported-bit-depth, missing-data-chunk, truncated-data, empty-data.
    """
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavReadError("bad-magic", "not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos:pos + 4]
        (size,) = struct.unpack("<I", data[pos + 4:pos + 8])
        pos += 8
        if chunk_id == b"data":
            if pos + size > len(data):
                raise WavReadError("truncated-data",
                                   f"data chunk declares {size} bytes, "
                                   f"{len(data) - pos} available")
            payload = data[pos:pos + size]
        elif chunk_id == b"fmt ":
            if size < 16 or pos + size > len(data):
                raise WavReadError("truncated-chunk", "fmt chunk shorter than 16 bytes")
            fmt = struct.unpack("<HHIIHH", data[pos:pos + 16])
        elif pos + size > len(data):
            raise WavReadError("truncated-chunk",
                               f"chunk {chunk_id!r} overruns the file")
        pos += size + (size & 1)  # chunks are word-aligned

    if fmt is None:
        raise WavReadError("missing-fmt-chunk")
    format_code, channels, rate, _byte_rate, _block_align, bits = fmt
    if format_code != 1:
        raise WavReadError("unsupported-format-code", f"PCM (1) required, got {format_code}")
    if channels != 1:
        raise WavReadError("unsupported-channel-count", f"mono required, got {channels}")
    if rate != SAMPLE_RATE:
        raise WavReadError("unsupported-sample-rate", f"{SAMPLE_RATE} Hz required, got {rate}")
    if bits != 16:
        raise WavReadError("unsupported-bit-depth", f"16-bit required, got {bits}")
    if payload is None:
        raise WavReadError("missing-data-chunk")
    if len(payload) % 2 != 0:
        raise WavReadError("truncated-data", "odd data chunk size for 16-bit samples")
    if len(payload) == 0:
        raise WavReadError("empty-data")

    samples = np.frombuffer(payload, dtype="<i2").astype(np.float32) / 32768.0
    return Waveform(samples=samples)


def frame_count(n_samples: int) -> int:
    """Number of full 400-sample windows at a 160-sample hop."""
    if n_samples < FRAME_LENGTH:
        raise UtteranceTooShortError(
            f"need at least {FRAME_LENGTH} samples (25 ms), got {n_samples}")
    return (n_samples - FRAME_LENGTH) // FRAME_SHIFT + 1


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies() -> np.ndarray:
    """Center frequency in Hz of each of the 80 triangular filters."""
    return _mel_boundaries()[1:-1]


@lru_cache(maxsize=1)
def _mel_boundaries_cached() -> tuple:
    pts = mel_to_hz(np.linspace(hz_to_mel(MEL_LOW_HZ), hz_to_mel(MEL_HIGH_HZ),
                                NUM_FILTERS + 2))
    return tuple(pts.tolist())


def _mel_boundaries() -> np.ndarray:
    return np.array(_mel_boundaries_cached(), dtype=np.float64)


@lru_cache(maxsize=1)
def _mel_filterbank() -> np.ndarray:
    """(80, 257) triangular filter weights on the rfft bin grid."""
    pts = _mel_boundaries()
    bins_hz = np.arange(FFT_SIZE // 2 + 1, dtype=np.float64) * (SAMPLE_RATE / FFT_SIZE)
    fb = np.zeros((NUM_FILTERS, bins_hz.size), dtype=np.float64)
    for m in range(NUM_FILTERS):
        lo, center, hi = pts[m], pts[m + 1], pts[m + 2]
        rising = (bins_hz - lo) / (center - lo)
        falling = (hi - bins_hz) / (hi - center)
        fb[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def compute_fbank(w: Waveform, mean_normalize: bool = True) -> FbankFeatures:
    """80-dimensional log-mel features, 25 ms window every 10 ms.

    ``mean_normalize=False`` skips the per-utterance mean subtraction
    (useful for inspecting raw log energies).
    """
    x = w.samples.astype(np.float64)
    n_frames = frame_count(x.size)
    frames = sliding_window_view(x, FRAME_LENGTH)[::FRAME_SHIFT].copy()
    assert frames.shape == (n_frames, FRAME_LENGTH)

    frames[:, 1:] -= PREEMPHASIS * frames[:, :-1]
    frames[:, 0] -= PREEMPHASIS * frames[:, 0]
    spec = np.fft.rfft(frames * np.hamming(FRAME_LENGTH), n=FFT_SIZE, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    logmel = np.log(np.maximum(power @ _mel_filterbank().T, LOG_FLOOR))
    if mean_normalize:
        logmel -= logmel.mean(axis=0)
    return FbankFeatures(frames=logmel.astype(np.float32))


def format_frames_text(f: FbankFeatures) -> str:
    """Debug dump: one frame per line, 80 space-separated decimals."""
    return "\n".join(" ".join(f"{v:.8e}" for v in row) for row in f.frames) + "\n"
