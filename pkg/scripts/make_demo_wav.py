#!/usr/bin/env python3
"""Regenerate the bundled deterministic 3-second demo WAV
(tests/data/demo_3s.wav): a fixed chord of sines plus seeded noise,
16 kHz / 16-bit / mono PCM."""

import pathlib
import struct

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "demo_3s.wav"
SAMPLE_RATE = 16000
SECONDS = 3.0


def synthesize() -> np.ndarray:
    n = int(SAMPLE_RATE * SECONDS)
    t = np.arange(n) / SAMPLE_RATE
    rng = np.random.default_rng(20240901)
    signal = (0.35 * np.sin(2 * np.pi * 210.0 * t)
              + 0.20 * np.sin(2 * np.pi * 840.0 * t + 0.7)
              + 0.10 * np.sin(2 * np.pi * 2550.0 * t + 1.9)
              + 0.08 * rng.standard_normal(n))
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * 1.5 * t) ** 2
    return np.clip(signal * envelope, -0.95, 0.95)


def write_wav(path: pathlib.Path, samples: np.ndarray) -> None:
    payload = (samples * 32767.0).astype("<i2").tobytes()
    fmt = struct.pack("<HHIIHH", 1, 1, SAMPLE_RATE, SAMPLE_RATE * 2, 2, 16)
    body = (b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(payload)) + payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"RIFF" + struct.pack("<I", 4 + len(body)) + b"WAVE" + body)


if __name__ == "__main__":
    write_wav(OUT, synthesize())
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")
