"""Shared test utilities: a WAV byte builder and independent reference
oracles (plain loops, float64) for the vectorized implementations."""

import math
import struct

import numpy as np


def make_wav(samples, *, sample_rate=16000, bits=16, channels=1, format_code=1,
             extra_chunk=None, data_override=None):
    """Build RIFF/WAVE bytes from int16 samples; knobs exist to craft
    deliberately invalid files."""
    samples = np.asarray(samples, dtype="<i2")
    payload = samples.tobytes() if data_override is None else data_override
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", format_code, channels, sample_rate,
                      sample_rate * block_align, block_align, bits)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if extra_chunk is not None:
        chunks += extra_chunk
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


def naive_conv2d(x, w, b, stride=(1, 1), padding=(0, 0), groups=1):
    x = np.asarray(x, np.float64)
    w = np.asarray(w, np.float64)
    b = np.asarray(b, np.float64)
    c_in, f_in, t_in = x.shape
    c_out, cpg, kf, kt = w.shape
    sf, st = stride
    pf, pt = padding
    f_out = (f_in + 2 * pf - kf) // sf + 1
    t_out = (t_in + 2 * pt - kt) // st + 1
    xp = np.zeros((c_in, f_in + 2 * pf, t_in + 2 * pt))
    xp[:, pf:pf + f_in, pt:pt + t_in] = x
    out = np.zeros((c_out, f_out, t_out))
    out_per_group = c_out // groups
    for o in range(c_out):
        gidx = o // out_per_group
        for fo in range(f_out):
            for to in range(t_out):
                acc = 0.0
                for i in range(cpg):
                    for u in range(kf):
                        for v in range(kt):
                            acc += w[o, i, u, v] * xp[gidx * cpg + i, fo * sf + u, to * st + v]
                out[o, fo, to] = acc + b[o]
    return out


def naive_conv1d(x, w, b, dilation=1, padding=0):
    x = np.asarray(x, np.float64)
    w = np.asarray(w, np.float64)
    b = np.asarray(b, np.float64)
    c_in, t_in = x.shape
    c_out, _, k = w.shape
    t_out = t_in + 2 * padding - dilation * (k - 1)
    xp = np.zeros((c_in, t_in + 2 * padding))
    xp[:, padding:padding + t_in] = x
    out = np.zeros((c_out, t_out))
    for o in range(c_out):
        for to in range(t_out):
            acc = 0.0
            for i in range(c_in):
                for u in range(k):
                    acc += w[o, i, u] * xp[i, to + u * dilation]
            out[o, to] = acc + b[o]
    return out


def cam_mask_oracle(x, w1, b1, w2, b2, segment_length):
    """Scalar-loop evaluation of the segment-context mask formula."""
    x = np.asarray(x, np.float64)
    h, t_len = x.shape
    bott, g = w1.shape[0], w2.shape[0]
    e_g = [sum(float(x[c, t]) for t in range(t_len)) / t_len for c in range(h)]
    mask = np.zeros((g, t_len))
    start = 0
    while start < t_len:
        end = min(start + segment_length, t_len)
        e_s = [sum(float(x[c, t]) for t in range(start, end)) / (end - start)
               for c in range(h)]
        v = [e_g[c] + e_s[c] for c in range(h)]
        z = [max(0.0, sum(float(w1[i, c]) * v[c] for c in range(h)) + float(b1[i]))
             for i in range(bott)]
        m = [1.0 / (1.0 + math.exp(-(sum(float(w2[o, i]) * z[i] for i in range(bott))
                                     + float(b2[o]))))
             for o in range(g)]
        for t in range(start, end):
            for o in range(g):
                mask[o, t] = m[o]
        start = end
    return mask


def _frr_far(targets, nontargets, threshold):
    frr = sum(1 for s in targets if s < threshold) / len(targets)
    far = sum(1 for s in nontargets if s >= threshold) / len(nontargets)
    return frr, far


def eer_oracle(targets, nontargets):
    """Exhaustive threshold sweep with linear interpolation at the
    crossing of the miss and false-alarm rates."""
    scores = sorted(set(targets) | set(nontargets))
    scores.append(math.nextafter(scores[-1], math.inf))
    prev = None
    for thr in scores:
        frr, far = _frr_far(targets, nontargets, thr)
        d = far - frr
        if d == 0.0:
            return frr, thr
        if d < 0.0:
            p_frr, p_far, p_thr = prev
            u = (p_far - p_frr) / ((p_far - p_frr) - d)
            return p_frr + u * (frr - p_frr), p_thr + u * (thr - p_thr)
        prev = (frr, far, thr)
    raise AssertionError("no crossing found")


def min_dcf_oracle(targets, nontargets, p_target=0.01, c_miss=1.0, c_fa=1.0):
    """Exhaustive sweep of every distinct score plus infinite sentinels."""
    candidates = [-math.inf] + sorted(set(targets) | set(nontargets)) + [math.inf]
    best = None
    for thr in candidates:
        p_miss, p_fa = _frr_far(targets, nontargets, thr)
        dcf = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
        if best is None or dcf < best[0]:
            best = (dcf, thr)
    norm = min(c_miss * p_target, c_fa * (1.0 - p_target))
    return (best[0] / norm if norm > 0 else best[0]), best[1]
