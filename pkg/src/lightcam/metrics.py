"""Back-end scoring and detection metrics: cosine similarity, EER, MinDCF,
and the additive angular margin softmax forward loss.

Threshold convention used throughout: a trial scoring exactly at the
threshold counts as accepted (score >= threshold accepts), so the miss
rate at threshold t is the fraction of target scores strictly below t and
the false-alarm rate is the fraction of non-target scores >= t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LightCamError


@dataclass
class TrialScores:
    """Similarity scores of target (same-speaker) and non-target trials."""

    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    def __post_init__(self):
        self.target_scores = np.asarray(self.target_scores, dtype=np.float64)
        self.nontarget_scores = np.asarray(self.nontarget_scores, dtype=np.float64)
        for name, s in (("target", self.target_scores), ("nontarget", self.nontarget_scores)):
            if s.ndim != 1:
                raise ValueError(f"TrialScores: {name} scores must be 1-D")
            if s.size and not np.isfinite(s).all():
                raise ValueError(f"TrialScores: non-finite {name} score")


def cosine_score(a, b) -> float:
    """Cosine similarity of two embedding vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"cosine_score: dimension mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine_score: zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _miss_fa_rates(t: TrialScores, thresholds: np.ndarray):
    """P_miss (fraction of targets < t) and P_fa (fraction of non-targets
    >= t) at each threshold."""
    tgt = np.sort(t.target_scores)
    non = np.sort(t.nontarget_scores)
    p_miss = np.searchsorted(tgt, thresholds, side="left") / tgt.size
    p_fa = 1.0 - np.searchsorted(non, thresholds, side="left") / non.size
    return p_miss, p_fa


def _require_scores(t: TrialScores) -> None:
    if t.target_scores.size == 0 or t.nontarget_scores.size == 0:
        raise LightCamError("metrics: need at least one target and one non-target score")


def compute_eer(t: TrialScores) -> tuple[float, float]:
    """Equal error rate and the threshold where FRR and FAR cross.

    Sweeps every distinct score (plus a sentinel just past the maximum);
    when the two rates do not meet exactly at a sweep point, both are
    interpolated linearly between the adjacent points.
    """
    _require_scores(t)
    scores = np.unique(np.concatenate([t.target_scores, t.nontarget_scores]))
    thresholds = np.append(scores, np.nextafter(scores[-1], np.inf))
    frr, far = _miss_fa_rates(t, thresholds)
    diff = far - frr  # non-increasing in the threshold; starts at +1
    i = int(np.flatnonzero(diff <= 0)[0])
    if diff[i] == 0.0:
        return float(frr[i]), float(thresholds[i])
    # Crossing lies between points i-1 and i (diff[i-1] > 0 > diff[i]).
    u = diff[i - 1] / (diff[i - 1] - diff[i])
    eer = frr[i - 1] + u * (frr[i] - frr[i - 1])
    threshold = thresholds[i - 1] + u * (thresholds[i] - thresholds[i - 1])
    return float(eer), float(threshold)


def compute_min_dcf(t: TrialScores, p_target: float = 0.01,
                    c_miss: float = 1.0, c_fa: float = 1.0) -> tuple[float, float]:
    """Minimum detection cost over all thresholds, normalized by
    min(c_miss * p_target, c_fa * (1 - p_target)). Ties pick the lowest
    threshold. With a degenerate normalizer (0) the raw minimum is returned.
    """
    _require_scores(t)
    scores = np.unique(np.concatenate([t.target_scores, t.nontarget_scores]))
    thresholds = np.concatenate([[-np.inf], scores, [np.inf]])
    p_miss, p_fa = _miss_fa_rates(t, thresholds)
    dcf = c_miss * p_target * p_miss + c_fa * (1.0 - p_target) * p_fa
    i = int(np.argmin(dcf))
    norm = min(c_miss * p_target, c_fa * (1.0 - p_target))
    min_dcf = dcf[i] / norm if norm > 0 else dcf[i]
    return float(min_dcf), float(thresholds[i])


@dataclass
class AamConfig:
    """Additive angular margin softmax settings (margin 0.2, scale 32)."""

    class_weights: np.ndarray
    margin: float = 0.2
    scale: float = 32.0

    def __post_init__(self):
        self.class_weights = np.asarray(self.class_weights, dtype=np.float64)
        if self.class_weights.ndim != 2:
            raise ValueError("AamConfig: class_weights must be (num_classes, dim)")
        if not 0.0 <= self.margin < math.pi / 2:
            raise ValueError("AamConfig: margin must be in [0, pi/2)")
        if self.scale <= 0:
            raise ValueError("AamConfig: scale must be > 0")

    @property
    def num_classes(self) -> int:
        return self.class_weights.shape[0]


def aam_softmax_loss(embedding, label: int, cfg: AamConfig) -> float:
    """Forward value of the additive angular margin softmax loss.

    The embedding and every class weight are length-normalized; the true
    class logit cos(theta) becomes cos(theta + m), falling back to
    cos(theta) - m*sin(theta) when theta + m exceeds pi. No gradients.
    """
    e = np.asarray(embedding.vector if hasattr(embedding, "vector") else embedding,
                   dtype=np.float64).ravel()
    if not 0 <= label < cfg.num_classes:
        raise ValueError(f"aam_softmax_loss: label {label} out of range "
                         f"[0, {cfg.num_classes})")
    if e.shape[0] != cfg.class_weights.shape[1]:
        raise ValueError(f"aam_softmax_loss: embedding dim {e.shape[0]} != "
                         f"class weight dim {cfg.class_weights.shape[1]}")
    norm_e = np.linalg.norm(e)
    norms_w = np.linalg.norm(cfg.class_weights, axis=1)
    if norm_e == 0.0 or (norms_w == 0.0).any():
        raise ValueError("aam_softmax_loss: zero-norm vector")

    cos = np.clip((cfg.class_weights / norms_w[:, None]) @ (e / norm_e), -1.0, 1.0)
    theta = math.acos(cos[label])
    if theta + cfg.margin <= math.pi:
        target_logit = math.cos(theta + cfg.margin)
    else:
        target_logit = cos[label] - cfg.margin * math.sin(theta)
    logits = cos.copy()
    logits[label] = target_logit
    z = cfg.scale * logits
    zmax = z.max()
    return float(zmax + math.log(np.exp(z - zmax).sum()) - z[label])


# -- trial / score text files -------------------------------------------------

def read_trials(path) -> list[tuple[str, str, bool]]:
    """``<enroll-id> <test-id> <target|nontarget>`` per line."""
    trials = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3 or parts[2] not in ("target", "nontarget"):
                raise LightCamError(f"{path}:{lineno}: malformed trial line {line.rstrip()!r}")
            trials.append((parts[0], parts[1], parts[2] == "target"))
    return trials


def write_scores(path, rows) -> None:
    """``<enroll-id> <test-id> <decimal score>`` per line."""
    with open(path, "w", encoding="utf-8") as f:
        for enroll, test, score in rows:
            f.write(f"{enroll} {test} {score:.6f}\n")


def read_scores(path) -> dict[tuple[str, str], float]:
    scores: dict[tuple[str, str], float] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            parts = line.split()
            if not parts:
                continue
            try:
                enroll, test, value = parts[0], parts[1], float(parts[2])
            except (IndexError, ValueError) as e:
                raise LightCamError(f"{path}:{lineno}: malformed score line") from e
            scores[(enroll, test)] = value
    return scores


def pair_trial_scores(trials, scores) -> TrialScores:
    """Join trial labels with per-pair scores into a TrialScores split."""
    target, nontarget = [], []
    for enroll, test, is_target in trials:
        if (enroll, test) not in scores:
            raise LightCamError(f"no score for trial pair {enroll} {test}")
        (target if is_target else nontarget).append(scores[(enroll, test)])
    return TrialScores(target_scores=np.array(target, dtype=np.float64),
                       nontarget_scores=np.array(nontarget, dtype=np.float64))
