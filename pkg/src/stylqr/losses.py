"""Style, content and code losses, the virtual reader and the activation map.

Pixels and sampled values live in [0, 1]; reader thresholds live in
[0, 255] and every comparison scales the sampled value by 255.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STYLE_TAPS = ("relu1_2", "relu2_2", "relu3_3", "relu4_3")
CONTENT_TAP = "relu3_3"
DEFAULT_THRESHOLD = 127.5


@dataclass(frozen=True)
class LossWeights:
    style: float = 1e15
    content: float = 1e7
    code: float = 1e20

    def __post_init__(self):
        if min(self.style, self.content, self.code) < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.style == self.content == self.code == 0:
            raise ValueError("at least one loss weight must be nonzero")


@dataclass(frozen=True)
class ReaderThresholds:
    T: float
    eta: float
    T_b: float
    T_w: float


def thresholds_from_eta(T: float = DEFAULT_THRESHOLD, eta: float = 0.6) -> ReaderThresholds:
    """Virtual thresholds at relative distance eta from T toward 0 and 255."""
    if not 0 < T < 255:
        raise ValueError(f"threshold must lie in (0, 255), got {T}")
    if not 0 <= eta <= 1:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    return ReaderThresholds(T, eta, T * (1 - eta), T + eta * (255 - T))


def virtual_read(F, target, th: ReaderThresholds) -> np.ndarray:
    """Binary read judged per target color: black modules against T_b, white against T_w."""
    v = 255.0 * np.asarray(F, dtype=np.float64)
    target = np.asarray(target)
    return np.where(target == 0, v >= th.T_b, v >= th.T_w).astype(np.uint8)


def activation_map(read, target) -> np.ndarray:
    read = np.asarray(read, dtype=np.uint8)
    target = np.asarray(target, dtype=np.uint8)
    if read.shape != target.shape:
        raise ValueError(f"shape mismatch {read.shape} vs {target.shape}")
    return read ^ target


def code_loss(F, target, K) -> tuple[float, np.ndarray]:
    """Sum of gated squared module errors and its gradient with respect to F."""
    F = np.asarray(F, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    K = np.asarray(K, dtype=np.float64)
    if not F.shape == target.shape == K.shape:
        raise ValueError("F, target and K must share a shape")
    diff = target - F
    return float(np.sum(K * diff * diff)), -2.0 * K * diff


def gram(feature) -> np.ndarray:
    f = np.asarray(feature)
    c = f.shape[0]
    flat = f.reshape(c, -1)
    return flat @ flat.T


def _gram_term(feature, target_gram):
    c, h, w = feature.shape
    norm = float(c * h * w)
    flat = feature.reshape(c, -1).astype(np.float64)
    diff = flat @ flat.T - target_gram
    loss = float(np.sum(diff * diff)) / norm
    # d/dF ||F F^T - G||^2 = 4 (F F^T - G) F for symmetric diff
    grad = (4.0 / norm) * (diff @ flat)
    return loss, grad.reshape(c, h, w)


def style_loss(taps_q: dict, taps_s: dict, layers=STYLE_TAPS) -> tuple[float, dict]:
    grams = {name: gram(np.asarray(taps_s[name], dtype=np.float64)) for name in layers}
    return style_loss_from_grams(taps_q, grams, layers)


def style_loss_from_grams(taps_q: dict, grams_s: dict, layers=STYLE_TAPS) -> tuple[float, dict]:
    total = 0.0
    grads = {}
    for name in layers:
        if name not in taps_q or name not in grams_s:
            raise KeyError(f"style tap {name!r} missing")
        fq = np.asarray(taps_q[name])
        if grams_s[name].shape != (fq.shape[0], fq.shape[0]):
            raise ValueError(f"tap {name!r}: channel count mismatch")
        loss, g = _gram_term(fq, grams_s[name])
        total += loss
        grads[name] = g
    return total, grads


def content_loss(tap_q, tap_c) -> tuple[float, np.ndarray]:
    fq = np.asarray(tap_q, dtype=np.float64)
    fc = np.asarray(tap_c, dtype=np.float64)
    if fq.shape != fc.shape:
        raise ValueError(f"content tap shape mismatch {fq.shape} vs {fc.shape}")
    diff = fq - fc
    norm = float(diff.size)
    return float(np.sum(diff * diff)) / norm, (2.0 / norm) * diff


def total_loss(style: float, content: float, code: float, weights: LossWeights) -> float:
    return weights.style * style + weights.content * content + weights.code * code
