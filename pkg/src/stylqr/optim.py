"""Iterative generation of a stylized code image.

Each iteration the virtual reader judges every module of the current image;
only misread modules switch on their code-loss term, while style and content
losses act everywhere. Adam updates the raw RGB pixels, which are clamped to
[0, 1] and then have their function patterns restored.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import losses, qr
from .featnet import FeatureNet
from .imgio import LUMA, resize_area, to_rgb
from .reshuffle import reshuffled_code_target
from .sampler import make_kernel, ss_backward, ss_forward


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 0.001
    iterations: int = 10_000
    eta: float = 0.6
    threshold: float = losses.DEFAULT_THRESHOLD
    lambdas: tuple = (1e15, 1e7, 1e20)
    seed: int = 0
    sigma: float | None = None  # None -> module_px / 6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    snapshot_every: int = 0
    early_stop: bool = False
    early_stop_window: int = 200
    early_stop_tol: float = 1e-4
    stop_when_robust: bool = False  # end at the first iteration with no error modules
    init: str = "content"  # "content", "random" or "code"

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.init not in ("content", "random", "code"):
            raise ValueError(f"unknown init {self.init!r}")

    @property
    def weights(self) -> losses.LossWeights:
        return losses.LossWeights(*self.lambdas)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zeros_like(cls, image) -> "AdamState":
        return cls(np.zeros_like(image, dtype=np.float64), np.zeros_like(image, dtype=np.float64), 0)


def adam_step(image, grad, state: AdamState, cfg: OptimConfig) -> tuple[np.ndarray, AdamState]:
    image = np.asarray(image, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if image.shape != grad.shape or state.m.shape != image.shape:
        raise ValueError("image, gradient and Adam state shapes differ")
    t = state.step + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad * grad
    m_hat = m / (1 - cfg.beta1 ** t)
    v_hat = v / (1 - cfg.beta2 ** t)
    new = image - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return np.clip(new, 0.0, 1.0), AdamState(m, v, t)


def apply_function_patterns(image, grid: qr.ModuleGrid, spec) -> np.ndarray:
    """Hard-overlay the ideal colors of finder, alignment, timing and format modules."""
    a = spec.module_px
    fn = np.kron(grid.function_mask().astype(np.uint8), np.ones((a, a), dtype=np.uint8)).astype(bool)
    ideal = np.kron(grid.bits.astype(np.float64), np.ones((a, a)))
    out = np.array(image, dtype=np.float64, copy=True)
    out[:, fn] = ideal[fn]
    return out


@dataclass
class Evaluation:
    style: float
    content: float
    code: float
    total: float
    grad: np.ndarray
    F: np.ndarray
    read: np.ndarray
    K: np.ndarray
    code_grad_F: np.ndarray

    @property
    def error_modules(self) -> int:
        return int(self.K.sum())


class Objective:
    """Weighted style + content + gated code loss of an RGB image, with its pixel gradient."""

    def __init__(self, target_bits, geom, cfg: OptimConfig, net: FeatureNet | None = None,
                 style=None, content=None):
        self.target = np.asarray(target_bits, dtype=np.uint8)
        self.geom = geom
        self.cfg = cfg
        self.weights = cfg.weights
        self.kernel = make_kernel(geom.module_px, cfg.sigma)
        self.th = losses.thresholds_from_eta(cfg.threshold, cfg.eta)
        self.net = net
        self.style_grams = None
        self.content_feat = None
        if self.uses_features:
            if net is None or style is None or content is None:
                raise ValueError("style/content weights need a feature net and both images")
            taps_s, _ = net.forward(style)
            self.style_grams = {k: losses.gram(np.asarray(taps_s[k], dtype=np.float64))
                                for k in losses.STYLE_TAPS}
            taps_c, _ = net.forward(content)
            self.content_feat = taps_c[losses.CONTENT_TAP]

    @property
    def uses_features(self) -> bool:
        return self.weights.style > 0 or self.weights.content > 0

    def evaluate(self, image, K=None) -> Evaluation:
        """Loss and gradient at image; K (the activation map) is recomputed unless given."""
        image = np.asarray(image)
        gray = np.tensordot(LUMA, image, axes=1)
        F = ss_forward(gray, self.kernel, self.geom)
        read = losses.virtual_read(F, self.target, self.th)
        if K is None:
            K = losses.activation_map(read, self.target)
        l_code, dF = losses.code_loss(F, self.target, K)
        w = self.weights
        grad_gray = ss_backward(w.code * dF, self.kernel, self.geom)[0]
        grad = LUMA[:, None, None] * grad_gray[None]

        l_style = l_content = 0.0
        if self.uses_features:
            taps, cache = self.net.forward(image)
            l_style, g_style = losses.style_loss_from_grams(taps, self.style_grams)
            l_content, g_content = losses.content_loss(taps[losses.CONTENT_TAP], self.content_feat)
            # backprop at unit scale, rescale in float64 afterwards
            scale = max(w.style, w.content)
            tap_grads = {k: (w.style / scale) * g for k, g in g_style.items()}
            tap_grads[losses.CONTENT_TAP] = tap_grads[losses.CONTENT_TAP] + (w.content / scale) * g_content
            grad = grad + scale * self.net.backward(tap_grads, cache).astype(np.float64)
        total = losses.total_loss(l_style, l_content, l_code, w)
        return Evaluation(l_style, l_content, l_code, total, grad, F, read, K, dF)


@dataclass
class IterationTrace:
    iteration: list = field(default_factory=list)
    style: list = field(default_factory=list)
    content: list = field(default_factory=list)
    code: list = field(default_factory=list)
    total: list = field(default_factory=list)
    error_modules: list = field(default_factory=list)

    def __len__(self):
        return len(self.iteration)

    def append(self, it: int, ev: Evaluation):
        self.iteration.append(it)
        self.style.append(ev.style)
        self.content.append(ev.content)
        self.code.append(ev.code)
        self.total.append(ev.total)
        self.error_modules.append(ev.error_modules)

    def table(self) -> str:
        lines = ["iteration\tL_style\tL_content\tL_code\terror_modules"]
        for row in zip(self.iteration, self.style, self.content, self.code, self.error_modules):
            lines.append(f"{row[0]}\t{row[1]!r}\t{row[2]!r}\t{row[3]!r}\t{row[4]}")
        return "\n".join(lines) + "\n"


@dataclass
class StylizeResult:
    image: np.ndarray
    trace: IterationTrace
    target: qr.ModuleGrid
    final: Evaluation


def initial_image(content_rgb, target: qr.ModuleGrid, spec, cfg: OptimConfig) -> np.ndarray:
    if cfg.init == "content":
        img = content_rgb.copy()
    elif cfg.init == "random":
        img = np.random.default_rng(cfg.seed).random(content_rgb.shape)
    else:
        img = np.repeat(qr.render(target, spec), 3, axis=0)
    return apply_function_patterns(img, target, spec)


def stylize(content, style, message: str, spec: qr.QrSpec, cfg: OptimConfig,
            net: FeatureNet | None = None, callback=None) -> StylizeResult:
    """Optimize an image that carries message and resembles content in the manner of style.

    callback(iteration, image, evaluation) is invoked once per iteration with
    the image the evaluation was computed on, before the update.
    """
    side = spec.side_px
    content_rgb = resize_area(to_rgb(content), side, side)
    style_rgb = resize_area(to_rgb(style), side, side)
    target, _, _ = reshuffled_code_target(message, spec, content_rgb)

    w = cfg.weights
    if net is None and (w.style > 0 or w.content > 0):
        net = FeatureNet(seed=cfg.seed)
    objective = Objective(target.bits, spec, cfg, net, style_rgb, content_rgb)

    image = initial_image(content_rgb, target, spec, cfg)
    state = AdamState.zeros_like(image)
    trace = IterationTrace()
    clean_streak = 0
    for it in range(cfg.iterations):
        ev = objective.evaluate(image)
        trace.append(it, ev)
        if callback is not None:
            callback(it, image, ev)
        if cfg.stop_when_robust and ev.error_modules == 0:
            break
        if cfg.early_stop:
            clean_streak = clean_streak + 1 if ev.error_modules == 0 else 0
            if clean_streak >= cfg.early_stop_window:
                window = trace.total[-cfg.early_stop_window:]
                ref = max(abs(window[0]), 1e-300)
                if abs(window[-1] - window[0]) / ref < cfg.early_stop_tol:
                    break
        image, state = adam_step(image, ev.grad, state, cfg)
        image = apply_function_patterns(image, target, spec)
    final = objective.evaluate(image)
    return StylizeResult(image, trace, target, final)
