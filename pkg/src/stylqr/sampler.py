"""Sampling-simulation layer: module-aligned Gaussian pooling and its adjoint.

A reader samples near each module's center; the layer models that as an
a x a Gaussian-weighted average per module (kernel size a, stride a, no
padding), giving one expected sampled gray value per module.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianKernel:
    size: int
    sigma: float
    weights: np.ndarray


def make_kernel(a: int, sigma: float | None = None) -> GaussianKernel:
    """Gaussian weights on cell centers offset from the module center, summing to 1.

    sigma defaults to a / 6 so that +-3 sigma spans the module.
    """
    if a < 1:
        raise ValueError(f"kernel size must be positive, got {a}")
    if sigma is None:
        sigma = a / 6.0
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    c = np.arange(a) - (a - 1) / 2.0
    i, j = np.meshgrid(c, c, indexing="ij")
    w = np.exp(-(i ** 2 + j ** 2) / (2.0 * sigma ** 2)) / (2.0 * np.pi * sigma ** 2)
    w = w / w.sum()
    w.setflags(write=False)
    return GaussianKernel(a, float(sigma), w)


def _gray2d(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[0] != 1:
            raise ValueError(f"sampling layer expects one channel, got {img.shape[0]}")
        img = img[0]
    return img


def _check(shape, kernel: GaussianKernel, geom):
    m, a = geom.modules_per_side, geom.module_px
    if kernel.size != a:
        raise ValueError(f"kernel size {kernel.size} != module size {a}")
    if shape != (m * a, m * a):
        raise ValueError(f"image shape {shape} != ({m * a}, {m * a})")


def ss_forward(image_gray, kernel: GaussianKernel, geom) -> np.ndarray:
    """m x m map of Gaussian-weighted module averages."""
    img = _gray2d(image_gray)
    _check(img.shape, kernel, geom)
    m, a = geom.modules_per_side, geom.module_px
    blocks = img.reshape(m, a, m, a)
    return np.einsum("iajb,ab->ij", blocks, kernel.weights)


def ss_backward(grad_out, kernel: GaussianKernel, geom) -> np.ndarray:
    """Adjoint of ss_forward: spreads each module's gradient by the kernel weights."""
    g = np.asarray(grad_out, dtype=np.float64)
    m = geom.modules_per_side
    if g.shape != (m, m):
        raise ValueError(f"gradient shape {g.shape} != ({m}, {m})")
    if kernel.size != geom.module_px:
        raise ValueError(f"kernel size {kernel.size} != module size {geom.module_px}")
    return np.kron(g, kernel.weights)[None]
