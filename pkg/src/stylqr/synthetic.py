"""Procedural stand-ins for content and style photographs."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter


def content_image(size: int, seed: int = 0) -> np.ndarray:
    """Smooth colored blobs over a gradient: large regions, soft edges."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.empty((3, size, size))
    base = rng.uniform(0.3, 0.7, 3)
    tilt = rng.uniform(-0.2, 0.2, (3, 2))
    for c in range(3):
        img[c] = base[c] + tilt[c, 0] * (yy - 0.5) + tilt[c, 1] * (xx - 0.5)
    for _ in range(4):
        cy, cx = rng.uniform(0.2, 0.8, 2)
        r = rng.uniform(0.1, 0.3)
        color = rng.uniform(0.0, 1.0, 3)
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * r * r))
        img = img * (1 - blob) + color[:, None, None] * blob
    return np.clip(img, 0.0, 1.0)


def style_image(size: int, seed: int = 0) -> np.ndarray:
    """Oriented colored strokes: a high-frequency texture."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(0.15, 0.35)
    phase = xx * np.cos(theta) + yy * np.sin(theta)
    stripes = 0.5 + 0.5 * np.sin(freq * phase + 2.0 * gaussian_filter(rng.standard_normal((size, size)), 4) * 4)
    palette = rng.uniform(0.0, 1.0, (2, 3))
    img = palette[0][:, None, None] * stripes + palette[1][:, None, None] * (1 - stripes)
    noise = gaussian_filter(rng.standard_normal((3, size, size)), (0, 1, 1)) * 0.1
    return np.clip(img + noise, 0.0, 1.0)
