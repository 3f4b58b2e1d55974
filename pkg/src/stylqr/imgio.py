"""PNG I/O, gray conversion and resampling.

Images are float arrays of shape (channels, height, width) with values in
[0, 1]; channels is 1 or 3.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

LUMA = np.array([0.299, 0.587, 0.114])


class ImageIOError(Exception):
    pass


def as_chw(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise ValueError(f"expected a (1|3, H, W) image, got shape {img.shape}")
    return img


def load_png(path) -> np.ndarray:
    path = Path(path)
    try:
        im = Image.open(path)
        im.load()
    except (OSError, ValueError) as exc:
        raise ImageIOError(f"cannot read {path}: {exc}") from exc
    if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
        raise ImageIOError(f"{path}: unsupported bit depth (mode {im.mode})")
    if im.mode in ("RGBA", "LA") or (im.mode == "P" and "transparency" in im.info):
        rgba = im.convert("RGBA")
        white = Image.new("RGBA", rgba.size, (255, 255, 255, 255))
        im = Image.alpha_composite(white, rgba).convert("RGB")
    if im.mode in ("1", "L"):
        arr = np.asarray(im.convert("L"), dtype=np.float64)[None]
    else:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64).transpose(2, 0, 1)
    return np.clip(arr / 255.0, 0.0, 1.0)


def to_uint8(img) -> np.ndarray:
    img = as_chw(img)
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_png(path, img) -> None:
    q = to_uint8(img)
    if q.shape[0] == 1:
        pil = Image.fromarray(q[0], mode="L")
    else:
        pil = Image.fromarray(q.transpose(1, 2, 0), mode="RGB")
    try:
        pil.save(Path(path), format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc


def rgb_to_gray(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ValueError(f"rgb_to_gray needs 3 channels, got shape {img.shape}")
    return np.tensordot(LUMA, img, axes=1)[None]


def to_gray(img) -> np.ndarray:
    """(1, H, W) luma of a 1- or 3-channel image."""
    img = as_chw(img)
    return img if img.shape[0] == 1 else rgb_to_gray(img)


def to_rgb(img) -> np.ndarray:
    img = as_chw(img)
    return img if img.shape[0] == 3 else np.repeat(img, 3, axis=0)


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row i averages input cells overlapping [i, i+1) * n_in / n_out."""
    scale = n_in / n_out
    mat = np.zeros((n_out, n_in))
    for i in range(n_out):
        lo, hi = i * scale, (i + 1) * scale
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_in)):
            mat[i, j] = min(hi, j + 1) - max(lo, j)
    return mat / mat.sum(axis=1, keepdims=True)


def _bilinear_matrix(n_in: int, n_out: int) -> np.ndarray:
    # half-pixel centers, edge clamped
    mat = np.zeros((n_out, n_in))
    scale = n_in / n_out
    for i in range(n_out):
        x = (i + 0.5) * scale - 0.5
        x = min(max(x, 0.0), n_in - 1)
        j0 = int(np.floor(x))
        j1 = min(j0 + 1, n_in - 1)
        t = x - j0
        mat[i, j0] += 1 - t
        mat[i, j1] += t
    return mat


def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    if n_out == n_in:
        return np.eye(n_in)
    if n_out < n_in:
        return _area_matrix(n_in, n_out)
    return _bilinear_matrix(n_in, n_out)


def resize_area(img, h: int, w: int) -> np.ndarray:
    """Area-average when shrinking an axis, bilinear when enlarging it."""
    if h < 1 or w < 1:
        raise ValueError("target size must be at least 1x1")
    img = as_chw(img)
    _, h0, w0 = img.shape
    if (h0, w0) == (h, w):
        return img.copy()
    rows = _resample_matrix(h0, h)
    cols = _resample_matrix(w0, w)
    return np.matmul(np.matmul(rows, img), cols.T)
