"""Fixed-weight VGG-style feature extractor with an exact reverse pass.

The default chain stops at relu4_3 (10 conv layers, 3 pools) and is filled
with seeded He-normal weights. Real pretrained weights can be dropped in
through a manifest + raw float32 blob (see load_weights).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_WIDTHS = (16, 32, 64, 128)
_BLOCK_DEPTHS = (2, 2, 3, 3)


class WeightsError(Exception):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str  # "conv", "relu", "maxpool", "avgpool"
    name: str
    in_channels: int
    out_channels: int
    tap: str | None = None


def vgg_chain(widths=DEFAULT_WIDTHS, pool: str = "max") -> list[LayerSpec]:
    """conv/relu blocks of depth 2, 2, 3, 3 with pools between them; taps relu1_2 ... relu4_3."""
    if pool not in ("max", "avg"):
        raise ValueError(f"pool must be 'max' or 'avg', got {pool!r}")
    chain = []
    cin = 3
    for b, (depth, width) in enumerate(zip(_BLOCK_DEPTHS, widths), start=1):
        if b > 1:
            chain.append(LayerSpec(pool + "pool", f"pool{b - 1}", cin, cin))
        for k in range(1, depth + 1):
            chain.append(LayerSpec("conv", f"conv{b}_{k}", cin, width))
            tap = f"relu{b}_{k}" if k == depth else None
            chain.append(LayerSpec("relu", f"relu{b}_{k}", width, width, tap))
            cin = width
    return chain


def pool_factor(chain) -> int:
    return 2 ** sum(1 for layer in chain if layer.kind.endswith("pool"))


@dataclass
class WeightsBundle:
    kernels: dict  # conv name -> (out, in, 3, 3)
    biases: dict  # conv name -> (out,)
    means: np.ndarray  # per-channel input means subtracted before the first conv
    provenance: str = "seeded-random"


def random_weights(chain, seed: int = 0) -> WeightsBundle:
    rng = np.random.default_rng(seed)
    kernels, biases = {}, {}
    for layer in chain:
        if layer.kind != "conv":
            continue
        std = np.sqrt(2.0 / (9 * layer.in_channels))
        kernels[layer.name] = (rng.standard_normal(
            (layer.out_channels, layer.in_channels, 3, 3)) * std).astype(np.float32)
        biases[layer.name] = np.zeros(layer.out_channels, dtype=np.float32)
    return WeightsBundle(kernels, biases, np.zeros(3, dtype=np.float32), "seeded-random")


# ---------------------------------------------------------------------------
# weights file: manifest lines "name shape offset", blob of little-endian float32

def save_weights(bundle: WeightsBundle, manifest_path, blob_path) -> None:
    entries = [("mean", np.asarray(bundle.means, dtype="<f4"))]
    for name in bundle.kernels:
        entries.append((f"{name}.weight", np.asarray(bundle.kernels[name], dtype="<f4")))
        entries.append((f"{name}.bias", np.asarray(bundle.biases[name], dtype="<f4")))
    lines = []
    offset = 0
    with open(blob_path, "wb") as fh:
        for name, arr in entries:
            fh.write(arr.tobytes(order="C"))
            shape = ",".join(str(s) for s in arr.shape)
            lines.append(f"{name} {shape} {offset}")
            offset += arr.nbytes
    Path(manifest_path).write_text("\n".join(lines) + "\n")


def load_weights(manifest_path, blob_path) -> WeightsBundle:
    blob = Path(blob_path).read_bytes()
    arrays = {}
    for lineno, line in enumerate(Path(manifest_path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise WeightsError(f"manifest line {lineno}: expected 'name shape offset'")
        name, shape_s, off_s = parts
        try:
            shape = tuple(int(s) for s in shape_s.replace("x", ",").split(","))
            offset = int(off_s)
        except ValueError as exc:
            raise WeightsError(f"manifest line {lineno}: {exc}") from None
        if offset < 0 or offset % 4:
            raise WeightsError(f"{name}: offset {offset} is not a nonnegative multiple of 4")
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(blob):
            raise WeightsError(f"{name}: truncated blob ({end} bytes needed, {len(blob)} present)")
        arrays[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)

    kernels, biases = {}, {}
    for key, arr in arrays.items():
        if key.endswith(".weight"):
            conv = key[: -len(".weight")]
            if arr.ndim != 4 or arr.shape[2:] != (3, 3):
                raise WeightsError(f"{key}: expected (out, in, 3, 3), got {arr.shape}")
            bias = arrays.get(conv + ".bias")
            if bias is None or bias.shape != (arr.shape[0],):
                raise WeightsError(f"{conv}: bias shape does not match {arr.shape[0]} output channels")
            kernels[conv] = arr
            biases[conv] = bias
    means = arrays.get("mean", np.zeros(3, dtype=np.float32))
    if means.shape != (3,):
        raise WeightsError(f"mean: expected shape (3,), got {means.shape}")
    return WeightsBundle(kernels, biases, means, "external-file")


# ---------------------------------------------------------------------------
# layers

def conv3x3(x, w, b):
    c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.empty((w.shape[0], h, wd), dtype=x.dtype)
    out[:] = b[:, None, None]
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(w[:, :, dy, dx], xp[:, dy:dy + h, dx:dx + wd], axes=1)
    return out


def conv3x3_backward(g, w):
    """Input gradient of conv3x3 (the transposed convolution)."""
    _, h, wd = g.shape
    gp = np.zeros((w.shape[1], h + 2, wd + 2), dtype=g.dtype)
    for dy in range(3):
        for dx in range(3):
            gp[:, dy:dy + h, dx:dx + wd] += np.tensordot(w[:, :, dy, dx].T, g, axes=1)
    return gp[:, 1:-1, 1:-1]


def maxpool2(x):
    c, h, w = x.shape
    win = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0], idx


def maxpool2_backward(g, idx):
    c, h2, w2 = g.shape
    win = np.zeros((c, h2, w2, 4), dtype=g.dtype)
    np.put_along_axis(win, idx[..., None], g[..., None], axis=-1)
    return win.reshape(c, h2, w2, 2, 2).transpose(0, 1, 3, 2, 4).reshape(c, 2 * h2, 2 * w2)


def avgpool2(x):
    c, h, w = x.shape
    return x.reshape(c, h // 2, 2, w // 2, 2).mean(axis=(2, 4))


def avgpool2_backward(g):
    return np.repeat(np.repeat(g, 2, axis=1), 2, axis=2) * 0.25


class FeatureNet:
    """Linear chain of layers; forward returns tap outputs and a cache for backward."""

    def __init__(self, chain=None, weights: WeightsBundle | None = None, seed: int = 0,
                 dtype=np.float32):
        self.chain = list(chain) if chain is not None else vgg_chain()
        self.dtype = np.dtype(dtype)
        self.weights = weights if weights is not None else random_weights(self.chain, seed)
        taps = [layer.tap for layer in self.chain if layer.tap]
        if len(taps) != len(set(taps)):
            raise ValueError("tap names must be unique")
        for layer in self.chain:
            if layer.kind != "conv":
                continue
            k = self.weights.kernels.get(layer.name)
            if k is None:
                raise WeightsError(f"no weights for {layer.name}")
            if k.shape != (layer.out_channels, layer.in_channels, 3, 3):
                raise WeightsError(f"{layer.name}: weights {k.shape} do not match the chain")
        self._k = {n: np.asarray(k, dtype=self.dtype) for n, k in self.weights.kernels.items()}
        self._b = {n: np.asarray(b, dtype=self.dtype) for n, b in self.weights.biases.items()}
        self._mean = np.asarray(self.weights.means, dtype=self.dtype)

    @property
    def taps(self) -> list[str]:
        return [layer.tap for layer in self.chain if layer.tap]

    def forward(self, image):
        x = np.asarray(image)
        if x.ndim != 3 or x.shape[0] != self.chain[0].in_channels:
            raise ValueError(f"expected a ({self.chain[0].in_channels}, H, W) image, got {x.shape}")
        f = pool_factor(self.chain)
        if x.shape[1] % f or x.shape[2] % f:
            raise ValueError(f"spatial size {x.shape[1:]} not divisible by {f}")
        x = x.astype(self.dtype) - self._mean[:, None, None]
        taps = {}
        cache = []
        for layer in self.chain:
            if layer.kind == "conv":
                cache.append(None)
                x = conv3x3(x, self._k[layer.name], self._b[layer.name])
            elif layer.kind == "relu":
                mask = x > 0
                cache.append(mask)
                x = x * mask
            elif layer.kind == "maxpool":
                x, idx = maxpool2(x)
                cache.append(idx)
            elif layer.kind == "avgpool":
                cache.append(None)
                x = avgpool2(x)
            else:
                raise ValueError(f"unknown layer kind {layer.kind!r}")
            if layer.tap:
                taps[layer.tap] = x
        return taps, cache

    def backward(self, tap_grads: dict, cache) -> np.ndarray:
        """Gradient of sum_t <tap_grads[t], tap_t> with respect to the input image."""
        if cache is None or len(cache) != len(self.chain):
            raise ValueError("backward needs the cache from a forward pass of this net")
        g = None
        for layer, saved in zip(reversed(self.chain), reversed(cache)):
            if layer.tap and layer.tap in tap_grads:
                tg = np.asarray(tap_grads[layer.tap], dtype=self.dtype)
                g = tg if g is None else g + tg
            if g is None:
                continue
            if layer.kind == "conv":
                g = conv3x3_backward(g, self._k[layer.name])
            elif layer.kind == "relu":
                g = g * saved
            elif layer.kind == "maxpool":
                g = maxpool2_backward(g, saved)
            elif layer.kind == "avgpool":
                g = avgpool2_backward(g)
        if g is None:
            raise ValueError("no tap gradients given")
        return g
