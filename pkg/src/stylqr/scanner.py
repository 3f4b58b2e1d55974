"""Reference reader for rectified QR images plus a robustness reporter.

The geometry (version, module size) is given; there is no finder search.
Decoding samples each module's center, binarizes, unmasks, corrects every
RS block and parses the byte-mode segment.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import gaussian_filter

from . import qr
from .gf import RSDecodeError, rs_correct, syndromes
from .imgio import as_chw, resize_area, to_gray
from .losses import DEFAULT_THRESHOLD, activation_map, thresholds_from_eta, virtual_read
from .sampler import make_kernel, ss_forward


class DecodeFailure(qr.QrError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


def _geometry_check(img, spec):
    side = spec.modules_per_side * spec.module_px
    if img.shape[-2:] != (side, side):
        raise ValueError(f"image is {img.shape[-2:]}, expected ({side}, {side})")


def sample_centers(image, spec) -> np.ndarray:
    """Gray value at each module center (mean of the 4 central pixels for even a)."""
    gray = to_gray(image)[0]
    _geometry_check(gray, spec)
    m, a = spec.modules_per_side, spec.module_px
    blocks = gray.reshape(m, a, m, a)
    if a % 2:
        return blocks[:, a // 2, :, a // 2].copy()
    c = a // 2
    return blocks[:, c - 1:c + 1, :, c - 1:c + 1].mean(axis=(1, 3))


def binarize(samples, T: float = DEFAULT_THRESHOLD) -> np.ndarray:
    return (255.0 * np.asarray(samples, dtype=np.float64) >= T).astype(np.uint8)


def read_format(bits: np.ndarray):
    """(ec_level, mask_index, hamming distance) of the closest valid format word."""
    m = bits.shape[0]
    dark = 1 - bits
    best = None
    for copy in qr.format_positions(m):
        word = 0
        for i, (r, c) in enumerate(copy):
            word |= int(dark[r, c]) << i
        for level in qr.EC_LEVELS:
            for mask in range(8):
                d = bin(word ^ qr.format_bits(level, mask)).count("1")
                if best is None or d < best[2]:
                    best = (level, mask, d)
    return best


@dataclass
class ScanResult:
    message: str
    payload: bytes
    spec: qr.QrSpec
    corrected: list[int]  # byte errors fixed per block
    grid: qr.ModuleGrid  # ideal grid implied by the corrected codewords
    raw_bits: np.ndarray


def _parse_segments(stream: bytes) -> bytes:
    bits = np.unpackbits(np.frombuffer(stream, dtype=np.uint8))
    pos = 0
    out = bytearray()

    def take(n):
        nonlocal pos
        val = 0
        for b in bits[pos:pos + n]:
            val = (val << 1) | int(b)
        pos += n
        return val

    while len(bits) - pos >= 4:
        mode = take(4)
        if mode == 0:
            break
        if mode != 0b0100:
            raise DecodeFailure(f"unsupported segment mode {mode:04b}")
        count = take(8)
        if pos + 8 * count > len(bits):
            raise DecodeFailure("segment length runs past the data codewords")
        out += bytes(take(8) for _ in range(count))
    return bytes(out)


def scan_bits(bits, spec: qr.QrSpec) -> ScanResult:
    """Decode an m x m binarized module matrix (0 black)."""
    bits = np.asarray(bits, dtype=np.uint8)
    level, mask, dist = read_format(bits)
    if dist <= 3:
        spec = replace(spec, ec_level=level, mask_index=mask)
    nsym = spec.parity_per_block
    corrected_blocks = []
    counts = []
    for b, raw in enumerate(qr.extract_block_bits(bits, spec)):
        word = np.packbits(raw).tobytes()
        try:
            fixed, n = rs_correct(word, nsym)
        except RSDecodeError as exc:
            synd = syndromes(word, nsym)
            raise DecodeFailure(
                f"block {b}: {exc}",
                {"block": b, "nonzero_syndromes": sum(1 for s in synd if s), "syndromes": synd},
            ) from exc
        corrected_blocks.append(fixed)
        counts.append(n)
    sizes = spec.block_sizes
    stream = b"".join(w[:n] for w, n in zip(corrected_blocks, sizes))
    payload = _parse_segments(stream)
    try:
        message = payload.decode("utf-8")
    except UnicodeDecodeError:
        message = payload.decode("latin-1")
    roles = qr.split_roles(qr.data_bit_roles(len(payload), spec), spec)
    blocks = [qr.RsBlock(w[:n], w[n:], r) for w, n, r in zip(corrected_blocks, sizes, roles)]
    rpos = qr.remainder_positions(spec)
    grid = qr.assemble(blocks, spec, remainder=bits[rpos[:, 0], rpos[:, 1]])
    return ScanResult(message, payload, spec, counts, grid, bits)


def scan(image, spec: qr.QrSpec, T: float = DEFAULT_THRESHOLD, adaptive: bool = False) -> ScanResult:
    samples = sample_centers(image, spec)
    if adaptive:
        T = 255.0 * float(samples.mean())
    return scan_bits(binarize(samples, T), spec)


def decode(image, spec: qr.QrSpec, T: float = DEFAULT_THRESHOLD, adaptive: bool = False) -> str:
    return scan(image, spec, T, adaptive).message


def degrade(image, kind: str, param: float, seed: int = 0) -> np.ndarray:
    """Apply one synthetic capture degradation; deterministic for a given seed.

    kinds: gaussian_blur (sigma px), downsample (scale factor, resized back),
    additive_noise (sigma), gamma (exponent).
    """
    img = as_chw(image)
    if param < 0 or (param == 0 and kind not in ("gaussian_blur", "additive_noise")):
        raise ValueError(f"{kind} parameter must be positive, got {param}")
    if kind == "gaussian_blur":
        if param == 0:
            return img.copy()
        return gaussian_filter(img, sigma=(0, param, param), mode="nearest")
    if kind == "downsample":
        # factor < 1 shrinks to that fraction; factor > 1 shrinks by that divisor
        scale = param if param <= 1 else 1.0 / param
        if scale == 1:
            return img.copy()
        _, h, w = img.shape
        small = resize_area(img, max(1, round(h * scale)), max(1, round(w * scale)))
        return resize_area(small, h, w)
    if kind == "additive_noise":
        rng = np.random.default_rng(seed)
        return np.clip(img + rng.normal(0.0, param, img.shape), 0.0, 1.0)
    if kind == "gamma":
        return np.clip(img, 0.0, 1.0) ** param
    raise ValueError(f"unknown degradation {kind!r}")


@dataclass
class ScanReport:
    etas: list[float]
    error_modules: list[int]  # per eta, over the whole grid
    decode_success: bool
    message: str | None
    corrected_bytes: list[int]
    min_margin: float
    mean_margin: float
    threshold: float = DEFAULT_THRESHOLD
    failure: str | None = None
    extra: dict = field(default_factory=dict)

    def table(self) -> str:
        lines = ["eta\terror_modules"]
        lines += [f"{e:g}\t{n}" for e, n in zip(self.etas, self.error_modules)]
        return "\n".join(lines) + "\n"

    def key_values(self) -> str:
        kv = {
            "decode_success": str(self.decode_success).lower(),
            "message": "" if self.message is None else self.message.encode("unicode_escape").decode("ascii"),
            "corrected_bytes": ",".join(map(str, self.corrected_bytes)),
            "threshold": repr(self.threshold),
            "min_margin": repr(self.min_margin),
            "mean_margin": repr(self.mean_margin),
            "etas": ",".join(f"{e:g}" for e in self.etas),
            "error_modules": ",".join(map(str, self.error_modules)),
        }
        if self.failure:
            kv["failure"] = self.failure.replace("\n", " ")
        return "".join(f"{k} = {v}\n" for k, v in kv.items())

    @classmethod
    def parse_key_values(cls, text: str) -> "ScanReport":
        kv = {}
        for line in text.splitlines():
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()

        def ints(s):
            return [int(x) for x in s.split(",") if x]

        msg = kv.get("message", "")
        return cls(
            etas=[float(x) for x in kv["etas"].split(",") if x],
            error_modules=ints(kv["error_modules"]),
            decode_success=kv["decode_success"] == "true",
            message=msg.encode("ascii").decode("unicode_escape") if kv["decode_success"] == "true" else None,
            corrected_bytes=ints(kv.get("corrected_bytes", "")),
            min_margin=float(kv["min_margin"]),
            mean_margin=float(kv["mean_margin"]),
            threshold=float(kv["threshold"]),
            failure=kv.get("failure"),
        )


def module_margins(F, grid: qr.ModuleGrid, T: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """|255 F - T| over encoding-region modules."""
    enc = ~grid.function_mask()
    return np.abs(255.0 * np.asarray(F)[enc] - T)


def robustness_report(image, spec: qr.QrSpec, target: qr.ModuleGrid | None = None,
                      eta_values=(0.0, 0.2, 0.4, 0.6, 0.8), T: float = DEFAULT_THRESHOLD,
                      sigma: float | None = None) -> ScanReport:
    """Error-module counts under the virtual reader at several eta, plus a decode attempt.

    Without a target, the grid implied by the decoded codewords is used.
    """
    message = None
    corrected: list[int] = []
    failure = None
    try:
        res = scan(image, spec, T)
        message, corrected = res.message, res.corrected
        if target is None:
            target = res.grid
    except (DecodeFailure, qr.QrError) as exc:
        failure = str(exc)
    gray = to_gray(image)
    F = ss_forward(gray, make_kernel(spec.module_px, sigma), spec)
    if target is None:
        # nothing decodable: judge against the plain binarization
        target = qr.ModuleGrid(binarize(F, T), qr.build_code_target("", spec).roles)
    counts = []
    for eta in eta_values:
        th = thresholds_from_eta(T, eta)
        counts.append(int(activation_map(virtual_read(F, target.bits, th), target.bits).sum()))
    margins = module_margins(F, target, T)
    return ScanReport(list(map(float, eta_values)), counts, failure is None, message, corrected,
                      float(margins.min()), float(margins.mean()), T, failure)
