"""Retarget the controllable modules of a QR code to a halftone of an image.

RS codes are linear, so the XOR of two codewords is again a codeword. For
every padding bit we build a tailored codeword with zero message, a single 1
at that bit and RS parity; XORing it into the original flips exactly that
padding bit plus some parity bits. The padding coordinates of these tailored
codewords form an identity matrix, so Gauss-Jordan elimination over GF(2)
is already complete and any padding pattern is reached by XOR accumulation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qr
from .imgio import resize_area, to_gray


@dataclass(frozen=True)
class HalftoneTarget:
    bits: np.ndarray  # m x m, 1 = white
    confidence: np.ndarray  # |mean gray - 0.5|


@dataclass(frozen=True)
class TailoredBasis:
    positions: np.ndarray  # padding bit indices within the block
    vectors: np.ndarray  # (len(positions), n_bits) codeword bits


def halftone_target(content, spec) -> HalftoneTarget:
    m = spec.modules_per_side
    gray = resize_area(to_gray(content), m, m)[0]
    return HalftoneTarget((gray >= 0.5).astype(np.uint8), np.abs(gray - 0.5))


def build_basis(block: qr.RsBlock) -> TailoredBasis:
    roles = np.asarray(block.bit_roles)
    n_data_bits = 8 * len(block.data)
    positions = np.flatnonzero(roles[:n_data_bits] == qr.Role.PADDING)
    vectors = np.zeros((len(positions), len(roles)), dtype=np.uint8)
    for row, k in enumerate(positions):
        unit = np.zeros(n_data_bits, dtype=np.uint8)
        unit[k] = 1
        tailored = qr.rs_encode(np.packbits(unit).tobytes(), len(block.parity))
        vectors[row] = tailored.bits()
    return TailoredBasis(positions, vectors)


def desired_block_bits(target_bits: np.ndarray, positions: np.ndarray, spec: qr.QrSpec) -> np.ndarray:
    """Unmasked codeword bits that would show target_bits at the given module positions."""
    mask = qr.mask_pattern(spec.mask_index, spec.modules_per_side)
    r, c = positions[:, 0], positions[:, 1]
    dark = 1 - np.asarray(target_bits, dtype=np.uint8)[r, c]
    return dark ^ mask[r, c].astype(np.uint8)


def reshuffle(block: qr.RsBlock, target: HalftoneTarget, grid: qr.ModuleGrid,
              spec: qr.QrSpec, block_index: int, basis: TailoredBasis | None = None) -> qr.RsBlock:
    """Return a valid codeword whose padding modules show the target colors.

    grid and block must describe the same code; block_index locates the
    block's modules in the interleaved layout.
    """
    positions = qr.block_bit_positions(spec)[block_index]
    current = block.bits()
    if current.shape[0] != positions.shape[0]:
        raise ValueError("block does not match the spec's block layout")
    if not np.array_equal(desired_block_bits(grid.bits, positions, spec), current):
        raise ValueError("grid does not display this block")
    if basis is None:
        basis = build_basis(block)
    want = desired_block_bits(target.bits, positions, spec)
    flip = current[basis.positions] != want[basis.positions]
    out = current.copy()
    for vec in basis.vectors[flip]:
        out ^= vec
    return qr.RsBlock.from_bits(out, block.bit_roles, len(block.data))


def reshuffled_code_target(message: str, spec: qr.QrSpec, content) -> tuple[qr.ModuleGrid, list[qr.RsBlock], HalftoneTarget]:
    """Encode message and retarget every controllable module (padding bits and
    remainder modules) to the halftone of content."""
    target = halftone_target(content, spec)
    blocks = qr.encode_blocks(message, spec)
    grid = qr.assemble(blocks, spec)
    new_blocks = [reshuffle(b, target, grid, spec, i) for i, b in enumerate(blocks)]
    rpos = qr.remainder_positions(spec)
    remainder = target.bits[rpos[:, 0], rpos[:, 1]]
    return qr.assemble(new_blocks, spec, remainder=remainder), new_blocks, target
