"""QR code construction for versions 1-5, byte mode only.

Module color convention throughout the package: 0 = black, 1 = white.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .gf import rs_remainder, syndromes


class QrError(Exception):
    pass


class CapacityExceeded(QrError):
    pass


class UnsupportedVersion(QrError, ValueError):
    pass


class Role(IntEnum):
    FINDER = 0  # finder patterns and their separators
    ALIGNMENT = 1
    TIMING = 2
    FORMAT = 3  # format information and the dark module
    DATA = 4  # mode indicator, count, message bytes, terminator
    PADDING = 5  # bits after the terminator, pad codewords, remainder bits
    PARITY = 6


FUNCTION_ROLES = (Role.FINDER, Role.ALIGNMENT, Role.TIMING, Role.FORMAT)
ENCODING_ROLES = (Role.DATA, Role.PADDING, Role.PARITY)

EC_LEVELS = ("L", "M", "Q", "H")
EC_FORMAT_BITS = {"L": 0b01, "M": 0b00, "Q": 0b11, "H": 0b10}

# (version, level) -> (parity bytes per block, [(block count, data bytes per block), ...])
EC_BLOCKS = {
    (1, "L"): (7, [(1, 19)]),
    (1, "M"): (10, [(1, 16)]),
    (1, "Q"): (13, [(1, 13)]),
    (1, "H"): (17, [(1, 9)]),
    (2, "L"): (10, [(1, 34)]),
    (2, "M"): (16, [(1, 28)]),
    (2, "Q"): (22, [(1, 22)]),
    (2, "H"): (28, [(1, 16)]),
    (3, "L"): (15, [(1, 55)]),
    (3, "M"): (26, [(1, 44)]),
    (3, "Q"): (18, [(2, 17)]),
    (3, "H"): (22, [(2, 13)]),
    (4, "L"): (20, [(1, 80)]),
    (4, "M"): (18, [(2, 32)]),
    (4, "Q"): (26, [(2, 24)]),
    (4, "H"): (16, [(4, 9)]),
    (5, "L"): (26, [(1, 108)]),
    (5, "M"): (24, [(2, 43)]),
    (5, "Q"): (18, [(2, 15), (2, 16)]),
    (5, "H"): (22, [(2, 11), (2, 12)]),
}

TOTAL_CODEWORDS = {1: 26, 2: 44, 3: 70, 4: 100, 5: 134}
REMAINDER_BITS = {1: 0, 2: 7, 3: 7, 4: 7, 5: 7}

# ISO byte-mode capacities (characters), used to cross-check the block table
BYTE_CAPACITY = {
    1: {"L": 17, "M": 14, "Q": 11, "H": 7},
    2: {"L": 32, "M": 26, "Q": 20, "H": 14},
    3: {"L": 53, "M": 42, "Q": 32, "H": 24},
    4: {"L": 78, "M": 62, "Q": 46, "H": 34},
    5: {"L": 106, "M": 84, "Q": 60, "H": 44},
}

ALIGNMENT_CENTERS = {1: [], 2: [6, 18], 3: [6, 22], 4: [6, 26], 5: [6, 30]}

PAD_BYTES = (0xEC, 0x11)


@dataclass(frozen=True)
class Geometry:
    """Bare module grid geometry; enough for the sampling layer and losses."""
    modules_per_side: int
    module_px: int

    @property
    def side_px(self) -> int:
        return self.modules_per_side * self.module_px


@dataclass(frozen=True)
class QrSpec:
    version: int = 5
    ec_level: str = "H"
    mask_index: int = 0
    module_px: int = 16

    def __post_init__(self):
        if self.version not in TOTAL_CODEWORDS:
            raise UnsupportedVersion(f"version {self.version} not supported (1-5 only)")
        if self.ec_level not in EC_LEVELS:
            raise ValueError(f"unknown error correction level {self.ec_level!r}")
        if not 0 <= self.mask_index <= 7:
            raise ValueError(f"mask index must be in [0, 7], got {self.mask_index}")
        if self.module_px < 4:
            raise ValueError(f"module size must be at least 4 px, got {self.module_px}")

    @property
    def modules_per_side(self) -> int:
        return 21 + 4 * (self.version - 1)

    @property
    def side_px(self) -> int:
        return self.modules_per_side * self.module_px

    @property
    def parity_per_block(self) -> int:
        return EC_BLOCKS[self.version, self.ec_level][0]

    @property
    def block_sizes(self) -> list[int]:
        """Data bytes of each RS block in order."""
        groups = EC_BLOCKS[self.version, self.ec_level][1]
        return [n for count, n in groups for _ in range(count)]

    @property
    def data_capacity(self) -> int:
        return sum(self.block_sizes)

    @property
    def byte_capacity(self) -> int:
        # 4-bit mode + 8-bit count header
        return (self.data_capacity * 8 - 12) // 8


@dataclass(frozen=True)
class RsBlock:
    """One RS codeword: data bytes, parity bytes, and a role for every bit.

    bit_roles has 8 * (len(data) + len(parity)) entries, MSB first per byte.
    """
    data: bytes
    parity: bytes
    bit_roles: np.ndarray = field(repr=False)

    @property
    def codeword(self) -> bytes:
        return self.data + self.parity

    @property
    def byte_roles(self) -> list[Role]:
        roles = []
        for k in range(len(self.codeword)):
            r = self.bit_roles[8 * k: 8 * k + 8]
            if np.all(r == Role.PARITY):
                roles.append(Role.PARITY)
            elif np.all(r == Role.PADDING):
                roles.append(Role.PADDING)
            else:
                roles.append(Role.DATA)
        return roles

    def bits(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.codeword, dtype=np.uint8))

    @classmethod
    def from_bits(cls, bits, bit_roles, n_data: int) -> "RsBlock":
        raw = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
        return cls(raw[:n_data], raw[n_data:], np.asarray(bit_roles))

    def is_valid(self) -> bool:
        return not any(syndromes(self.codeword, len(self.parity)))


@dataclass(frozen=True)
class ModuleGrid:
    bits: np.ndarray  # m x m uint8, 0 black / 1 white
    roles: np.ndarray  # m x m uint8 of Role values

    @property
    def size(self) -> int:
        return self.bits.shape[0]

    def function_mask(self) -> np.ndarray:
        return np.isin(self.roles, FUNCTION_ROLES)


def rs_encode(data, parity_count: int, bit_roles=None) -> RsBlock:
    data = bytes(data)
    if not data:
        raise ValueError("cannot RS-encode empty data")
    parity = rs_remainder(data, parity_count)
    n_bits = 8 * (len(data) + parity_count)
    if bit_roles is None:
        bit_roles = np.full(n_bits, Role.DATA, dtype=np.uint8)
        bit_roles[8 * len(data):] = Role.PARITY
    return RsBlock(data, parity, np.asarray(bit_roles, dtype=np.uint8))


# ---------------------------------------------------------------------------
# geometry

@lru_cache(maxsize=None)
def _function_layout(version: int):
    """Dark-module matrix and roles of all function patterns (format area left light)."""
    m = 21 + 4 * (version - 1)
    dark = np.zeros((m, m), dtype=np.uint8)
    roles = np.full((m, m), 255, dtype=np.uint8)

    for r0, c0 in ((0, 0), (0, m - 7), (m - 7, 0)):
        for dr in range(-1, 8):
            for dc in range(-1, 8):
                r, c = r0 + dr, c0 + dc
                if not (0 <= r < m and 0 <= c < m):
                    continue
                roles[r, c] = Role.FINDER
                ring = max(abs(dr - 3), abs(dc - 3))
                dark[r, c] = 1 if ring in (0, 1, 3) else 0

    for i in range(8, m - 8):
        for r, c in ((6, i), (i, 6)):
            roles[r, c] = Role.TIMING
            dark[r, c] = 1 if i % 2 == 0 else 0

    centers = ALIGNMENT_CENTERS[version]
    for cr in centers:
        for cc in centers:
            if roles[cr, cc] == Role.FINDER:
                continue
            for dr in range(-2, 3):
                for dc in range(-2, 3):
                    roles[cr + dr, cc + dc] = Role.ALIGNMENT
                    dark[cr + dr, cc + dc] = 1 if max(abs(dr), abs(dc)) != 1 else 0

    for i in range(9):
        if roles[8, i] == 255:
            roles[8, i] = Role.FORMAT
        if roles[i, 8] == 255:
            roles[i, 8] = Role.FORMAT
    for i in range(8):
        roles[8, m - 1 - i] = Role.FORMAT
        roles[m - 1 - i, 8] = Role.FORMAT
    dark[m - 8, 8] = 1
    return dark, roles


@lru_cache(maxsize=None)
def data_positions(version: int) -> np.ndarray:
    """(row, col) of every non-function module in zigzag placement order."""
    _, roles = _function_layout(version)
    m = roles.shape[0]
    out = []
    right = m - 1
    while right >= 1:
        if right == 6:
            right = 5
        upward = ((right + 1) & 2) == 0
        for vert in range(m):
            row = m - 1 - vert if upward else vert
            for j in range(2):
                col = right - j
                if roles[row, col] == 255:
                    out.append((row, col))
        right -= 2
    pos = np.array(out, dtype=np.intp)
    pos.setflags(write=False)
    return pos


def mask_pattern(index: int, m: int) -> np.ndarray:
    """Boolean m x m matrix, True where the mask inverts a data module."""
    i, j = np.indices((m, m))
    if index == 0:
        return (i + j) % 2 == 0
    if index == 1:
        return i % 2 == 0
    if index == 2:
        return j % 3 == 0
    if index == 3:
        return (i + j) % 3 == 0
    if index == 4:
        return (i // 2 + j // 3) % 2 == 0
    if index == 5:
        return (i * j) % 2 + (i * j) % 3 == 0
    if index == 6:
        return ((i * j) % 2 + (i * j) % 3) % 2 == 0
    if index == 7:
        return ((i + j) % 2 + (i * j) % 3) % 2 == 0
    raise ValueError(f"mask index must be in [0, 7], got {index}")


def format_bits(ec_level: str, mask_index: int) -> int:
    """15-bit BCH-protected format word, already XORed with 0x5412."""
    data = (EC_FORMAT_BITS[ec_level] << 3) | mask_index
    rem = data
    for _ in range(10):
        rem = (rem << 1) ^ ((rem >> 9) * 0x537)
    return ((data << 10) | (rem & 0x3FF)) ^ 0x5412


def format_positions(m: int):
    """Module coordinates for format bit i (LSB = 0) in both copies."""
    first = [(i, 8) for i in range(6)] + [(7, 8), (8, 8), (8, 7)]
    first += [(8, 14 - i) for i in range(9, 15)]
    second = [(8, m - 1 - i) for i in range(8)]
    second += [(m - 15 + i, 8) for i in range(8, 15)]
    return first, second


@lru_cache(maxsize=None)
def block_bit_positions(spec: QrSpec) -> tuple[np.ndarray, ...]:
    """Per RS block, the (row, col) of each of its codeword bits after interleaving."""
    sizes = spec.block_sizes
    ec = spec.parity_per_block
    order = []  # (block, byte index) in transmission order
    for k in range(max(sizes)):
        for b, n in enumerate(sizes):
            if k < n:
                order.append((b, k))
    for k in range(ec):
        for b, n in enumerate(sizes):
            order.append((b, n + k))
    pos = data_positions(spec.version)
    per_block = [np.zeros((8 * (n + ec), 2), dtype=np.intp) for n in sizes]
    for t, (b, k) in enumerate(order):
        per_block[b][8 * k: 8 * k + 8] = pos[8 * t: 8 * t + 8]
    for arr in per_block:
        arr.setflags(write=False)
    return tuple(per_block)


def remainder_positions(spec: QrSpec) -> np.ndarray:
    pos = data_positions(spec.version)
    return pos[8 * TOTAL_CODEWORDS[spec.version]:]


# ---------------------------------------------------------------------------
# encoding

def encode_data_codewords(message: str, spec: QrSpec) -> tuple[bytes, np.ndarray]:
    """Byte-mode segment, terminator, bit padding and pad codewords.

    Returns the data codeword stream and a per-bit role array (DATA/PADDING).
    """
    payload = message.encode("utf-8")
    if len(payload) > spec.byte_capacity:
        raise CapacityExceeded(
            f"capacity exceeded: {len(payload)} bytes > {spec.byte_capacity} "
            f"for version {spec.version}-{spec.ec_level}")
    capacity_bits = spec.data_capacity * 8
    bits = [0, 1, 0, 0]
    bits += [(len(payload) >> i) & 1 for i in range(7, -1, -1)]
    for byte in payload:
        bits += [(byte >> i) & 1 for i in range(7, -1, -1)]
    bits += [0] * min(4, capacity_bits - len(bits))
    bits += [0] * (-len(bits) % 8)
    out = bytearray(np.packbits(np.array(bits, dtype=np.uint8)).tobytes())
    k = 0
    while len(out) < spec.data_capacity:
        out.append(PAD_BYTES[k % 2])
        k += 1
    return bytes(out), data_bit_roles(len(payload), spec)


def data_bit_roles(payload_len: int, spec: QrSpec) -> np.ndarray:
    """DATA for header, payload and terminator bits; PADDING for everything after."""
    capacity_bits = spec.data_capacity * 8
    used = 12 + 8 * payload_len
    n_message = used + min(4, capacity_bits - used)
    roles = np.full(capacity_bits, Role.PADDING, dtype=np.uint8)
    roles[:n_message] = Role.DATA
    return roles


def split_roles(roles: np.ndarray, spec: QrSpec) -> list[np.ndarray]:
    """Cut a data-stream role array into per-block role arrays including parity bits."""
    ec = spec.parity_per_block
    out = []
    start = 0
    for n in spec.block_sizes:
        out.append(np.concatenate(
            [roles[8 * start: 8 * (start + n)], np.full(8 * ec, Role.PARITY, dtype=np.uint8)]))
        start += n
    return out


def encode_blocks(message: str, spec: QrSpec) -> list[RsBlock]:
    data, roles = encode_data_codewords(message, spec)
    blocks = []
    start = 0
    for n, block_roles in zip(spec.block_sizes, split_roles(roles, spec)):
        blocks.append(rs_encode(data[start:start + n], spec.parity_per_block, block_roles))
        start += n
    return blocks


def assemble(blocks, spec: QrSpec, remainder=None) -> ModuleGrid:
    """Place codewords, apply the mask and write format information.

    remainder optionally gives the final (post-mask) colors of the remainder
    modules; by default they carry unmasked zero bits as ISO prescribes.
    """
    dark_fn, fn_roles = _function_layout(spec.version)
    m = spec.modules_per_side
    dark = dark_fn.copy()
    roles = fn_roles.copy()
    for block, pos in zip(blocks, block_bit_positions(spec)):
        dark[pos[:, 0], pos[:, 1]] = block.bits()
        roles[pos[:, 0], pos[:, 1]] = block.bit_roles
    rpos = remainder_positions(spec)
    roles[rpos[:, 0], rpos[:, 1]] = Role.PADDING
    encoding = np.isin(roles, ENCODING_ROLES)
    dark ^= (mask_pattern(spec.mask_index, m) & encoding).astype(np.uint8)
    if remainder is not None and len(rpos):
        # stored as white=1, convert to dark
        dark[rpos[:, 0], rpos[:, 1]] = 1 - np.asarray(remainder, dtype=np.uint8)
    fmt = format_bits(spec.ec_level, spec.mask_index)
    for copy in format_positions(m):
        for i, (r, c) in enumerate(copy):
            dark[r, c] = (fmt >> i) & 1
    bits = (1 - dark).astype(np.uint8)
    bits.setflags(write=False)
    roles.setflags(write=False)
    return ModuleGrid(bits, roles)


def build_code_target(message: str, spec: QrSpec) -> ModuleGrid:
    return assemble(encode_blocks(message, spec), spec)


def extract_block_bits(grid_bits: np.ndarray, spec: QrSpec) -> list[np.ndarray]:
    """Read and unmask the codeword bits of every block from a module matrix (0 black)."""
    m = spec.modules_per_side
    dark = 1 - np.asarray(grid_bits, dtype=np.uint8)
    unmasked = dark ^ mask_pattern(spec.mask_index, m).astype(np.uint8)
    return [unmasked[pos[:, 0], pos[:, 1]] for pos in block_bit_positions(spec)]


def render(grid: ModuleGrid, spec) -> np.ndarray:
    """(1, m*a, m*a) float image in [0, 1]; every module is a constant block."""
    bits = grid.bits if isinstance(grid, ModuleGrid) else np.asarray(grid)
    a = spec.module_px
    img = np.kron(bits.astype(np.float64), np.ones((a, a)))
    return img[None]
