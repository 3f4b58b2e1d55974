"""GF(2^8) arithmetic and Reed-Solomon coding as used by QR codes.

Field polynomial x^8 + x^4 + x^3 + x^2 + 1 (0x11D), primitive element 2.
Polynomials are byte sequences with the highest-degree coefficient first,
which is also the order codewords are transmitted in.
"""
from __future__ import annotations

PRIM = 0x11D

EXP = [0] * 512
LOG = [0] * 256
_x = 1
for _i in range(255):
    EXP[_i] = _x
    LOG[_x] = _i
    _x <<= 1
    if _x & 0x100:
        _x ^= PRIM
for _i in range(255, 512):
    EXP[_i] = EXP[_i - 255]
del _x, _i


class RSDecodeError(Exception):
    """Raised when a received word has more errors than the code can fix."""


def gf_mul(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    return EXP[LOG[a] + LOG[b]]


def gf_div(a: int, b: int) -> int:
    if b == 0:
        raise ZeroDivisionError("division by zero in GF(256)")
    if a == 0:
        return 0
    return EXP[(LOG[a] - LOG[b]) % 255]


def gf_inv(a: int) -> int:
    return gf_div(1, a)


def gf_pow(a: int, n: int) -> int:
    if a == 0:
        return 0 if n else 1
    return EXP[(LOG[a] * n) % 255]


def poly_mul(p: list[int], q: list[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, qj in enumerate(q):
            out[i + j] ^= gf_mul(pi, qj)
    return out


def poly_eval(p, x: int) -> int:
    # Horner, highest degree first
    y = 0
    for c in p:
        y = gf_mul(y, x) ^ c
    return y


_GENERATORS: dict[int, list[int]] = {}


def generator_poly(nsym: int) -> list[int]:
    """prod_{i<nsym} (x - alpha^i), highest degree first (monic)."""
    g = _GENERATORS.get(nsym)
    if g is None:
        g = [1]
        for i in range(nsym):
            g = poly_mul(g, [1, EXP[i]])
        _GENERATORS[nsym] = g
    return list(g)


def rs_remainder(data, nsym: int) -> bytes:
    """Parity bytes: remainder of data(x) * x^nsym modulo the generator."""
    if not 1 <= nsym <= 64:
        raise ValueError(f"parity count must be in [1, 64], got {nsym}")
    gen = generator_poly(nsym)
    rem = [0] * nsym
    for byte in data:
        factor = byte ^ rem[0]
        rem = rem[1:] + [0]
        if factor:
            lf = LOG[factor]
            for j in range(nsym):
                g = gen[j + 1]
                if g:
                    rem[j] ^= EXP[lf + LOG[g]]
    return bytes(rem)


def syndromes(codeword, nsym: int) -> list[int]:
    """S_j = c(alpha^j) for j in [0, nsym)."""
    return [poly_eval(codeword, EXP[j]) for j in range(nsym)]


def berlekamp_massey(synd: list[int]) -> list[int]:
    """Error locator Lambda(x), lowest degree first, Lambda(0) = 1."""
    lam = [1]
    prev = [1]
    length = 0
    shift = 1
    b = 1
    for n, s in enumerate(synd):
        d = s
        for i in range(1, length + 1):
            if i < len(lam):
                d ^= gf_mul(lam[i], synd[n - i])
        if d == 0:
            shift += 1
            continue
        coef = gf_div(d, b)
        update = [0] * shift + [gf_mul(coef, c) for c in prev]
        new = lam + [0] * max(0, len(update) - len(lam))
        for i, c in enumerate(update):
            new[i] ^= c
        if 2 * length <= n:
            prev = lam
            length = n + 1 - length
            b = d
            shift = 1
        else:
            shift += 1
        lam = new
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    if len(lam) - 1 != length:
        raise RSDecodeError("error locator degree disagrees with LFSR length")
    return lam


def _eval_low(p: list[int], x: int) -> int:
    y = 0
    for c in reversed(p):
        y = gf_mul(y, x) ^ c
    return y


def chien_search(lam: list[int], n: int) -> list[int]:
    """Indices (0 = first transmitted byte) whose locator X = alpha^(n-1-idx) is a root of Lambda(1/X)."""
    positions = []
    for idx in range(n):
        power = n - 1 - idx
        if _eval_low(lam, EXP[(255 - power) % 255]) == 0:
            positions.append(idx)
    return positions


def forney(synd: list[int], lam: list[int], positions: list[int], n: int) -> list[int]:
    """Error magnitudes for the located positions (first consecutive root = alpha^0)."""
    nsym = len(synd)
    omega = [0] * nsym
    for i, s in enumerate(synd):
        if s == 0:
            continue
        for j, l in enumerate(lam):
            if i + j < nsym:
                omega[i + j] ^= gf_mul(s, l)
    # formal derivative in characteristic 2 keeps odd-degree terms only
    dlam = [lam[i] if i % 2 == 1 else 0 for i in range(1, len(lam))]
    mags = []
    for idx in positions:
        x = EXP[n - 1 - idx]
        x_inv = gf_inv(x)
        denom = _eval_low(dlam, x_inv)
        if denom == 0:
            raise RSDecodeError("zero derivative at error locator")
        mags.append(gf_mul(x, gf_div(_eval_low(omega, x_inv), denom)))
    return mags


def rs_correct(codeword, nsym: int) -> tuple[bytes, int]:
    """Correct up to nsym // 2 byte errors; returns (corrected codeword, error count)."""
    word = list(codeword)
    n = len(word)
    if n > 255:
        raise ValueError("codeword longer than 255 bytes")
    synd = syndromes(word, nsym)
    if not any(synd):
        return bytes(word), 0
    lam = berlekamp_massey(synd)
    nerr = len(lam) - 1
    if 2 * nerr > nsym:
        raise RSDecodeError(f"{nerr} errors exceed capacity {nsym // 2}")
    positions = chien_search(lam, n)
    if len(positions) != nerr:
        raise RSDecodeError(
            f"locator of degree {nerr} has {len(positions)} roots inside the codeword")
    for idx, mag in zip(positions, forney(synd, lam, positions, n)):
        word[idx] ^= mag
    if any(syndromes(word, nsym)):
        raise RSDecodeError("residual syndromes after correction")
    return bytes(word), nerr
