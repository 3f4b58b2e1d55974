import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stylqr.gf import (RSDecodeError, gf_inv, gf_mul, generator_poly, rs_correct, rs_remainder,
                       syndromes)
from stylqr.qr import rs_encode

byte = st.integers(0, 255)


def slow_mul(a, b):
    """Carry-less shift-and-add product reduced by 0x11D, no tables."""
    r = 0
    while b:
        if b & 1:
            r ^= a
        b >>= 1
        a <<= 1
        if a & 0x100:
            a ^= 0x11D
    return r


def naive_tables():
    # antilog by repeated slow multiplication by 2
    exp = [1]
    for _ in range(254):
        exp.append(slow_mul(exp[-1], 2))
    log = {v: i for i, v in enumerate(exp)}
    return exp, log


def schoolbook_parity(msg, nsym):
    exp, log = naive_tables()

    def mul(a, b):
        return 0 if a == 0 or b == 0 else exp[(log[a] + log[b]) % 255]

    gen = [1]
    for i in range(nsym):
        nxt = [0] * (len(gen) + 1)
        for j, g in enumerate(gen):
            nxt[j] ^= g
            nxt[j + 1] ^= mul(g, exp[i])
        gen = nxt
    rem = list(msg) + [0] * nsym
    for i in range(len(msg)):
        coef = rem[i]
        if coef:
            for j in range(len(gen)):
                rem[i + j] ^= mul(gen[j], coef)
    return bytes(rem[len(msg):])


def test_gf_mul_examples():
    assert gf_mul(0, 17) == 0
    assert gf_mul(1, 173) == 173
    assert gf_mul(2, 128) == 0x1D


def test_gf_mul_matches_shift_and_add_exhaustively():
    for a in range(256):
        for b in range(256):
            assert gf_mul(a, b) == slow_mul(a, b)


def test_distributes_over_xor():
    rng = random.Random(1)
    for _ in range(10_000):
        a, b, c = rng.randrange(256), rng.randrange(256), rng.randrange(256)
        assert gf_mul(a, b ^ c) == gf_mul(a, b) ^ gf_mul(a, c)


@given(byte, byte, byte)
def test_field_axioms(a, b, c):
    assert gf_mul(a, b) == gf_mul(b, a)
    assert gf_mul(gf_mul(a, b), c) == gf_mul(a, gf_mul(b, c))


def test_inverses():
    for a in range(1, 256):
        assert gf_mul(a, gf_inv(a)) == 1


def test_generator_known_value():
    # 7-symbol generator listed in the QR standard
    assert generator_poly(7) == [1, 127, 122, 154, 164, 11, 68, 117]


def test_rs_encode_zero_data():
    for n in (1, 7, 22):
        assert rs_encode(bytes(9), n).parity == bytes(n)


def test_rs_encode_single_byte_single_parity():
    for d in (1, 0x5A, 255):
        assert rs_encode(bytes([d]), 1).parity == bytes([d])


def test_rs_encode_matches_schoolbook_division():
    # "HELLO WORLD" as version 1-M alphanumeric data codewords
    msg = bytes([0x20, 0x5B, 0x0B, 0x78, 0xD1, 0x72, 0xDC, 0x4D,
                 0x43, 0x40, 0xEC, 0x11, 0xEC, 0x11, 0xEC, 0x11])
    block = rs_encode(msg, 10)
    assert block.parity == schoolbook_parity(msg, 10)
    assert list(block.parity) == [196, 35, 39, 119, 235, 215, 231, 226, 93, 23]


def test_rs_encode_rejects_bad_input():
    with pytest.raises(ValueError):
        rs_encode(b"", 4)
    with pytest.raises(ValueError):
        rs_remainder(b"x", 0)
    with pytest.raises(ValueError):
        rs_remainder(b"x", 65)


@given(st.binary(min_size=1, max_size=60), st.integers(1, 30))
def test_codewords_have_zero_syndromes(data, nsym):
    block = rs_encode(data, nsym)
    assert not any(syndromes(block.codeword, nsym))
    assert block.parity == schoolbook_parity(data, nsym)


def test_xor_of_codewords_is_codeword():
    rng = np.random.default_rng(3)
    for _ in range(200):
        a = rng.integers(0, 256, 20, dtype=np.uint8).tobytes()
        b = rng.integers(0, 256, 20, dtype=np.uint8).tobytes()
        ca, cb = rs_encode(a, 14).codeword, rs_encode(b, 14).codeword
        assert not any(syndromes(bytes(x ^ y for x, y in zip(ca, cb)), 14))


@pytest.mark.parametrize("n_data,nsym", [(9, 17), (19, 7), (11, 22), (108, 26), (1, 2)])
def test_corrects_up_to_half_parity(n_data, nsym):
    rng = np.random.default_rng(n_data * 100 + nsym)
    t = nsym // 2
    for _ in range(30):
        data = rng.integers(0, 256, n_data, dtype=np.uint8).tobytes()
        cw = bytearray(rs_encode(data, nsym).codeword)
        for pos in rng.choice(len(cw), t, replace=False):
            cw[pos] ^= int(rng.integers(1, 256))
        fixed, n = rs_correct(bytes(cw), nsym)
        assert fixed[:n_data] == data
        assert n == t


def test_one_past_capacity_is_detected():
    rng = np.random.default_rng(11)
    nsym = 22
    for _ in range(50):
        data = rng.integers(0, 256, 12, dtype=np.uint8).tobytes()
        cw = bytearray(rs_encode(data, nsym).codeword)
        for pos in rng.choice(len(cw), nsym // 2 + 1, replace=False):
            cw[pos] ^= int(rng.integers(1, 256))
        with pytest.raises(RSDecodeError):
            rs_correct(bytes(cw), nsym)


def test_clean_codeword_needs_no_correction():
    cw = rs_encode(b"abc", 6).codeword
    assert rs_correct(cw, 6) == (cw, 0)
