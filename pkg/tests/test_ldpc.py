from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zakofdm import ldpc
from zakofdm.channel import NoiseSpec, add_awgn
from zakofdm.qam import qam_demap, qam_map


def test_crc_matches_reference_vector():
    # CRC-16/XMODEM check value of "123456789"
    bits = np.unpackbits(np.frombuffer(b"123456789", np.uint8))
    assert int("".join(map(str, ldpc.crc16(bits))), 2) == 0x31C3


def test_all_zero_codeword():
    c = ldpc.encode(np.zeros(100, np.uint8), Fraction(1, 2))
    assert not c[100:116].any() and not c.any()
    u, ok = ldpc.decode(np.full(c.size, 20.0), Fraction(1, 2))
    assert ok and not u.any()


@given(st.sampled_from([Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(5, 6)]), st.integers(50, 400), st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_codewords_satisfy_checks_and_decode(rate, k, seed):
    u = np.random.default_rng(seed).integers(0, 2, k, dtype=np.uint8)
    c = ldpc.encode(u, rate)
    code = ldpc.code_for(c.size, k + ldpc.CRC_BITS)
    assert not code.syndrome(c).any()
    u_hat, ok = ldpc.decode(20.0 * (1 - 2.0 * c), rate)
    assert ok and np.array_equal(u_hat, u)


def test_fixed_length_encoding():
    n = 999
    k = ldpc.info_length(n, Fraction(2, 3))
    assert ldpc.encode(np.zeros(k, np.uint8), Fraction(2, 3), n).size == n


def test_unsupported_rate():
    with pytest.raises(ldpc.CodeConfigError):
        ldpc.encode(np.zeros(10, np.uint8), 1.0)
    with pytest.raises(ldpc.CodeConfigError):
        ldpc.LDPCCode(10, 10)


def bler_awgn(ebn0_db, n_blocks, seed=0):
    rate, n = Fraction(1, 2), 2048
    k = ldpc.info_length(n, rate)
    # Es/N0 for QPSK is 2 R Eb/N0
    snr_db = ebn0_db + 10 * np.log10(2 * float(rate))
    nv = 10 ** (-snr_db / 10)
    rng = np.random.default_rng(seed)
    errors = 0
    for b in range(n_blocks):
        u = rng.integers(0, 2, k, dtype=np.uint8)
        c = ldpc.encode(u, rate, n)
        y = add_awgn(qam_map(c, 2), NoiseSpec(snr_db, seed * 100003 + b))
        u_hat, ok = ldpc.decode(qam_demap(y, 1 / nv, 2), rate)
        errors += int(not ok or not np.array_equal(u_hat, u))
    return errors / n_blocks


@pytest.mark.slow
def test_bler_falls_with_snr():
    lo, hi = bler_awgn(2.0, 1000, seed=1), bler_awgn(4.0, 1000, seed=2)
    assert hi < lo
