"""Systematic irregular repeat-accumulate LDPC code with CRC-16.

Parity-check matrix ``H = [H_u | H_p]`` where ``H_u`` gives every information
bit three checks and ``H_p`` is the dual-diagonal accumulator, so encoding is
a running XOR. Decoding is flooding normalized min-sum.
"""

from __future__ import annotations

import binascii
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

CRC_BITS = 16
INFO_DEGREE = 3
MINSUM_SCALE = 0.75


class CodeConfigError(ValueError):
    pass


def crc16(bits: np.ndarray) -> np.ndarray:
    """CRC-16-CCITT (poly 0x1021, zero init) of a bit vector, as 16 bits MSB first."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    pad = (-bits.size) % 8
    # leading zeros leave a zero-init CRC unchanged
    packed = np.packbits(np.concatenate([np.zeros(pad, np.uint8), bits]))
    value = binascii.crc_hqx(packed.tobytes(), 0)
    return ((value >> np.arange(15, -1, -1)) & 1).astype(np.uint8)


def attach_crc(bits: np.ndarray) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    return np.concatenate([bits, crc16(bits)])


def check_crc(bits_with_crc: np.ndarray) -> bool:
    b = np.asarray(bits_with_crc, dtype=np.uint8)
    return bool(np.array_equal(crc16(b[:-CRC_BITS]), b[-CRC_BITS:]))


@dataclass(frozen=True, eq=False)
class LDPCCode:
    n: int
    k: int
    seed: int = 0
    # edge lists sorted by check node
    check_of_edge: np.ndarray = field(init=False, repr=False)
    var_of_edge: np.ndarray = field(init=False, repr=False)
    check_starts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.k < self.n:
            raise CodeConfigError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        m = self.n - self.k
        rng = np.random.default_rng([self.seed, self.n, self.k])
        deg = min(INFO_DEGREE, m)
        # balanced sockets: every check gets ~deg*k/m info edges
        sockets = np.resize(np.arange(m), deg * self.k)
        rows = rng.permutation(sockets).reshape(self.k, deg)
        # resolve repeated checks inside one column
        for j in range(self.k):
            r = rows[j]
            if np.unique(r).size < deg:
                rows[j] = rng.choice(m, size=deg, replace=False)
        info_checks = rows.ravel()
        info_vars = np.repeat(np.arange(self.k), deg)
        par = np.arange(m)
        acc_checks = np.concatenate([par, par[1:]])
        acc_vars = np.concatenate([self.k + par, self.k + par[:-1]])
        chk = np.concatenate([info_checks, acc_checks])
        var = np.concatenate([info_vars, acc_vars])
        order = np.lexsort((var, chk))
        chk, var = chk[order], var[order]
        starts = np.flatnonzero(np.r_[True, chk[1:] != chk[:-1]])
        object.__setattr__(self, "check_of_edge", chk)
        object.__setattr__(self, "var_of_edge", var)
        object.__setattr__(self, "check_starts", starts)

    @property
    def m(self) -> int:
        return self.n - self.k

    @property
    def rate(self) -> float:
        return self.k / self.n

    def syndrome(self, codeword: np.ndarray) -> np.ndarray:
        c = np.asarray(codeword, dtype=np.int64)
        return np.add.reduceat(c[self.var_of_edge], self.check_starts) & 1

    def encode(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.uint8).reshape(-1)
        if u.size != self.k:
            raise CodeConfigError(f"expected {self.k} information bits, got {u.size}")
        info_edge = self.var_of_edge < self.k
        s = np.zeros(self.m, dtype=np.int64)
        np.add.at(s, self.check_of_edge[info_edge], u[self.var_of_edge[info_edge]])
        p = np.cumsum(s) & 1
        return np.concatenate([u, p.astype(np.uint8)])

    def decode(self, llr: np.ndarray, max_iter: int = 50) -> tuple[np.ndarray, int, bool]:
        """Normalized min-sum. Returns (codeword bits, iterations used, syndrome ok)."""
        llr = np.asarray(llr, dtype=float).reshape(-1)
        if llr.size != self.n:
            raise CodeConfigError(f"expected {self.n} LLRs, got {llr.size}")
        chk, var, starts = self.check_of_edge, self.var_of_edge, self.check_starts
        c2v = np.zeros(chk.size)
        total = llr.copy()
        hard = (total < 0).astype(np.int64)
        for it in range(1, max_iter + 1):
            v2c = total[var] - c2v
            mag = np.abs(v2c)
            neg = v2c < 0
            min1 = np.minimum.reduceat(mag, starts)
            is_min = mag == min1[chk]
            n_min = np.add.reduceat(is_min.astype(np.int64), starts)
            min2 = np.minimum.reduceat(np.where(is_min, np.inf, mag), starts)
            excl = np.where(is_min & (n_min[chk] == 1), min2[chk], min1[chk])
            excl = np.where(np.isfinite(excl), excl, 0.0)
            parity = np.add.reduceat(neg.astype(np.int64), starts) & 1
            sign = np.where(parity[chk] ^ neg, -1.0, 1.0)
            c2v = MINSUM_SCALE * sign * excl
            total = llr + np.bincount(var, weights=c2v, minlength=self.n)
            hard = (total < 0).astype(np.int64)
            if not np.any(np.add.reduceat(hard[var], starts) & 1):
                return hard.astype(np.uint8), it, True
        return hard.astype(np.uint8), max_iter, False


@lru_cache(maxsize=256)
def code_for(n: int, k: int) -> LDPCCode:
    return LDPCCode(n, k)


def info_length(n_coded: int, rate: Fraction | float) -> int:
    """Information bits (before CRC) carried by ``n_coded`` bits at ``rate``."""
    return int(np.floor(n_coded * float(rate) + 1e-9)) - CRC_BITS


def encode(bits: np.ndarray, rate: Fraction | float, n_coded: int | None = None) -> np.ndarray:
    """Attach CRC-16 and encode to ``n_coded`` bits (default ``ceil(len(bits+crc) / rate)``)."""
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    if not 0 < float(rate) < 1:
        raise CodeConfigError(f"unsupported rate {rate}")
    k = bits.size + CRC_BITS
    if n_coded is None:
        # smallest n with floor(n * rate) == k, so decode recovers the same k
        n_coded = int(np.ceil(k / float(rate) - 1e-9))
    return code_for(n_coded, k).encode(attach_crc(bits))


def decode(llr: np.ndarray, rate: Fraction | float, max_iter: int = 50) -> tuple[np.ndarray, bool]:
    """Decode ``len(llr)`` coded bits; returns (information bits, crc_ok)."""
    if not 0 < float(rate) < 1:
        raise CodeConfigError(f"unsupported rate {rate}")
    llr = np.asarray(llr, dtype=float).reshape(-1)
    n = llr.size
    k = info_length(n, rate) + CRC_BITS
    word, _, _ = code_for(n, k).decode(llr, max_iter)
    u = word[:k]
    return u[:-CRC_BITS], check_crc(u)
