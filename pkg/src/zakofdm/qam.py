"""Gray-mapped square QAM with max-log soft demapping.

Bit convention: the first half of each symbol's bits selects the in-phase
level, the second half the quadrature level; bit 0 maps to the positive
side. QPSK ``00 -> (1 + 1j) / sqrt(2)``. LLRs are ``log P(b=0) / P(b=1)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

LLR_CLIP = 50.0


@lru_cache(maxsize=8)
def pam_levels(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray-labelled PAM with ``2**m`` levels: (amplitudes, bit labels [level, bit])."""
    n = 1 << m
    i = np.arange(n)
    amps = ((n - 1) - 2 * i).astype(float)
    gray = i ^ (i >> 1)
    bits = (gray[:, None] >> np.arange(m - 1, -1, -1)) & 1
    return amps, bits


def _scale(bps: int) -> float:
    # average power of a square QAM with unit spacing 2: 2 (M - 1) / 3
    return np.sqrt(2 * ((1 << bps) - 1) / 3)


@lru_cache(maxsize=8)
def constellation(bps: int) -> np.ndarray:
    """Points indexed by the integer formed from the symbol's bits (MSB first)."""
    if bps % 2 or bps < 2:
        raise ValueError(f"square QAM needs an even bits-per-symbol, got {bps}")
    m = bps // 2
    amps, bits = pam_levels(m)
    weights = 1 << np.arange(m - 1, -1, -1)
    label = bits @ weights
    lvl = np.empty(1 << m)
    lvl[label] = amps
    idx = np.arange(1 << bps)
    pts = (lvl[idx >> m] + 1j * lvl[idx & ((1 << m) - 1)]) / _scale(bps)
    pts.setflags(write=False)
    return pts


def qam_map(bits: np.ndarray, bps: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64).reshape(-1)
    if bits.size % bps:
        raise ValueError(f"{bits.size} bits is not a multiple of {bps}")
    idx = bits.reshape(-1, bps) @ (1 << np.arange(bps - 1, -1, -1))
    return constellation(bps)[idx]


def qam_demap(y: np.ndarray, sinr: np.ndarray | float, bps: int) -> np.ndarray:
    """Max-log LLRs for unbiased soft symbols with per-symbol SINR."""
    y = np.asarray(y, dtype=complex).reshape(-1)
    sinr = np.broadcast_to(np.asarray(sinr, dtype=float), y.shape)
    m = bps // 2
    amps, bits = pam_levels(m)
    amps = amps / _scale(bps)
    out = np.empty((y.size, bps))
    for part, offset in ((y.real, 0), (y.imag, m)):
        d2 = (part[:, None] - amps[None, :]) ** 2
        for b in range(m):
            one = bits[:, b] == 1
            out[:, offset + b] = d2[:, one].min(axis=1) - d2[:, ~one].min(axis=1)
    with np.errstate(invalid="ignore"):
        llr = out * sinr[:, None]
    llr = np.nan_to_num(llr, nan=0.0, posinf=LLR_CLIP, neginf=-LLR_CLIP)
    return np.clip(llr, -LLR_CLIP, LLR_CLIP).reshape(-1)
