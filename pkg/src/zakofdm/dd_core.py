"""Discrete Zak-domain signal representation.

Critically sampled delay-Doppler (DD) grid with ``M`` delay bins and ``N``
Doppler bins. Time-domain signals are sampled at ``B = M / tau_p`` and hold
one period of ``M * N`` samples.

Conventions used throughout the package:

* ``inverse_zak``: ``s[k + n*M] = N**-0.5 * sum_l X[k, l] exp(+j 2 pi n l / N)``
* quasi-periodic extension: ``X[k + n*M, l + m*N] = X[k, l] exp(+j 2 pi n l / N)``
* twisted convolution:
  ``y[k, l] = sum h[k', l'] x_ext[k - k', l - l'] exp(+j 2 pi l' (k - k') / (M N))``

With these choices a path with integer delay ``d`` samples and Doppler
``l'`` bins acting on the periodic time signal is exactly the filter tap
``h[d, l']``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import scipy.sparse as sp


class DimensionError(ValueError):
    """Raised when array shapes or grids do not agree."""


@dataclass(frozen=True)
class DDGrid:
    """Zak-OTFS numerology.

    Attributes:
        M: number of delay bins.
        N: number of Doppler bins.
        tau_p: delay period in seconds.
        nu_p: Doppler period in Hz; ``tau_p * nu_p == 1``.
    """

    M: int
    N: int
    tau_p: float
    nu_p: float

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"M and N must be positive, got M={self.M}, N={self.N}")
        if self.tau_p <= 0 or self.nu_p <= 0:
            raise ValueError("periods must be positive")
        if abs(self.tau_p * self.nu_p - 1.0) > 1e-12:
            raise ValueError(f"tau_p * nu_p must equal 1, got {self.tau_p * self.nu_p!r}")

    @classmethod
    def from_periods(cls, M: int, N: int, nu_p: float) -> "DDGrid":
        return cls(M, N, 1.0 / nu_p, nu_p)

    @classmethod
    def from_bandwidth(cls, bandwidth: float, duration: float, nu_p: float) -> "DDGrid":
        """Grid for a ``bandwidth x duration`` resource, snapping ``nu_p`` so M, N are integers.

        ``M = round(bandwidth / nu_p)`` and the Doppler period is recomputed
        as ``bandwidth / M``; ``N = round(nu_p * duration)``.
        """
        M = max(1, int(round(bandwidth / nu_p)))
        nu = bandwidth / M
        N = max(1, int(round(nu * duration)))
        return cls(M, N, 1.0 / nu, nu)

    @property
    def B(self) -> float:
        return self.M / self.tau_p

    @property
    def T(self) -> float:
        return self.N * self.tau_p

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def delay_resolution(self) -> float:
        return self.tau_p / self.M

    @property
    def doppler_resolution(self) -> float:
        return self.nu_p / self.N


@dataclass(frozen=True, eq=False)
class DDFrame:
    """An ``M x N`` array of DD symbols over the fundamental domain."""

    grid: DDGrid
    symbols: np.ndarray

    def __post_init__(self):
        sym = np.asarray(self.symbols, dtype=complex)
        if sym.shape != (self.grid.M, self.grid.N):
            raise DimensionError(
                f"symbols shape {sym.shape} does not match grid ({self.grid.M}, {self.grid.N})"
            )
        object.__setattr__(self, "symbols", sym)

    @classmethod
    def zeros(cls, grid: DDGrid) -> "DDFrame":
        return cls(grid, np.zeros((grid.M, grid.N), dtype=complex))

    @classmethod
    def impulse(cls, grid: DDGrid, k: int, l: int, amplitude: complex = 1.0) -> "DDFrame":
        x = np.zeros((grid.M, grid.N), dtype=complex)
        x[k % grid.M, l % grid.N] = amplitude
        return cls(grid, x)

    def extended_at(self, k: int, l: int) -> complex:
        """Value at an arbitrary integer DD index under quasi-periodic extension."""
        n, k0 = divmod(k, self.grid.M)
        l0 = l % self.grid.N
        return self.symbols[k0, l0] * np.exp(2j * np.pi * n * l0 / self.grid.N)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.symbols) ** 2))


@dataclass(frozen=True, eq=False)
class DDFilter:
    """Sparse DD filter: integer (delay tap, Doppler tap) -> complex gain.

    Delay taps may be negative for non-causal pulse-shaping filters.
    """

    grid: DDGrid
    taps: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    @classmethod
    def identity(cls, grid: DDGrid) -> "DDFilter":
        return cls(grid, {(0, 0): 1.0 + 0j})

    @property
    def k_range(self) -> tuple[int, int]:
        ks = [k for k, _ in self.taps] or [0]
        return min(ks), max(ks)

    @property
    def l_range(self) -> tuple[int, int]:
        ls = [l for _, l in self.taps] or [0]
        return min(ls), max(ls)

    def is_crystallized(self) -> bool:
        """True if the support fits inside one period along both axes."""
        k_lo, k_hi = self.k_range
        l_lo, l_hi = self.l_range
        l_max = max(abs(l_lo), abs(l_hi))
        return (k_hi - k_lo) < self.grid.M and 2 * l_max + 1 <= self.grid.N

    def energy(self) -> float:
        return float(sum(abs(g) ** 2 for g in self.taps.values()))

    def as_array(self, k_lo: int, k_hi: int, l_lo: int, l_hi: int) -> np.ndarray:
        out = np.zeros((k_hi - k_lo + 1, l_hi - l_lo + 1), dtype=complex)
        for (k, l), g in self.taps.items():
            if k_lo <= k <= k_hi and l_lo <= l <= l_hi:
                out[k - k_lo, l - l_lo] += g
        return out

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        """Sparse ``MN x MN`` matrix of the twisted convolution on flattened frames."""
        M, N = self.grid.M, self.grid.N
        MN = M * N
        if not self.taps:
            return sp.csr_matrix((MN, MN), dtype=complex)
        kk, ll = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
        dst = (kk * N + ll).ravel()
        rows, cols, vals = [], [], []
        for (dk, dl), g in self.taps.items():
            if g == 0:
                continue
            ks = kk - dk
            n, k0 = np.divmod(ks, M)
            l0 = np.mod(ll - dl, N)
            phase = np.exp(2j * np.pi * (n * l0 / N + dl * ks / MN))
            rows.append(dst)
            cols.append((k0 * N + l0).ravel())
            vals.append((g * phase).ravel())
        if not rows:
            return sp.csr_matrix((MN, MN), dtype=complex)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(MN, MN),
        )
        return mat.tocsr()

    @cached_property
    def adjoint_matrix(self) -> sp.csr_matrix:
        return self.matrix.conj().T.tocsr()


def _check_grid(a: DDGrid, b: DDGrid) -> None:
    if a != b:
        raise DimensionError(f"grid mismatch: {a} vs {b}")


def inverse_zak(frame: DDFrame) -> np.ndarray:
    """Synthesize the length-``MN`` time signal of a DD frame (unitary)."""
    N = frame.grid.N
    # s[k + nM] = sqrt(N) * ifft over l of X[k, :]
    s = np.fft.ifft(frame.symbols, axis=1) * math.sqrt(N)
    return s.T.reshape(-1)


def forward_zak(s: np.ndarray, grid: DDGrid) -> DDFrame:
    """Discrete Zak transform of one period of a time signal."""
    s = np.asarray(s, dtype=complex)
    if s.ndim != 1 or s.size != grid.size:
        raise DimensionError(f"expected length {grid.size}, got shape {s.shape}")
    S = s.reshape(grid.N, grid.M).T
    return DDFrame(grid, np.fft.fft(S, axis=1) / math.sqrt(grid.N))


def twisted_convolve(h: DDFilter, x: DDFrame) -> DDFrame:
    _check_grid(h.grid, x.grid)
    y = h.matrix @ x.symbols.reshape(-1)
    return DDFrame(x.grid, y.reshape(x.grid.M, x.grid.N))


def twisted_adjoint(h: DDFilter, y: DDFrame) -> DDFrame:
    """Adjoint of ``twisted_convolve(h, .)`` under the fundamental-domain inner product."""
    _check_grid(h.grid, y.grid)
    x = h.adjoint_matrix @ y.symbols.reshape(-1)
    return DDFrame(y.grid, x.reshape(y.grid.M, y.grid.N))


def compose_filters(h2: DDFilter, h1: DDFilter) -> DDFilter:
    """Twisted product filter equivalent to applying ``h1`` then ``h2``.

    ``(h2 * h1)[k, l] = sum h2[k2, l2] h1[k - k2, l - l2] exp(j 2 pi l2 (k - k2) / MN)``.
    Taps are not reduced modulo the periods.
    """
    _check_grid(h1.grid, h2.grid)
    MN = h1.grid.size
    out: dict[tuple[int, int], complex] = {}
    for (k2, l2), g2 in h2.taps.items():
        for (k1, l1), g1 in h1.taps.items():
            key = (k1 + k2, l1 + l2)
            out[key] = out.get(key, 0j) + g2 * g1 * np.exp(2j * np.pi * l2 * k1 / MN)
    return DDFilter(h1.grid, out)


TRUNCATION = 1e-6


def gauss_sinc_filter(
    grid: DDGrid,
    alpha_tau: float = 0.01,
    alpha_nu: float = 0.01,
    oversample: int = 1,
) -> DDFilter:
    """Separable Gaussian-windowed sinc pulse on the DD lattice.

    Taps are ``w(k/os) * w(l/os)`` with ``w(x) = sinc(x) exp(-alpha pi x^2)``,
    truncated below ``1e-6`` of the peak and normalized to unit peak. With
    ``oversample=1`` the sinc zeros fall on every nonzero tap, so the result
    is the identity filter.
    """
    if alpha_tau <= 0 or alpha_nu <= 0:
        raise ValueError("alpha parameters must be positive")
    if oversample < 1:
        raise ValueError("oversample must be >= 1")

    def one_axis(alpha: float) -> tuple[np.ndarray, np.ndarray]:
        # beyond this radius the Gaussian alone is under the threshold
        radius = math.sqrt(-math.log(TRUNCATION) / (alpha * math.pi))
        n = int(math.ceil(radius * oversample)) + 1
        idx = np.arange(-n, n + 1)
        x = idx / oversample
        w = np.sinc(x) * np.exp(-alpha * math.pi * x**2)
        return idx, w

    kt, wt = one_axis(alpha_tau)
    ln, wn = one_axis(alpha_nu)
    w = np.outer(wt, wn)
    peak = np.max(np.abs(w))
    keep = np.abs(w) >= TRUNCATION * peak
    taps = {
        (int(kt[i]), int(ln[j])): complex(w[i, j] / peak)
        for i, j in zip(*np.nonzero(keep))
    }
    return DDFilter(grid, taps)
