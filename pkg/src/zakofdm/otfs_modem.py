"""Zak-OTFS transmitter and receiver with a point pilot.

Frame layout: the pilot sits at the centre of the grid inside a delay strip
that spans the whole Doppler period. The strip is flanked by guard strips,
and all remaining DD positions carry data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsmr

from .dd_core import (
    DDFilter,
    DDFrame,
    DDGrid,
    DimensionError,
    gauss_sinc_filter,
    inverse_zak,
    twisted_convolve,
)

VARIANT_WIDTH = {"narrow": 1, "medium": 2, "wide": 4}


class InfeasibleLayoutError(ValueError):
    pass


class EstimationWindowError(ValueError):
    pass


def k_max_for(grid: DDGrid, tau_max: float) -> int:
    """Delay taps spanned by the channel, ``ceil(B * tau_max)``."""
    # guard against B*tau_max landing a hair above an integer
    return int(math.ceil(grid.B * tau_max - 1e-9))


def l_max_for(grid: DDGrid, nu_max: float) -> int:
    """Doppler read half-width ``ceil(T * nu_max) + 1``, capped to fit in one period."""
    l_max = int(math.ceil(grid.T * nu_max - 1e-9)) + 1
    return min(l_max, (grid.N - 1) // 2)


def tail_for(alpha: float, level: float = 1e-2) -> int:
    """Delay/Doppler bins a Gauss-sinc pulse spills past a path before its
    envelope ``exp(-alpha pi x^2) / (pi x)`` drops below ``level``."""
    if alpha <= 0 or not 0 < level < 1:
        raise ValueError("need alpha > 0 and 0 < level < 1")
    m = 1
    while math.exp(-alpha * math.pi * m * m) / (math.pi * m) > level:
        m += 1
    return m


def full_doppler_window(grid: DDGrid) -> tuple[int, int]:
    """``(l_min, l_max)`` covering one whole Doppler period around the pilot."""
    return -((grid.N - 1) // 2), grid.N // 2


def crystallization_check(tau_max: float, nu_max: float, grid: DDGrid) -> bool:
    if tau_max < 0 or nu_max < 0:
        raise ValueError("spreads must be non-negative")
    return grid.tau_p > tau_max and grid.nu_p > nu_max


@dataclass(frozen=True, eq=False)
class FrameLayout:
    """Partition of the DD grid into pilot, pilot region, guard and data.

    Regions are boolean ``M x N`` masks. ``strip`` holds the delay offsets
    ``(lo, hi)`` of the pilot region relative to the pilot column.
    """

    grid: DDGrid
    pilot_pos: tuple[int, int]
    pilot_mask: np.ndarray
    guard_mask: np.ndarray
    data_mask: np.ndarray
    variant: str
    k_max: int
    strip: tuple[int, int]
    tail: int = 0

    @property
    def pilot_region(self) -> set[tuple[int, int]]:
        return {tuple(map(int, ix)) for ix in np.argwhere(self.pilot_mask)}

    @property
    def guard_region(self) -> set[tuple[int, int]]:
        return {tuple(map(int, ix)) for ix in np.argwhere(self.guard_mask)}

    @property
    def data_region(self) -> set[tuple[int, int]]:
        return {tuple(map(int, ix)) for ix in np.argwhere(self.data_mask)}

    @property
    def data_index(self) -> np.ndarray:
        """Flat (row-major) indices of data positions; defines data-region order."""
        return np.flatnonzero(self.data_mask.reshape(-1))

    @property
    def n_data(self) -> int:
        return int(self.data_mask.sum())

    @property
    def overhead(self) -> float:
        return 1.0 - self.n_data / self.grid.size

    def window_columns(self) -> np.ndarray:
        """Delay columns (absolute) belonging to the pilot strip or guards."""
        cols = np.flatnonzero((self.pilot_mask | self.guard_mask).any(axis=1))
        return np.union1d(cols, [self.pilot_pos[0]])


def build_layout(
    grid: DDGrid,
    tau_max: float,
    variant: str = "narrow",
    k_max: int | None = None,
    tail: int = 0,
) -> FrameLayout:
    """Point-pilot frame with a full-height pilot strip and guard strips.

    The pilot response occupies delay offsets ``[-tail, k_max + tail]``, a
    span ``K = k_max + 2 tail``. The pilot strip covers ``[lo, hi]`` with
    ``hi - lo = width * K`` for width ``1, 2, 4`` (narrow, medium, wide); the
    extra width is split between both sides. Guards are ``K`` columns on
    each side.
    """
    if variant not in VARIANT_WIDTH:
        raise ValueError(f"unknown layout variant {variant!r}")
    M, N = grid.M, grid.N
    if k_max is None:
        k_max = k_max_for(grid, tau_max)
    k_p, l_p = M // 2, N // 2

    if tail < 0:
        raise ValueError("tail must be non-negative")
    span = k_max + 2 * tail
    width = min(VARIANT_WIDTH[variant] * span + 1, M)
    extra = max(width - (span + 1), 0)
    lo = -tail - extra // 2
    hi = lo + width - 1
    guard = span

    # offsets wrap around the delay period
    in_strip = np.zeros(M, dtype=bool)
    in_strip[(k_p + np.arange(lo, hi + 1)) % M] = True
    in_guard = np.zeros(M, dtype=bool)
    in_guard[(k_p + np.arange(lo - guard, lo)) % M] = True
    in_guard[(k_p + np.arange(hi + 1, hi + guard + 1)) % M] = True
    in_guard &= ~in_strip

    pilot_mask = np.repeat(in_strip[:, None], N, axis=1)
    pilot_mask[k_p, l_p] = False
    guard_mask = np.repeat(in_guard[:, None], N, axis=1)
    data_mask = ~(pilot_mask | guard_mask)
    data_mask[k_p, l_p] = False
    if not data_mask.any():
        raise InfeasibleLayoutError(
            f"no data positions left on a {M}x{N} grid with k_max={k_max} ({variant})"
        )
    return FrameLayout(grid, (k_p, l_p), pilot_mask, guard_mask, data_mask, variant, k_max, (lo, hi), tail)


@dataclass(frozen=True, eq=False)
class OTFSConfig:
    grid: DDGrid
    layout: FrameLayout
    pdr_db: float = 0.0
    mcs: object = None
    alpha_tau: float = 0.01
    alpha_nu: float = 0.01
    # "symbol": PDR relative to one data symbol; "frame": relative to all data energy
    pdr_mode: str = "symbol"

    def __post_init__(self):
        if self.pdr_mode not in ("symbol", "frame"):
            raise ValueError(f"unknown pdr_mode {self.pdr_mode!r}")

    @property
    def tx_filter(self) -> DDFilter:
        return gauss_sinc_filter(self.grid, self.alpha_tau, self.alpha_nu)

    def amplitudes(self) -> tuple[float, float]:
        """(pilot amplitude, data amplitude) for unit mean power per sample.

        Data symbols are assumed unit average power. Frame energy is ``M*N``.
        """
        d = self.layout.n_data
        ratio = 10.0 ** (self.pdr_db / 10.0)
        if self.pdr_mode == "frame":
            ratio *= d
        e_data = self.grid.size / (d + ratio)
        return math.sqrt(ratio * e_data), math.sqrt(e_data)


def build_frame(cfg: OTFSConfig, data_symbols: np.ndarray) -> DDFrame:
    data_symbols = np.asarray(data_symbols, dtype=complex).reshape(-1)
    layout = cfg.layout
    if data_symbols.size != layout.n_data:
        raise DimensionError(f"expected {layout.n_data} data symbols, got {data_symbols.size}")
    a_pilot, a_data = cfg.amplitudes()
    x = np.zeros(cfg.grid.size, dtype=complex)
    x[layout.data_index] = a_data * data_symbols
    k_p, l_p = layout.pilot_pos
    x[k_p * cfg.grid.N + l_p] = a_pilot
    return DDFrame(cfg.grid, x.reshape(cfg.grid.M, cfg.grid.N))


def modulate(cfg: OTFSConfig, data_symbols: np.ndarray) -> np.ndarray:
    """DD frame -> transmit filter -> time signal with mean power exactly 1."""
    frame = twisted_convolve(cfg.tx_filter, build_frame(cfg, data_symbols))
    s = inverse_zak(frame)
    return s / math.sqrt(np.mean(np.abs(s) ** 2))


def _read_extended(frame: DDFrame, ks: np.ndarray, ls: np.ndarray) -> np.ndarray:
    M, N = frame.grid.M, frame.grid.N
    n, k0 = np.divmod(ks, M)
    l0 = np.mod(ls, N)
    return frame.symbols[k0, l0] * np.exp(2j * np.pi * n * l0 / N)


def estimate_channel(
    rx_frame: DDFrame,
    layout: FrameLayout,
    pilot_amplitude: float,
    k_max: int,
    l_max: int,
    k_min: int = 0,
    threshold: float = 0.0,
    l_min: int | None = None,
) -> DDFilter:
    """Read the effective DD filter off the received pilot.

    ``h[k, l] = y(k_p + k, l_p + l) exp(-j 2 pi l k_p / MN) / A`` for
    ``k in [k_min, k_max]`` and ``l in [l_min, l_max]`` (``l_min`` defaults
    to ``-l_max``). Taps with power below ``threshold`` are dropped.
    """
    grid = rx_frame.grid
    M, N = grid.M, grid.N
    if l_min is None:
        l_min = -l_max
    if l_max - l_min + 1 > N or l_min > 0 or l_max < 0:
        raise EstimationWindowError(f"Doppler window [{l_min}, {l_max}] does not fit in N={N}")
    k_p, l_p = layout.pilot_pos
    allowed = set(layout.window_columns().tolist())
    needed = {(k_p + k) % M for k in range(k_min, k_max + 1)}
    if not needed <= allowed or k_max - k_min + 1 > M:
        raise EstimationWindowError(
            f"delay window [{k_min}, {k_max}] leaves the pilot and guard region"
        )
    kk, ll = np.meshgrid(np.arange(k_min, k_max + 1), np.arange(l_min, l_max + 1), indexing="ij")
    vals = _read_extended(rx_frame, k_p + kk, l_p + ll)
    vals = vals * np.exp(-2j * np.pi * ll * k_p / grid.size) / pilot_amplitude
    keep = np.abs(vals) ** 2 > threshold
    taps = {
        (int(k), int(l)): complex(v)
        for k, l, v, ok in zip(kk.ravel(), ll.ravel(), vals.ravel(), keep.ravel())
        if ok
    }
    return DDFilter(grid, taps)


def cancel_pilot(rx_frame: DDFrame, h_est: DDFilter, layout: FrameLayout, pilot_amplitude: float) -> DDFrame:
    pilot = DDFrame.impulse(rx_frame.grid, *layout.pilot_pos, amplitude=pilot_amplitude)
    return DDFrame(rx_frame.grid, rx_frame.symbols - twisted_convolve(h_est, pilot).symbols)


class Equalized(NamedTuple):
    symbols: np.ndarray
    converged: bool
    iterations: int


def data_operator(h_est: DDFilter, layout: FrameLayout, data_amplitude: float = 1.0) -> LinearOperator:
    """Data symbols (data-region order) -> received DD samples, matrix-free."""
    grid = h_est.grid
    MN = grid.size
    idx = layout.data_index
    H, Hh = h_est.matrix, h_est.adjoint_matrix

    def matvec(v):
        x = np.zeros(MN, dtype=complex)
        x[idx] = data_amplitude * np.ravel(v)
        return H @ x

    def rmatvec(r):
        return data_amplitude * (Hh @ np.ravel(r))[idx]

    return LinearOperator((MN, idx.size), matvec=matvec, rmatvec=rmatvec, dtype=complex)


def lsmr_equalize(
    rx_frame: DDFrame,
    h_est: DDFilter,
    layout: FrameLayout,
    noise_var: float,
    max_iter: int = 200,
    tol: float = 1e-10,
    pilot_amplitude: float | None = None,
    data_amplitude: float = 1.0,
) -> Equalized:
    """Joint regularized least-squares detection of all data symbols.

    Minimizes ``|y - a H x|^2 + noise_var |x|^2`` over the data coordinates,
    where ``H`` is twisted convolution with ``h_est``. If ``pilot_amplitude``
    is given the predicted pilot response is subtracted first.
    """
    if pilot_amplitude is not None:
        rx_frame = cancel_pilot(rx_frame, h_est, layout, pilot_amplitude)
    op = data_operator(h_est, layout, data_amplitude)
    b = rx_frame.symbols.reshape(-1)
    x, istop, itn, *_ = lsmr(
        op, b, damp=math.sqrt(max(noise_var, 0.0)), atol=tol, btol=tol, maxiter=max_iter
    )
    return Equalized(x, istop not in (7,), int(itn))


def unbias(x_hat: np.ndarray) -> tuple[np.ndarray, float]:
    """Remove the LMMSE shrinkage and estimate the post-equalization SINR.

    For a converged LMMSE estimate of unit-power symbols ``E|x_hat|^2`` equals
    the shrinkage factor ``mu``; the unbiased estimate ``x_hat / mu`` has
    SINR ``mu / (1 - mu)``.
    """
    mu = float(np.mean(np.abs(x_hat) ** 2))
    mu = min(max(mu, 1e-6), 1.0 - 1e-6)
    return x_hat / mu, mu / (1.0 - mu)
