"""CP-OFDM transceiver with Type-A style DMRS and per-subcarrier MMSE.

Resource grids are ``n_sub x n_symbols`` arrays. Data resource elements are
ordered frequency-first within each symbol, symbol by symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dd_core import DimensionError

# NR normal CP: 144 samples per 2048-point symbol at every numerology
NR_CP_RATIO = 9 / 128
SLOT_SYMBOLS = 14
# DMRS symbol positions inside a 14-symbol slot, by number of DMRS symbols
DMRS_POSITIONS = {1: (2,), 2: (2, 11), 3: (2, 7, 11), 4: (2, 5, 8, 11)}

_PILOT_SEED = 0x5EED


class ConfigError(ValueError):
    pass


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class DMRSPattern:
    time_positions: tuple[int, ...]
    freq_comb: int = 2
    freq_offset: int = 0

    def __post_init__(self):
        if self.freq_comb < 1:
            raise ValueError("freq_comb must be >= 1")
        if not 0 <= self.freq_offset < self.freq_comb:
            raise ValueError("freq_offset must lie in [0, freq_comb)")

    @classmethod
    def per_slot(cls, n_symbols: int, count: int, freq_comb: int = 2) -> "DMRSPattern":
        """``count`` DMRS symbols in every 14-symbol slot (count in 1..4)."""
        if count not in DMRS_POSITIONS:
            raise ConfigError(f"DMRS count must be 1..4, got {count}")
        pos = [
            s + p
            for s in range(0, n_symbols, SLOT_SYMBOLS)
            for p in DMRS_POSITIONS[count]
            if s + p < n_symbols
        ]
        if not pos:
            pos = [0]
        return cls(tuple(pos), freq_comb)

    def mask(self, n_sub: int, n_symbols: int) -> np.ndarray:
        m = np.zeros((n_sub, n_symbols), dtype=bool)
        for s in self.time_positions:
            if not 0 <= s < n_symbols:
                raise ConfigError(f"DMRS symbol {s} outside frame of {n_symbols} symbols")
            m[self.freq_offset :: self.freq_comb, s] = True
        return m


@dataclass(frozen=True)
class OFDMConfig:
    """One CP-OFDM frame.

    ``n_fft == n_sub`` is the critically sampled case; larger ``n_fft``
    leaves the extra bins empty and raises the sample rate to ``n_fft * delta_f``.
    """

    delta_f: float
    n_sub: int
    n_cp: int
    n_symbols: int
    dmrs: DMRSPattern
    boost_db: float = 0.0
    mcs: object = None
    n_fft: int | None = None

    def __post_init__(self):
        if self.n_fft is None:
            object.__setattr__(self, "n_fft", self.n_sub)
        if self.n_fft < self.n_sub:
            raise ConfigError("n_fft must be >= n_sub")
        if self.n_cp < 0:
            raise ConfigError("CP length must be non-negative")
        if self.n_cp > self.n_fft:
            raise ConfigError("CP longer than the OFDM symbol")
        if self.n_symbols < 1:
            raise ConfigError("need at least one OFDM symbol")

    @classmethod
    def nr(
        cls,
        bandwidth: float,
        duration: float,
        delta_f: float,
        dmrs_count: int = 1,
        boost_db: float = 0.0,
        mcs: object = None,
        critical: bool = False,
        t_cp: float | None = None,
    ) -> "OFDMConfig":
        """NR-like numerology on a ``bandwidth x duration`` resource.

        By default the FFT size is a power of two, at least 128, so the normal
        CP (9/128 of the body) is a whole number of samples and 14 symbols fill
        each slot. With ``critical=True`` the FFT has ``n_sub`` points and the
        CP is rounded up to whole samples.
        """
        n_sub = int(round(bandwidth / delta_f))
        if n_sub < 1:
            raise ConfigError("bandwidth narrower than one subcarrier")
        if t_cp is None:
            t_cp = NR_CP_RATIO / delta_f
        if critical:
            n_fft = n_sub
            n_cp = int(math.ceil(t_cp * n_sub * delta_f - 1e-9))
        else:
            n_fft = max(128, 1 << (n_sub - 1).bit_length())
            n_cp = int(math.ceil(t_cp * n_fft * delta_f - 1e-9))
        t_prb = t_cp + 1.0 / delta_f
        n_symbols = int(math.floor(duration / t_prb + 1e-9))
        dmrs = DMRSPattern.per_slot(n_symbols, dmrs_count)
        return cls(delta_f, n_sub, n_cp, n_symbols, dmrs, boost_db, mcs, n_fft)

    @property
    def sample_rate(self) -> float:
        return self.n_fft * self.delta_f

    @property
    def bandwidth(self) -> float:
        return self.n_sub * self.delta_f

    @property
    def t_cp(self) -> float:
        return self.n_cp / self.sample_rate

    @property
    def t_prb(self) -> float:
        return self.t_cp + 1.0 / self.delta_f

    @property
    def frame_length(self) -> int:
        return self.n_symbols * (self.n_fft + self.n_cp)

    @property
    def oversampling(self) -> float:
        return self.n_fft / self.n_sub

    @property
    def pilot_mask(self) -> np.ndarray:
        return self.dmrs.mask(self.n_sub, self.n_symbols)

    @property
    def data_index(self) -> np.ndarray:
        """Flat indices into ``grid.T.ravel()`` of data REs (frequency-first order)."""
        return np.flatnonzero(~self.pilot_mask.T.ravel())

    @property
    def n_data(self) -> int:
        return int((~self.pilot_mask).sum())


@lru_cache(maxsize=64)
def dmrs_sequence(n_sub: int, n_symbols: int) -> np.ndarray:
    """Known unit-modulus QPSK reference values for every RE."""
    rng = np.random.default_rng(_PILOT_SEED + 7919 * n_sub + n_symbols)
    b = rng.integers(0, 2, size=(2, n_sub, n_symbols))
    seq = ((1 - 2 * b[0]) + 1j * (1 - 2 * b[1])) / math.sqrt(2)
    seq.setflags(write=False)
    return seq


def cp_overhead(delta_f: float, t_cp: float) -> float:
    """Fraction of each symbol period spent on the cyclic prefix."""
    if delta_f <= 0 or t_cp < 0:
        raise ValueError("delta_f must be positive and t_cp non-negative")
    return t_cp / (t_cp + 1.0 / delta_f)


def zak_strip_overhead(strip_width: float, period: float) -> float:
    """Pilot plus guard strip overhead ``2 * width / period`` of a Zak-OTFS frame."""
    if strip_width < 0 or period <= 0:
        raise ValueError("width must be non-negative and period positive")
    if strip_width >= period:
        raise ConfigError(f"strip width {strip_width} does not fit in period {period}")
    return 2.0 * strip_width / period


def build_grid(cfg: OFDMConfig, data_symbols: np.ndarray) -> np.ndarray:
    data_symbols = np.asarray(data_symbols, dtype=complex).reshape(-1)
    if data_symbols.size != cfg.n_data:
        raise DimensionError(f"expected {cfg.n_data} data symbols, got {data_symbols.size}")
    pilots = cfg.pilot_mask
    X = np.where(pilots, dmrs_sequence(cfg.n_sub, cfg.n_symbols) * 10 ** (cfg.boost_db / 20), 0)
    flat = X.T.reshape(-1).copy()
    flat[cfg.data_index] = data_symbols
    return flat.reshape(cfg.n_symbols, cfg.n_sub).T


def ofdm_from_grid(cfg: OFDMConfig, X: np.ndarray, normalize: bool = True) -> np.ndarray:
    X = np.asarray(X, dtype=complex)
    if X.shape != (cfg.n_sub, cfg.n_symbols):
        raise DimensionError(f"grid shape {X.shape} != ({cfg.n_sub}, {cfg.n_symbols})")
    bins = np.zeros((cfg.n_fft, cfg.n_symbols), dtype=complex)
    bins[: cfg.n_sub] = X
    body = np.fft.ifft(bins, axis=0) * math.sqrt(cfg.n_fft)
    with_cp = np.concatenate([body[cfg.n_fft - cfg.n_cp :], body], axis=0)
    s = with_cp.T.reshape(-1)
    if normalize:
        power = np.mean(np.abs(s) ** 2)
        if power > 0:
            s = s / math.sqrt(power)
    return s


def modulate(cfg: OFDMConfig, data_symbols: np.ndarray) -> np.ndarray:
    """Map data and boosted DMRS, IFFT, prepend CP; mean sample power is exactly 1."""
    return ofdm_from_grid(cfg, build_grid(cfg, data_symbols))


def demodulate(cfg: OFDMConfig, rx: np.ndarray) -> np.ndarray:
    rx = np.asarray(rx, dtype=complex)
    if rx.size != cfg.frame_length:
        raise DimensionError(f"expected {cfg.frame_length} samples, got {rx.size}")
    sym = rx.reshape(cfg.n_symbols, cfg.n_fft + cfg.n_cp)[:, cfg.n_cp :].T
    return (np.fft.fft(sym, axis=0) / math.sqrt(cfg.n_fft))[: cfg.n_sub]


def _interp_linear(x: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    """Complex piecewise-linear interpolation with linear extrapolation at both ends."""
    if xp.size == 1:
        return np.full(x.shape, fp[0], dtype=complex)
    idx = np.clip(np.searchsorted(xp, x) - 1, 0, xp.size - 2)
    x0, x1 = xp[idx], xp[idx + 1]
    w = (x - x0) / (x1 - x0)
    return fp[idx] * (1 - w) + fp[idx + 1] * w


def estimate_grid_channel(Y: np.ndarray, dmrs: DMRSPattern, boost_db: float) -> np.ndarray:
    """LS at DMRS REs, linear in frequency (with extrapolation), then linear in time.

    Outside the first and last DMRS symbols the estimate is held constant.
    """
    n_sub, n_symbols = Y.shape
    if not dmrs.time_positions:
        raise EstimationError("pattern has no DMRS symbols")
    mask = dmrs.mask(n_sub, n_symbols)
    X = dmrs_sequence(n_sub, n_symbols) * 10 ** (boost_db / 20)
    sc = np.arange(n_sub)
    t_pos = np.array(sorted(dmrs.time_positions))
    H_p = np.empty((n_sub, t_pos.size), dtype=complex)
    for j, s in enumerate(t_pos):
        p = np.flatnonzero(mask[:, s])
        H_p[:, j] = _interp_linear(sc, p, Y[p, s] / X[p, s])
    if t_pos.size == 1:
        return np.repeat(H_p, n_symbols, axis=1)
    t = np.clip(np.arange(n_symbols), t_pos[0], t_pos[-1])
    return np.stack([_interp_linear(t, t_pos, H_p[m]) for m in range(n_sub)])


def mmse_equalize(Y: np.ndarray, H_hat: np.ndarray, noise_var: float, data_index: np.ndarray | None = None) -> np.ndarray:
    """Per-RE MMSE ``conj(H) Y / (|H|^2 + noise_var)`` at the data REs."""
    if Y.shape != H_hat.shape:
        raise DimensionError("grid and estimate shapes differ")
    den = np.abs(H_hat) ** 2 + noise_var
    with np.errstate(invalid="ignore", divide="ignore"):
        x = np.where(den > 0, np.conj(H_hat) * Y / den, 0)
    flat = x.T.reshape(-1)
    return flat if data_index is None else flat[data_index]


def mmse_soft(Y: np.ndarray, H_hat: np.ndarray, noise_var: float, data_index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased MMSE outputs and their SINR ``|H|^2 / noise_var`` at the data REs."""
    x = mmse_equalize(Y, H_hat, noise_var, data_index)
    g = (np.abs(H_hat) ** 2).T.reshape(-1)[data_index]
    mu = g / (g + noise_var) if noise_var > 0 else np.ones_like(g)
    with np.errstate(invalid="ignore", divide="ignore"):
        x_u = np.where(mu > 0, x / mu, 0)
        sinr = g / noise_var if noise_var > 0 else np.full_like(g, np.inf)
    return x_u, sinr


def ofdm_overhead(delta_f: float, t_cp: float, dmrs_symbols_per_slot: int, freq_comb: int = 2) -> float:
    """CP plus DMRS share of the time-frequency resource."""
    cp = cp_overhead(delta_f, t_cp)
    pilots = dmrs_symbols_per_slot / SLOT_SYMBOLS / freq_comb
    return cp + (1 - cp) * pilots


def symbol_channel_matrix(cfg: OFDMConfig, channel, symbol: int = 0) -> np.ndarray:
    """Frequency-domain ``n_sub x n_sub`` matrix seen by one OFDM symbol.

    ``channel`` maps a transmitted sample vector to the received one. Column
    ``m`` is the demodulated response to subcarrier ``m`` alone.
    """
    if not 0 <= symbol < cfg.n_symbols:
        raise ConfigError(f"symbol {symbol} outside frame of {cfg.n_symbols} symbols")
    G = np.empty((cfg.n_sub, cfg.n_sub), dtype=complex)
    for m in range(cfg.n_sub):
        X = np.zeros((cfg.n_sub, cfg.n_symbols), dtype=complex)
        X[m, symbol] = 1.0
        G[:, m] = demodulate(cfg, channel(ofdm_from_grid(cfg, X, normalize=False)))[:, symbol]
    return G


def ici_leakage(G: np.ndarray) -> float:
    """Off-diagonal share of the power in a per-symbol channel matrix."""
    total = float(np.sum(np.abs(G) ** 2))
    if total == 0:
        return 0.0
    return 1.0 - float(np.sum(np.abs(np.diag(G)) ** 2)) / total
