"""Doubly-spread multipath channels: time-domain path application and the effective DD response."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dd_core import DDFilter, DDGrid, forward_zak, inverse_zak, twisted_convolve

# ITU-R Vehicular-A power-delay profile
VEH_A_DELAYS = np.array([0.0, 0.31, 0.71, 1.09, 1.73, 2.51]) * 1e-6
VEH_A_POWERS_DB = np.array([0.0, -1.0, -9.0, -10.0, -15.0, -20.0])


@dataclass(frozen=True)
class Path:
    gain: complex
    delay: float
    doppler: float

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError(f"path delay must be non-negative, got {self.delay}")


@dataclass(frozen=True)
class PathSet:
    paths: tuple[Path, ...]

    @classmethod
    def single(cls, gain: complex = 1.0, delay: float = 0.0, doppler: float = 0.0) -> "PathSet":
        return cls((Path(complex(gain), delay, doppler),))

    @property
    def tau_max(self) -> float:
        return max((p.delay for p in self.paths), default=0.0)

    @property
    def nu_max(self) -> float:
        return max((abs(p.doppler) for p in self.paths), default=0.0)

    @property
    def power(self) -> float:
        return float(sum(abs(p.gain) ** 2 for p in self.paths))

    def normalized(self) -> "PathSet":
        scale = 1.0 / math.sqrt(self.power)
        return PathSet(tuple(Path(p.gain * scale, p.delay, p.doppler) for p in self.paths))

    def __len__(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level as total transmit power to noise power ratio.

    ``snr_db = math.inf`` disables noise.
    """

    snr_db: float
    seed: int = 0


def veh_a_paths(
    nu_max: float,
    rng_seed: int | np.random.SeedSequence | np.random.Generator,
    tau_max: float | None = None,
    doppler_model: str = "jakes",
) -> PathSet:
    """Draw one Veh-A realization.

    Delays are scaled linearly so the largest equals ``tau_max`` (the native
    profile when ``None``); ``tau_max == 0`` collapses to a single path. Each
    path gets a uniform random phase and Doppler ``nu_max * cos(theta)``
    (``doppler_model="jakes"``) or ``nu_max`` with a random sign
    (``"max"``).
    """
    if nu_max < 0:
        raise ValueError("nu_max must be non-negative")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if tau_max is None:
        delays = VEH_A_DELAYS
        powers_db = VEH_A_POWERS_DB
    elif tau_max == 0:
        delays = np.zeros(1)
        powers_db = np.zeros(1)
    else:
        delays = VEH_A_DELAYS * (tau_max / VEH_A_DELAYS[-1])
        powers_db = VEH_A_POWERS_DB
    n = delays.size
    theta = rng.uniform(0.0, 2 * np.pi, n)
    phase = rng.uniform(0.0, 2 * np.pi, n)
    if doppler_model == "jakes":
        dopplers = nu_max * np.cos(theta)
    elif doppler_model == "max":
        dopplers = nu_max * np.where(np.cos(theta) >= 0, 1.0, -1.0)
    else:
        raise ValueError(f"unknown doppler model {doppler_model!r}")
    amps = np.sqrt(10.0 ** (powers_db / 10.0))
    gains = amps * np.exp(1j * phase)
    paths = tuple(Path(complex(g), float(d), float(v)) for g, d, v in zip(gains, delays, dopplers))
    return PathSet(paths).normalized()


def apply_paths(
    s: np.ndarray,
    sample_rate: float,
    paths: PathSet,
    oversample: int = 4,
    periodic: bool = False,
) -> np.ndarray:
    """``y[n] = sum_i g_i s(n/fs - tau_i) exp(j 2 pi nu_i (n/fs - tau_i))``.

    Fractional delays use band-limited (linear-phase FFT) interpolation. With
    ``periodic=False`` the signal is zero before ``n = 0`` and the FFT buffer
    is zero-padded to ``oversample`` times the input length so that
    integer delays are exact shifts; the output is truncated to the input
    length. With ``periodic=True`` the input is one period of a periodic
    signal (the Zak-OTFS model) and delays act cyclically.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    s = np.asarray(s, dtype=complex)
    L = s.size
    if periodic:
        L_fft = L
    else:
        L_fft = max(oversample * L, L + int(math.ceil(paths.tau_max * sample_rate)) + 1)
    S = np.fft.fft(s, L_fft)
    f = np.fft.fftfreq(L_fft, d=1.0 / sample_rate)
    t = np.arange(L) / sample_rate
    y = np.zeros(L, dtype=complex)
    for p in paths.paths:
        if p.gain == 0:
            continue
        delayed = np.fft.ifft(S * np.exp(-2j * np.pi * f * p.delay))[:L]
        y += p.gain * delayed * np.exp(2j * np.pi * p.doppler * (t - p.delay))
    return y


def noise_variance(snr_db: float, signal_power_ref: float = 1.0) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return signal_power_ref / 10.0 ** (snr_db / 10.0)


def add_awgn(s: np.ndarray, noise: NoiseSpec, signal_power_ref: float = 1.0) -> np.ndarray:
    """Add circular complex Gaussian noise of variance ``P_ref / 10^(snr/10)`` per sample."""
    if signal_power_ref <= 0:
        raise ValueError("signal_power_ref must be positive")
    s = np.asarray(s, dtype=complex)
    var = noise_variance(noise.snr_db, signal_power_ref)
    if var == 0.0:
        return s.copy()
    rng = np.random.default_rng(noise.seed)
    w = rng.standard_normal((2,) + s.shape)
    return s + math.sqrt(var / 2) * (w[0] + 1j * w[1])


def _gauss_sinc(x: np.ndarray, alpha: float) -> np.ndarray:
    return np.sinc(x) * np.exp(-alpha * np.pi * x**2)


def effective_dd_filter(
    paths: PathSet,
    grid: DDGrid,
    alpha_tau: float = 0.01,
    alpha_nu: float = 0.01,
    rel_threshold: float = 1e-6,
) -> DDFilter:
    """Sampled end-to-end DD response of ``paths`` seen through Gauss-sinc pulses.

    ``h[k, l] = sum_i g_i exp(j 2 pi nu_i (k/B - tau_i)) w(k - B tau_i; a_tau) w(l - T nu_i; a_nu)``
    with ``w(x; a) = sinc(x) exp(-a pi x^2)``. Paths on integer bins map to
    single taps. Taps may fall outside the fundamental domain; twisted
    convolution then folds them back with the quasi-periodic phase.
    """
    B, T = grid.B, grid.T
    r_tau = int(np.ceil(np.sqrt(-np.log(rel_threshold) / (alpha_tau * np.pi)))) + 1
    r_nu = int(np.ceil(np.sqrt(-np.log(rel_threshold) / (alpha_nu * np.pi)))) + 1
    d = np.array([p.delay for p in paths.paths]) * B
    v = np.array([p.doppler for p in paths.paths]) * T
    ks = np.arange(int(np.floor(d.min())) - r_tau, int(np.ceil(d.max())) + r_tau + 1)
    ls = np.arange(int(np.floor(v.min())) - r_nu, int(np.ceil(v.max())) + r_nu + 1)
    H = np.zeros((ks.size, ls.size), dtype=complex)
    for p, di, vi in zip(paths.paths, d, v):
        along_k = p.gain * np.exp(2j * np.pi * p.doppler * (ks / B - p.delay)) * _gauss_sinc(ks - di, alpha_tau)
        H += np.outer(along_k, _gauss_sinc(ls - vi, alpha_nu))
    keep = np.abs(H) >= rel_threshold * np.abs(H).max()
    taps = {(int(ks[i]), int(ls[j])): complex(H[i, j]) for i, j in zip(*np.nonzero(keep))}
    return DDFilter(grid, taps)


def apply_dd_channel(s: np.ndarray, grid: DDGrid, paths: PathSet, alpha_tau: float = 0.01, alpha_nu: float = 0.01) -> np.ndarray:
    """Pass one period of a Zak-OTFS time signal through ``paths`` via its effective DD filter."""
    h = effective_dd_filter(paths, grid, alpha_tau, alpha_nu)
    return inverse_zak(twisted_convolve(h, forward_zak(s, grid)))
