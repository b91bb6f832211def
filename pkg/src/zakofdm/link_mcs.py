"""Link-level Monte-Carlo: coded frames over Veh-A channels, BLER and effective SE."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

import numpy as np

from . import ldpc, ofdm_modem, otfs_modem
from .channel import (
    NoiseSpec,
    PathSet,
    add_awgn,
    apply_dd_channel,
    apply_paths,
    noise_variance,
    veh_a_paths,
)
from .dd_core import forward_zak
from .qam import qam_demap, qam_map

log = logging.getLogger(__name__)

BITS = {"QPSK": 2, "QAM16": 4, "QAM64": 6}


class LinkConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MCS:
    id: int
    modulation: str
    code_rate: Fraction

    def __post_init__(self):
        if self.modulation not in BITS:
            raise ValueError(f"unknown modulation {self.modulation!r}")
        if not 0 < self.code_rate < 1:
            raise ValueError("code rate must lie in (0, 1)")

    @property
    def bits_per_symbol(self) -> int:
        return BITS[self.modulation]

    @property
    def spectral_efficiency(self) -> float:
        return self.bits_per_symbol * float(self.code_rate)

    def __str__(self) -> str:
        return f"{self.id}:{self.modulation}-{self.code_rate}"


MCS_TABLE: tuple[MCS, ...] = tuple(
    MCS(i, mod, Fraction(r))
    for i, (mod, r) in enumerate(
        [
            ("QPSK", "1/3"),
            ("QPSK", "1/2"),
            ("QPSK", "2/3"),
            ("QAM16", "1/2"),
            ("QAM16", "2/3"),
            ("QAM16", "3/4"),
            ("QAM64", "2/3"),
            ("QAM64", "3/4"),
            ("QAM64", "5/6"),
        ]
    )
)


@dataclass(frozen=True)
class ChannelSpec:
    """Channel class for a link run.

    ``model="veh_a"`` draws a fresh Veh-A realization per frame, scaled to
    ``tau_max``; ``model="identity"`` is a single unit path.
    """

    tau_max: float = 0.0
    nu_max: float = 0.0
    snr_db: float = 12.0
    model: str = "veh_a"
    doppler_model: str = "jakes"
    oversample: int = 4

    def draw(self, rng: np.random.Generator) -> PathSet:
        if self.model == "identity":
            return PathSet.single()
        if self.model == "veh_a":
            return veh_a_paths(self.nu_max, rng, tau_max=self.tau_max, doppler_model=self.doppler_model)
        raise LinkConfigError(f"unknown channel model {self.model!r}")


@dataclass(frozen=True)
class LinkResult:
    waveform: str
    bler: float
    n_errors: int
    n_frames: int
    bler_ci: tuple[float, float]
    info_bits: int
    effective_se: float
    potential_se: float
    config: dict = field(default_factory=dict)
    stopped_early: bool = False

    @property
    def feasible(self) -> bool:
        return self.effective_se > 0


def wilson_interval(errors: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = errors / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    # the bounds are exactly 0 and 1 at the extremes; avoid rounding inside them
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True, eq=False)
class OTFSLink:
    """Zak-OTFS modem configuration plus receiver settings."""

    cfg: otfs_modem.OTFSConfig
    lsmr_max_iter: int = 200
    lsmr_tol: float = 1e-10
    # channel-estimate taps weaker than this multiple of the per-tap noise are dropped
    est_threshold: float = 4.0
    # read the whole Doppler period off the pilot strip, or only the spread
    full_doppler: bool = True

    @property
    def mcs(self) -> MCS:
        return self.cfg.mcs

    @property
    def n_coded(self) -> int:
        return self.cfg.layout.n_data * self.mcs.bits_per_symbol

    @property
    def resource(self) -> float:
        return self.cfg.grid.B * self.cfg.grid.T

    def describe(self) -> dict:
        g = self.cfg.grid
        return {
            "nu_p": g.nu_p,
            "M": g.M,
            "N": g.N,
            "pdr_db": self.cfg.pdr_db,
            "layout": self.cfg.layout.variant,
            "tail": self.cfg.layout.tail,
            "mcs": self.mcs.id,
        }


@dataclass(frozen=True, eq=False)
class OFDMLink:
    cfg: ofdm_modem.OFDMConfig
    duration: float = 1e-3

    @property
    def mcs(self) -> MCS:
        return self.cfg.mcs

    @property
    def n_coded(self) -> int:
        return self.cfg.n_data * self.mcs.bits_per_symbol

    @property
    def resource(self) -> float:
        return self.cfg.bandwidth * self.duration

    def describe(self) -> dict:
        return {
            "delta_f": self.cfg.delta_f,
            "boost_db": self.cfg.boost_db,
            "dmrs": sum(p < ofdm_modem.SLOT_SYMBOLS for p in self.cfg.dmrs.time_positions),
            "mcs": self.mcs.id,
        }


LinkConfig = Union[OTFSLink, OFDMLink]


@lru_cache(maxsize=256)
def interleaver(n: int) -> np.ndarray:
    perm = np.random.default_rng([0xB17, n]).permutation(n)
    perm.setflags(write=False)
    return perm


def info_bits_for(link: LinkConfig) -> int:
    return ldpc.info_length(link.n_coded, link.mcs.code_rate)


def frame_streams(seed: int, frame: int) -> tuple[np.random.Generator, np.random.Generator, int]:
    """Independent (channel, data, noise-seed) streams for one frame.

    Streams depend only on ``(seed, frame)`` so every candidate in a search
    sees the same channel and noise draws.
    """
    ss = np.random.SeedSequence([seed, frame])
    ch, data, noise = ss.spawn(3)
    return (
        np.random.default_rng(ch),
        np.random.default_rng(data),
        int(noise.generate_state(1, dtype=np.uint64)[0]),
    )


def _otfs_frame(link: OTFSLink, channel: ChannelSpec, bits_c: np.ndarray, paths: PathSet, noise_seed: int) -> np.ndarray:
    cfg = link.cfg
    grid, layout = cfg.grid, cfg.layout
    bps = link.mcs.bits_per_symbol
    perm = interleaver(bits_c.size)
    symbols = qam_map(bits_c[perm], bps)
    s = otfs_modem.modulate(cfg, symbols)
    r = apply_dd_channel(s, grid, paths, cfg.alpha_tau, cfg.alpha_nu)
    r = add_awgn(r, NoiseSpec(channel.snr_db, noise_seed))
    Y = forward_zak(r, grid)

    sigma2 = noise_variance(channel.snr_db)
    a_pilot, a_data = cfg.amplitudes()
    lo, hi = layout.strip
    if link.full_doppler:
        l_min, l_max = otfs_modem.full_doppler_window(grid)
    else:
        l_max = otfs_modem.l_max_for(grid, channel.nu_max)
        l_min = -l_max
    h_est = otfs_modem.estimate_channel(
        Y, layout, a_pilot, hi, l_max, k_min=lo,
        threshold=link.est_threshold * sigma2 / a_pilot**2, l_min=l_min,
    )
    eq = otfs_modem.lsmr_equalize(
        Y, h_est, layout, sigma2, link.lsmr_max_iter, link.lsmr_tol,
        pilot_amplitude=a_pilot, data_amplitude=a_data,
    )
    x_u, sinr = otfs_modem.unbias(eq.symbols)
    llr = np.empty(bits_c.size)
    llr[perm] = qam_demap(x_u, sinr, bps)
    return llr


def _ofdm_frame(link: OFDMLink, channel: ChannelSpec, bits_c: np.ndarray, paths: PathSet, noise_seed: int) -> np.ndarray:
    cfg = link.cfg
    bps = link.mcs.bits_per_symbol
    perm = interleaver(bits_c.size)
    symbols = qam_map(bits_c[perm], bps)
    s = ofdm_modem.modulate(cfg, symbols)
    r = apply_paths(s, cfg.sample_rate, paths, channel.oversample)
    r = add_awgn(r, NoiseSpec(channel.snr_db, noise_seed), signal_power_ref=cfg.oversampling)
    Y = ofdm_modem.demodulate(cfg, r)
    sigma2 = noise_variance(channel.snr_db, cfg.oversampling)
    H_hat = ofdm_modem.estimate_grid_channel(Y, cfg.dmrs, cfg.boost_db)
    x_u, sinr = ofdm_modem.mmse_soft(Y, H_hat, sigma2, cfg.data_index)
    llr = np.empty(bits_c.size)
    llr[perm] = qam_demap(x_u, sinr, bps)
    return llr


def run_link(
    waveform: str,
    config: LinkConfig,
    channel: ChannelSpec,
    n_frames: int,
    seed: int,
    bler_gate: float = 0.1,
    stop_on_fail: bool = False,
) -> LinkResult:
    """Monte-Carlo BLER of one transport block per frame.

    With ``stop_on_fail`` the run ends as soon as the error count alone puts
    the BLER at or above ``bler_gate``; the feasibility verdict is unchanged
    but ``bler`` is then only a lower bound over the frames simulated.
    """
    if waveform not in ("otfs", "ofdm"):
        raise LinkConfigError(f"unknown waveform {waveform!r}")
    if (waveform == "otfs") != isinstance(config, OTFSLink):
        raise LinkConfigError("config type does not match waveform")
    if n_frames < 100:
        log.debug("n_frames=%d is below 100; BLER near 0.1 is poorly resolved", n_frames)
    k = info_bits_for(config)
    if k <= 0:
        raise LinkConfigError(f"transport block too small: {config.n_coded} coded bits")
    rate = config.mcs.code_rate
    potential = k / config.resource
    frame_fn = _otfs_frame if waveform == "otfs" else _ofdm_frame
    fail_at = math.ceil(bler_gate * n_frames - 1e-12)

    errors = 0
    done = 0
    for f in range(n_frames):
        ch_rng, data_rng, noise_seed = frame_streams(seed, f)
        paths = channel.draw(ch_rng)
        u = data_rng.integers(0, 2, k, dtype=np.uint8)
        c = ldpc.encode(u, rate, config.n_coded)
        llr = frame_fn(config, channel, c, paths, noise_seed)
        u_hat, ok = ldpc.decode(llr, rate)
        errors += int(not ok or not np.array_equal(u_hat, u))
        done += 1
        if stop_on_fail and errors >= fail_at:
            break
    bler = errors / done
    se = potential if bler < bler_gate else 0.0
    return LinkResult(
        waveform=waveform,
        bler=bler,
        n_errors=errors,
        n_frames=done,
        bler_ci=wilson_interval(errors, done),
        info_bits=k,
        effective_se=se,
        potential_se=potential,
        config=config.describe(),
        stopped_early=done < n_frames,
    )
