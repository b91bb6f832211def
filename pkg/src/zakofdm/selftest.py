"""Fast oracle checks behind ``zakofdm selftest``; each returns (name, passed, detail)."""

from __future__ import annotations

import numpy as np

from . import ofdm_modem, otfs_modem
from .channel import Path, PathSet, apply_paths
from .dd_core import DDFilter, DDFrame, DDGrid, forward_zak, inverse_zak, twisted_convolve


def integer_paths(rng: np.random.Generator, grid: DDGrid, n: int, k_max: int, l_max: int) -> PathSet:
    ks = rng.integers(0, k_max + 1, n)
    ls = rng.integers(-l_max, l_max + 1, n)
    g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return PathSet(tuple(Path(complex(gi), k / grid.B, l / grid.T) for gi, k, l in zip(g, ks, ls)))


def filter_of(paths: PathSet, grid: DDGrid) -> DDFilter:
    """DD taps of on-grid paths: gain at (B tau, T nu)."""
    taps: dict[tuple[int, int], complex] = {}
    for p in paths.paths:
        key = (round(p.delay * grid.B), round(p.doppler * grid.T))
        taps[key] = taps.get(key, 0) + p.gain
    return DDFilter(grid, taps)


def check_zak(rng) -> tuple[bool, str]:
    worst = 0.0
    for M in (2, 4, 8, 16, 32):
        for N in (2, 4, 8, 16, 32):
            g = DDGrid.from_periods(M, N, 1e3)
            X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
            s = inverse_zak(DDFrame(g, X))
            worst = max(worst, np.abs(forward_zak(s, g).symbols - X).max(),
                        abs(np.linalg.norm(s) - np.linalg.norm(X)) / np.linalg.norm(X))
    return worst < 1e-12, f"max error {worst:.2e}"


def check_twisted(rng) -> tuple[bool, str]:
    g = DDGrid.from_periods(16, 8, 1e3)
    worst = 0.0
    for _ in range(10):
        paths = integer_paths(rng, g, 4, 15, 3)
        X = DDFrame(g, rng.standard_normal((16, 8)) + 1j * rng.standard_normal((16, 8)))
        td = forward_zak(apply_paths(inverse_zak(X), g.B, paths, periodic=True), g).symbols
        dd = twisted_convolve(filter_of(paths, g), X).symbols
        worst = max(worst, np.abs(td - dd).max())
    return worst < 1e-9, f"max error {worst:.2e}"


def prediction_error(grid: DDGrid, paths: PathSet, layout, k_win: tuple[int, int], rng, n_carriers: int = 10) -> float:
    h_true = filter_of(paths, grid)
    pilot = DDFrame.impulse(grid, *layout.pilot_pos)
    rx = twisted_convolve(h_true, pilot)
    l_min, l_max = otfs_modem.full_doppler_window(grid)
    h_est = otfs_modem.estimate_channel(rx, layout, 1.0, k_win[1], l_max, k_min=k_win[0], l_min=l_min)
    worst = 0.0
    for _ in range(n_carriers):
        e = DDFrame.impulse(grid, int(rng.integers(grid.M)), int(rng.integers(grid.N)))
        actual = twisted_convolve(h_true, e).symbols
        predicted = twisted_convolve(h_est, e).symbols
        worst = max(worst, np.linalg.norm(predicted - actual) / np.linalg.norm(actual))
    return worst


def check_predictability(rng) -> tuple[bool, str]:
    g = DDGrid.from_periods(32, 8, 1e3)
    layout = otfs_modem.build_layout(g, 3 / g.B, "narrow")
    ok_err = prediction_error(g, integer_paths(rng, g, 4, 3, 3), layout, layout.strip, rng)
    # a path beyond the delay period aliases onto the pilot strip
    bad = PathSet((Path(1.0, 0.0, 0.0), Path(0.8, (g.M + 1) / g.B, 2 / g.T)))
    bad_err = prediction_error(g, bad, layout, layout.strip, rng)
    return ok_err < 1e-6 and bad_err > 1e-2, f"crystallized {ok_err:.2e}, aliased {bad_err:.2e}"


def check_lsmr(rng) -> tuple[bool, str]:
    g = DDGrid.from_periods(8, 4, 1e3)
    layout = otfs_modem.build_layout(g, 1 / g.B, "narrow")
    h = filter_of(integer_paths(rng, g, 3, 1, 1), g)
    x = rng.standard_normal(layout.n_data) + 1j * rng.standard_normal(layout.n_data)
    full = np.zeros(g.size, complex)
    full[layout.data_index] = x
    y = twisted_convolve(h, DDFrame(g, full.reshape(g.M, g.N)))
    nv = 1e-3
    eq = otfs_modem.lsmr_equalize(y, h, layout, nv, max_iter=1000, tol=1e-14)
    A = h.matrix.toarray()[:, layout.data_index]
    dense = np.linalg.solve(A.conj().T @ A + nv * np.eye(A.shape[1]), A.conj().T @ y.symbols.reshape(-1))
    err = np.abs(eq.symbols - dense).max()
    return err < 1e-5, f"max deviation from dense solve {err:.2e}"


def check_cp(rng) -> tuple[bool, str]:
    cfg = ofdm_modem.OFDMConfig.nr(180e3, 1e-3, 15e3, 1)
    # on-sample delays inside the CP make every symbol see a circular shift
    delays = np.sort(rng.integers(0, cfg.n_cp + 1, 3)) / cfg.sample_rate
    paths = PathSet(tuple(Path(complex(rng.standard_normal(), rng.standard_normal()), float(d), 0.0) for d in delays))
    X = rng.standard_normal((cfg.n_sub, cfg.n_symbols)) + 1j * rng.standard_normal((cfg.n_sub, cfg.n_symbols))
    s = ofdm_modem.ofdm_from_grid(cfg, X, normalize=False)
    Y = ofdm_modem.demodulate(cfg, apply_paths(s, cfg.sample_rate, paths))
    f = np.fft.fftfreq(cfg.n_fft, 1.0 / cfg.sample_rate)[: cfg.n_sub]
    H = sum(p.gain * np.exp(-2j * np.pi * f * p.delay) for p in paths.paths)
    err = np.abs(Y - H[:, None] * X).max()
    return err < 1e-9, f"max per-subcarrier model error {err:.2e}"


def check_overhead(rng) -> tuple[bool, str]:
    a = ofdm_modem.zak_strip_overhead(2.5e-6, 200e-6)
    b = ofdm_modem.zak_strip_overhead(1e3, 160e3)
    return abs(a - 0.025) < 1e-15 and abs(b - 0.0125) < 1e-15, f"{a:.4%} and {b:.4%}"


CHECKS = {
    "zak round trip": check_zak,
    "twisted convolution vs time domain": check_twisted,
    "point-pilot predictability": check_predictability,
    "lsmr vs dense solve": check_lsmr,
    "cp absorption": check_cp,
    "strip overhead": check_overhead,
}


def run_all(seed: int = 0) -> list[tuple[str, bool, str]]:
    out = []
    for i, (name, fn) in enumerate(CHECKS.items()):
        passed, detail = fn(np.random.default_rng([seed, i]))
        out.append((name, bool(passed), detail))
    return out
