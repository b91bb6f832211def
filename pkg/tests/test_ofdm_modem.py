import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zakofdm import ofdm_modem as om
from zakofdm.channel import NoiseSpec, Path, PathSet, add_awgn, apply_paths, veh_a_paths
from zakofdm.dd_core import DimensionError
from zakofdm.qam import qam_map


def nr(delta_f=15e3, dmrs=1, boost=0.0, **kw):
    return om.OFDMConfig.nr(180e3, 1e-3, delta_f, dmrs, boost, **kw)


def test_cp_overhead_examples():
    assert abs(om.cp_overhead(15e3, 4.7e-6) - 4.7 / 71.37) < 1e-4
    assert om.cp_overhead(15e3, 0.0) == 0.0


def test_zak_strip_overhead_examples():
    assert om.zak_strip_overhead(2.5e-6, 200e-6) == pytest.approx(0.025, abs=1e-15)
    assert om.zak_strip_overhead(1e3, 160e3) == pytest.approx(0.0125, abs=1e-15)
    assert om.zak_strip_overhead(0.0, 1.0) == 0.0
    with pytest.raises(om.ConfigError):
        om.zak_strip_overhead(2.0, 1.0)


def test_nr_numerology():
    for df, n_sym in ((15e3, 14), (30e3, 28), (60e3, 56)):
        cfg = nr(df)
        assert cfg.n_symbols == n_sym
        assert cfg.n_sub * cfg.delta_f == pytest.approx(180e3)
        assert cfg.n_symbols * cfg.t_prb <= 1e-3 + 1e-12
    assert nr(15e3).t_cp == pytest.approx(4.6875e-6)


def test_dmrs_positions_per_slot():
    assert nr(15e3, 2).dmrs.time_positions == (2, 11)
    assert nr(30e3, 1).dmrs.time_positions == (2, 16)
    with pytest.raises(om.ConfigError):
        nr(15e3, 5)


def test_single_subcarrier_without_cp():
    cfg = om.OFDMConfig(15e3, 8, 0, 1, om.DMRSPattern((0,)))
    X = np.zeros((8, 1), complex)
    X[3, 0] = 1
    n = np.arange(8)
    np.testing.assert_allclose(om.ofdm_from_grid(cfg, X, normalize=False), np.exp(2j * np.pi * 3 * n / 8) / np.sqrt(8), atol=1e-15)


@given(st.sampled_from([15e3, 30e3, 60e3]), st.booleans(), st.integers(0, 2**32 - 1))
@settings(max_examples=12, deadline=None)
def test_round_trip(delta_f, critical, seed):
    rng = np.random.default_rng(seed)
    cfg = nr(delta_f, critical=critical)
    X = rng.standard_normal((cfg.n_sub, cfg.n_symbols)) + 1j * rng.standard_normal((cfg.n_sub, cfg.n_symbols))
    np.testing.assert_allclose(om.demodulate(cfg, om.ofdm_from_grid(cfg, X, normalize=False)), X, atol=1e-12)


@given(st.floats(-6, 6))
@settings(max_examples=20, deadline=None)
def test_frame_power_invariant_to_boost(boost):
    cfg = nr(30e3, 2, boost)
    x = qam_map(np.random.default_rng(0).integers(0, 2, 2 * cfg.n_data), 2)
    assert abs(np.mean(np.abs(om.modulate(cfg, x)) ** 2) - 1.0) < 1e-10


def test_symbol_count_mismatch():
    with pytest.raises(DimensionError):
        om.modulate(nr(), np.zeros(3))


def test_cp_longer_than_symbol():
    with pytest.raises(om.ConfigError):
        om.OFDMConfig(15e3, 12, 20, 1, om.DMRSPattern((0,)))


def test_cp_absorption():
    from zakofdm.selftest import check_cp

    for seed in range(5):
        ok, detail = check_cp(np.random.default_rng(seed))
        assert ok, detail


def test_delay_beyond_cp_causes_isi():
    rng = np.random.default_rng(1)
    cfg = nr(15e3)
    d = (cfg.n_cp + 6) / cfg.sample_rate
    paths = PathSet((Path(1.0, 0.0, 0.0), Path(0.7, d, 0.0)))
    X = rng.standard_normal((cfg.n_sub, cfg.n_symbols)) + 0j
    Y = om.demodulate(cfg, apply_paths(om.ofdm_from_grid(cfg, X, normalize=False), cfg.sample_rate, paths))
    f = np.fft.fftfreq(cfg.n_fft, 1 / cfg.sample_rate)[: cfg.n_sub]
    H = 1.0 + 0.7 * np.exp(-2j * np.pi * f * d)
    assert np.abs(Y - H[:, None] * X).max() > 1e-3


def test_flat_channel_estimate():
    cfg = nr(30e3, 2, 3.0)
    x = qam_map(np.random.default_rng(2).integers(0, 2, 2 * cfg.n_data), 2)
    Y = om.demodulate(cfg, (0.3 - 0.4j) * om.ofdm_from_grid(cfg, om.build_grid(cfg, x), normalize=False))
    np.testing.assert_allclose(om.estimate_grid_channel(Y, cfg.dmrs, 3.0), 0.3 - 0.4j, atol=1e-12)


def test_linear_frequency_response_is_exact():
    # H linear in frequency, applied directly on the grid
    cfg = nr(15e3, 2)
    m = np.arange(cfg.n_sub)[:, None]
    H = (1.0 + 0.05j * m) * np.ones((1, cfg.n_symbols))
    X = om.build_grid(cfg, np.ones(cfg.n_data))
    H_hat = om.estimate_grid_channel(H * X, cfg.dmrs, 0.0)
    np.testing.assert_allclose(H_hat, H, atol=1e-12)


def test_single_dmrs_symbol_gives_constant_in_time():
    rng = np.random.default_rng(3)
    cfg = nr(15e3, 1)
    Y = rng.standard_normal((cfg.n_sub, cfg.n_symbols)) + 0j
    H_hat = om.estimate_grid_channel(Y, cfg.dmrs, 0.0)
    assert np.allclose(H_hat, H_hat[:, :1])


def test_estimation_without_pilots():
    with pytest.raises(om.EstimationError):
        om.estimate_grid_channel(np.ones((4, 4)), om.DMRSPattern(()), 0.0)


def test_mmse_exact_and_zero_channel():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    H = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    np.testing.assert_allclose(om.mmse_equalize(H * X, H, 0.0), X.T.reshape(-1), atol=1e-12)
    assert om.mmse_equalize(np.ones((2, 2)), np.zeros((2, 2)), 0.0).tolist() == [0, 0, 0, 0]


def test_mmse_sinr_matches_scalar_formula():
    rng = np.random.default_rng(5)
    n, h, nv = 200000, 0.8 - 0.3j, 0.1
    x = qam_map(rng.integers(0, 2, 2 * n), 2)
    y = add_awgn(h * x, NoiseSpec(10.0, 6))
    x_u, sinr = om.mmse_soft(y.reshape(1, -1), np.full((1, n), h), nv, np.arange(n))
    measured = 1.0 / np.mean(np.abs(x_u - x) ** 2)
    assert abs(10 * np.log10(measured / sinr[0])) < 0.2
    assert sinr[0] == pytest.approx(abs(h) ** 2 / nv)


def test_ici_grows_with_doppler():
    cfg = nr(15e3)
    rng = np.random.default_rng(7)
    leak = []
    for frac in (0.0, 0.05, 0.1, 0.2):
        vals = []
        for _ in range(10):
            paths = veh_a_paths(frac * cfg.delta_f, rng, tau_max=cfg.t_cp)
            G = om.symbol_channel_matrix(cfg, lambda s: apply_paths(s, cfg.sample_rate, paths))
            vals.append(om.ici_leakage(G))
        leak.append(np.mean(vals))
    # fractional delays leave only interpolation tails past the CP
    assert leak[0] < 1e-5 < leak[1]
    assert all(a < b for a, b in zip(leak, leak[1:]))


def test_overhead_tracks_dmrs():
    assert om.ofdm_overhead(15e3, 0.0, 2) == pytest.approx(2 / 28)
    assert om.ofdm_overhead(15e3, 4.7e-6, 1) < om.ofdm_overhead(15e3, 4.7e-6, 4)
