import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zakofdm.channel import (
    NoiseSpec,
    Path,
    PathSet,
    add_awgn,
    apply_dd_channel,
    apply_paths,
    effective_dd_filter,
    veh_a_paths,
)
from zakofdm.dd_core import DDFrame, DDGrid, forward_zak, inverse_zak, twisted_convolve


def rand_signal(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_veh_a_zero_doppler():
    p = veh_a_paths(0.0, 3)
    assert all(x.doppler == 0 for x in p.paths)
    assert len(p) == 6


def test_veh_a_deterministic():
    assert veh_a_paths(500.0, 11, tau_max=2e-6) == veh_a_paths(500.0, 11, tau_max=2e-6)


@given(st.floats(0, 5e-6), st.floats(0, 3e3), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_veh_a_support_and_power(tau, nu, seed):
    p = veh_a_paths(nu, seed, tau_max=tau)
    assert p.tau_max <= tau * (1 + 1e-12)
    assert p.nu_max <= nu * (1 + 1e-12)
    assert abs(p.power - 1.0) < 1e-12


def test_veh_a_rejects_unknown_model():
    with pytest.raises(ValueError):
        veh_a_paths(1.0, 0, doppler_model="flat")


def test_identity_path():
    s = rand_signal(np.random.default_rng(0), 64)
    np.testing.assert_allclose(apply_paths(s, 1e6, PathSet.single()), s, atol=1e-12)


@given(st.integers(0, 20))
@settings(max_examples=10, deadline=None)
def test_integer_delay_is_shift(d):
    s = rand_signal(np.random.default_rng(d), 64)
    y = apply_paths(s, 1e6, PathSet.single(delay=d / 1e6))
    np.testing.assert_allclose(y[:d], 0, atol=1e-12)
    np.testing.assert_allclose(y[d:], s[: 64 - d], atol=1e-12)


def test_doppler_closed_form():
    fs, nu = 1e6, 1234.5
    s = rand_signal(np.random.default_rng(1), 128)
    y = apply_paths(s, fs, PathSet.single(doppler=nu))
    np.testing.assert_allclose(y, s * np.exp(2j * np.pi * nu * np.arange(128) / fs), atol=1e-12)


def test_negative_delay_rejected():
    with pytest.raises(ValueError):
        Path(1.0, -1e-6, 0.0)


def test_noise_disabled():
    s = rand_signal(np.random.default_rng(2), 32)
    np.testing.assert_array_equal(add_awgn(s, NoiseSpec(math.inf, 5)), s)


def test_noise_deterministic():
    s = np.zeros(100, complex)
    np.testing.assert_array_equal(add_awgn(s, NoiseSpec(3.0, 9)), add_awgn(s, NoiseSpec(3.0, 9)))


def test_empirical_snr():
    w = add_awgn(np.zeros(10**6, complex), NoiseSpec(12.0, 1))
    snr = -10 * np.log10(np.mean(np.abs(w) ** 2))
    assert abs(snr - 12.0) < 0.1


def test_effective_filter_on_grid_path_is_single_tap():
    g = DDGrid.from_periods(16, 8, 1e3)
    paths = PathSet.single(0.7j, 3 / g.B, 2 / g.T)
    h = effective_dd_filter(paths, g, 0.1, 0.1)
    assert abs(h.taps[(3, 2)] - 0.7j) < 1e-12
    others = [v for k, v in h.taps.items() if k != (3, 2)]
    assert max(map(abs, others), default=0) < 1e-12


def test_dd_channel_matches_time_domain_for_on_grid_paths():
    rng = np.random.default_rng(4)
    g = DDGrid.from_periods(16, 8, 1e3)
    paths = PathSet((Path(0.8, 0.0, 0.0), Path(0.6j, 2 / g.B, -1 / g.T)))
    s = inverse_zak(DDFrame(g, rng.standard_normal((16, 8)) + 0j))
    np.testing.assert_allclose(apply_dd_channel(s, g, paths, 0.1, 0.1), apply_paths(s, g.B, paths, periodic=True), atol=1e-9)


def test_dd_channel_is_twisted_convolution_of_effective_filter():
    rng = np.random.default_rng(5)
    g = DDGrid.from_periods(16, 8, 1e3)
    paths = veh_a_paths(300.0, rng, tau_max=4 / g.B)
    X = DDFrame(g, rng.standard_normal((16, 8)) + 0j)
    y = forward_zak(apply_dd_channel(inverse_zak(X), g, paths, 0.1, 0.1), g)
    ref = twisted_convolve(effective_dd_filter(paths, g, 0.1, 0.1), X)
    np.testing.assert_allclose(y.symbols, ref.symbols, atol=1e-9)
