import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zakofdm.channel import apply_paths
from zakofdm.dd_core import (
    DDFilter,
    DDFrame,
    DDGrid,
    DimensionError,
    compose_filters,
    forward_zak,
    gauss_sinc_filter,
    inverse_zak,
    twisted_adjoint,
    twisted_convolve,
)
from zakofdm.selftest import filter_of, integer_paths


def rand_frame(rng, g):
    return DDFrame(g, rng.standard_normal((g.M, g.N)) + 1j * rng.standard_normal((g.M, g.N)))


def synthesis_oracle(X):
    """Term-by-term evaluation of the synthesis sum."""
    M, N = X.shape
    s = np.zeros(M * N, complex)
    for n in range(M * N):
        k, q = n % M, n // M
        for l in range(N):
            s[n] += X[k, l] * np.exp(2j * np.pi * q * l / N) / np.sqrt(N)
    return s


def test_single_pulsone_is_impulse_train():
    g = DDGrid.from_periods(2, 2, 1e3)
    s = inverse_zak(DDFrame.impulse(g, 0, 0))
    np.testing.assert_allclose(s, [1 / np.sqrt(2), 0, 1 / np.sqrt(2), 0], atol=1e-15)


def test_impulse_train_analyses_to_delta():
    g = DDGrid.from_periods(2, 2, 1e3)
    X = forward_zak(np.array([1, 0, 1, 0]) / np.sqrt(2), g).symbols
    np.testing.assert_allclose(X, [[1, 0], [0, 0]], atol=1e-15)


def test_zero_signal():
    g = DDGrid.from_periods(4, 4, 1e3)
    assert not forward_zak(np.zeros(16), g).symbols.any()


def test_synthesis_matches_direct_sum():
    rng = np.random.default_rng(1)
    g = DDGrid.from_periods(4, 4, 1e3)
    X = rand_frame(rng, g)
    np.testing.assert_allclose(inverse_zak(X), synthesis_oracle(X.symbols), atol=1e-12)


def test_length_mismatch():
    g = DDGrid.from_periods(4, 4, 1e3)
    with pytest.raises(DimensionError):
        forward_zak(np.zeros(15), g)
    with pytest.raises(DimensionError):
        DDFrame(g, np.zeros((4, 3)))


@given(st.sampled_from([2, 4, 8, 16, 32]), st.sampled_from([2, 4, 8, 16, 32]), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_round_trip_and_unitarity(M, N, seed):
    rng = np.random.default_rng(seed)
    X = rand_frame(rng, DDGrid.from_periods(M, N, 1e3))
    s = inverse_zak(X)
    np.testing.assert_allclose(forward_zak(s, X.grid).symbols, X.symbols, atol=1e-12)
    assert abs(np.linalg.norm(s) ** 2 - X.energy()) <= 1e-12 * X.energy()


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 7), st.integers(0, 3))
def test_extension_rule(n, m, k, l):
    rng = np.random.default_rng(0)
    X = rand_frame(rng, DDGrid.from_periods(8, 4, 1e3))
    expected = X.symbols[k, l] * np.exp(2j * np.pi * n * l / 4)
    assert abs(X.extended_at(k + 8 * n, l + 4 * m) - expected) < 1e-12


def test_identity_and_shift():
    rng = np.random.default_rng(2)
    g = DDGrid.from_periods(8, 4, 1e3)
    X = rand_frame(rng, g)
    np.testing.assert_allclose(twisted_convolve(DDFilter.identity(g), X).symbols, X.symbols)
    y = twisted_convolve(DDFilter(g, {(3, 0): 1.0}), DDFrame.impulse(g, 0, 0)).symbols
    np.testing.assert_allclose(y, DDFrame.impulse(g, 3, 0).symbols, atol=1e-15)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_twisted_convolution_matches_time_domain(seed):
    rng = np.random.default_rng(seed)
    g = DDGrid.from_periods(8, 4, 1e3)
    paths = integer_paths(rng, g, 3, 7, 2)
    X = rand_frame(rng, g)
    td = forward_zak(apply_paths(inverse_zak(X), g.B, paths, periodic=True), g).symbols
    np.testing.assert_allclose(twisted_convolve(filter_of(paths, g), X).symbols, td, atol=1e-9)


def test_composition_matches_cascaded_paths():
    rng = np.random.default_rng(3)
    g = DDGrid.from_periods(16, 8, 1e3)
    p1, p2 = integer_paths(rng, g, 2, 4, 2), integer_paths(rng, g, 2, 4, 2)
    X = rand_frame(rng, g)
    s = apply_paths(apply_paths(inverse_zak(X), g.B, p1, periodic=True), g.B, p2, periodic=True)
    h = compose_filters(filter_of(p2, g), filter_of(p1, g))
    np.testing.assert_allclose(twisted_convolve(h, X).symbols, forward_zak(s, g).symbols, atol=1e-9)


def test_tap_shift_by_period_changes_phase_only():
    rng = np.random.default_rng(4)
    g = DDGrid.from_periods(8, 4, 1e3)
    X = rand_frame(rng, g)
    a = twisted_convolve(DDFilter(g, {(1, 1): 1.0}), X).symbols
    b = twisted_convolve(DDFilter(g, {(1 + g.M, 1): 1.0}), X).symbols
    np.testing.assert_allclose(np.abs(a), np.abs(b), atol=1e-12)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_adjoint_inner_product(seed):
    rng = np.random.default_rng(seed)
    g = DDGrid.from_periods(8, 4, 1e3)
    h = filter_of(integer_paths(rng, g, 3, 3, 1), g)
    x, y = rand_frame(rng, g), rand_frame(rng, g)
    lhs = np.vdot(y.symbols, twisted_convolve(h, x).symbols)
    rhs = np.vdot(twisted_adjoint(h, y).symbols, x.symbols)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


def test_adjoint_single_tap():
    rng = np.random.default_rng(5)
    g = DDGrid.from_periods(8, 4, 1e3)
    y = rand_frame(rng, g)
    back = twisted_adjoint(DDFilter(g, {(2, 0): 0.5j}), y).symbols
    expected = np.array([[-0.5j * y.extended_at(k + 2, l) for l in range(g.N)] for k in range(g.M)])
    np.testing.assert_allclose(back, expected, atol=1e-12)
    np.testing.assert_allclose(twisted_adjoint(DDFilter.identity(g), y).symbols, y.symbols)


def test_grid_mismatch():
    a, b = DDGrid.from_periods(8, 4, 1e3), DDGrid.from_periods(4, 8, 1e3)
    with pytest.raises(DimensionError):
        twisted_convolve(DDFilter.identity(a), DDFrame.zeros(b))


def test_gauss_sinc_integer_sampling_is_identity():
    g = DDGrid.from_periods(8, 4, 1e3)
    assert gauss_sinc_filter(g, 0.01, 0.01).taps == {(0, 0): 1.0}


def test_gauss_sinc_oversampled():
    g = DDGrid.from_periods(8, 4, 1e3)
    h = gauss_sinc_filter(g, 0.5, 0.5, oversample=4)
    assert len(h.taps) > 1
    for (k, l), v in h.taps.items():
        assert abs(h.taps[(-k, -l)] - v) < 1e-15
    # tail below the truncation threshold
    full = gauss_sinc_filter(g, 0.5, 0.5, oversample=4)
    x = np.arange(-400, 401) / 4
    w = np.sinc(x) * np.exp(-0.5 * np.pi * x**2)
    total = np.sum(w**2) ** 2
    kept = sum(abs(v) ** 2 for v in full.taps.values()) * np.max(np.abs(w)) ** 4
    assert (total - kept) / total < 1e-10


def test_gauss_sinc_rejects_bad_alpha():
    with pytest.raises(ValueError):
        gauss_sinc_filter(DDGrid.from_periods(4, 4, 1e3), 0.0, 0.1)


def test_grid_snapping():
    g = DDGrid.from_bandwidth(672e3, 1e-3, 14e3)
    assert g.M == 48 and g.N == 14
    assert abs(g.B - 672e3) < 1e-6
