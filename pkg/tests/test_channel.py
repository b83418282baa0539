import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiberae import channel as ch
from fiberae.channel import ChannelConfig
from fiberae.numerics import ConfigurationError, RngStream, gaussian

FS = 84e9
BW = 32e9


def tone(n, k):
    t = np.arange(n)
    return np.cos(2 * np.pi * k * t / n)


def rms_width(intensity, dt):
    t = np.arange(intensity.size) * dt
    w = intensity / intensity.sum()
    mu = np.sum(w * t)
    return math.sqrt(np.sum(w * (t - mu) ** 2))


def gaussian_pulse(n, t0, dt):
    # field envelope exp(-t^2 / (2 T0^2)), T0 the 1/e intensity half-width
    t = (np.arange(n) - n // 2) * dt
    return np.exp(-(t**2) / (2 * t0**2)).astype(np.complex128)


# ------------------------------------------------------------------ lowpass

def test_lowpass_passband_tone_unchanged():
    n = 840
    x = tone(n, 100)  # 10 GHz bin
    y = ch.lowpass(x, BW, FS)
    assert np.max(np.abs(y - x)) / np.max(np.abs(x)) < 1e-12


def test_lowpass_stopband_tone_removed():
    n = 840
    y = ch.lowpass(tone(n, 400), BW, FS)  # 40 GHz
    assert np.max(np.abs(y)) < 1e-12


def test_lowpass_real_in_real_out():
    x = RngStream(3).standard_normal(256)
    assert np.isrealobj(ch.lowpass(x, BW, FS))


@given(st.integers(0, 2**32), st.integers(8, 300))
@settings(max_examples=40, deadline=None)
def test_lowpass_never_adds_energy(seed, n):
    x = RngStream(seed).standard_normal(n)
    y = ch.lowpass(x, BW, FS)
    assert np.sum(y**2) <= np.sum(x**2) * (1 + 1e-12)


def test_lowpass_is_idempotent():
    x = RngStream(4).standard_normal(200)
    once = ch.lowpass(x, BW, FS)
    assert np.allclose(ch.lowpass(once, BW, FS), once, atol=1e-13)


# ----------------------------------------------------------------- modulate

def test_modulate_square_law_cases():
    assert ch.photodiode(ch.modulate(np.array([0.0])))[0] == 0.0
    assert ch.photodiode(ch.modulate(np.array([1.0])))[0] == 1.0
    assert ch.photodiode(ch.modulate(np.array([0.5])))[0] == 0.25


@pytest.mark.parametrize("bad", [-1e-6, 1.0 + 1e-6])
def test_modulate_rejects_out_of_range(bad):
    with pytest.raises(ConfigurationError, match="outside"):
        ch.modulate(np.array([0.3, bad]))


def test_modulate_tolerates_roundoff():
    ch.modulate(np.array([-1e-10, 1 + 1e-10]))


def test_modulate_backward_takes_real_part():
    g = np.array([1 + 2j, -3 - 4j])
    assert np.array_equal(ch.modulate_backward(g), [1.0, -3.0])


# ---------------------------------------------------------------- disperse

def test_zero_distance_is_identity():
    r = RngStream(5)
    E = r.standard_normal(500) + 1j * r.standard_normal(500)
    assert np.max(np.abs(ch.disperse(E, 0.0, -21.7, FS) - E)) < 1e-12


@given(st.integers(0, 2**32), st.floats(0, 200), st.integers(16, 512))
@settings(max_examples=40, deadline=None)
def test_dispersion_preserves_energy(seed, L, n):
    r = RngStream(seed)
    E = r.standard_normal(n) + 1j * r.standard_normal(n)
    out = ch.disperse(E, L, -21.7, FS)
    e_in, e_out = np.sum(np.abs(E) ** 2), np.sum(np.abs(out) ** 2)
    assert abs(e_out - e_in) / e_in < 1e-12


@pytest.mark.parametrize("L", [20.0, 40.0, 80.0])
def test_gaussian_pulse_rms_broadening(L):
    t0, beta2 = 30e-12, -21.7
    dt = 1 / FS
    E = gaussian_pulse(4096, t0, dt)
    out = ch.disperse(E, L, beta2, FS)
    ratio = rms_width(np.abs(out) ** 2, dt) / rms_width(np.abs(E) ** 2, dt)
    expected = math.sqrt(1 + (beta2 * 1e-24 * L / t0**2) ** 2)
    assert abs(ratio - expected) / expected < 0.01


def test_disperse_inverse_cancels():
    r = RngStream(6)
    E = r.standard_normal(300) + 1j * r.standard_normal(300)
    back = ch.disperse(ch.disperse(E, 60.0, -21.7, FS), 60.0, 21.7, FS)
    assert np.max(np.abs(back - E)) < 1e-10


def test_disperse_commutes_with_lowpass():
    r = RngStream(7)
    E = r.standard_normal(300) + 1j * r.standard_normal(300)
    a = ch.lowpass(ch.disperse(E, 50.0, -21.7, FS), BW, FS)
    b = ch.disperse(ch.lowpass(E, BW, FS), 50.0, -21.7, FS)
    assert np.max(np.abs(a - b)) < 1e-10


def test_disperse_double_distance_composes():
    r = RngStream(8)
    E = r.standard_normal(256) + 1j * r.standard_normal(256)
    twice = ch.disperse(ch.disperse(E, 35.0, -21.7, FS), 35.0, -21.7, FS)
    assert np.max(np.abs(twice - ch.disperse(E, 70.0, -21.7, FS))) < 1e-10


def test_disperse_negative_distance_rejected():
    with pytest.raises(ConfigurationError):
        ch.disperse(np.ones(8, complex), -1.0, -21.7)


def test_disperse_backward_is_adjoint():
    r = RngStream(9)
    E = r.standard_normal(128) + 1j * r.standard_normal(128)
    G = r.standard_normal(128) + 1j * r.standard_normal(128)
    lhs = np.vdot(G, ch.disperse(E, 40.0, -21.7, FS))
    rhs = np.vdot(ch.disperse_backward(G, 40.0, -21.7, FS), E)
    assert abs(lhs - rhs) < 1e-10 * abs(lhs)


# ---------------------------------------------------------------- attenuate

def test_attenuation_cases():
    E = np.array([1.0 + 0j, 2j])
    assert np.array_equal(ch.attenuate(E, 0.0, 80.0), E)
    assert ch.attenuation_factor(0.2, 50.0) == pytest.approx(10**-0.5, rel=1e-15)
    assert ch.attenuation_factor(0.2, 50.0) == pytest.approx(0.3162, abs=1e-4)
    p = ch.photodiode(ch.attenuate(E, 0.2, 30.0))
    assert np.allclose(p, ch.photodiode(E) * 10 ** (-0.2 * 30 / 10), rtol=1e-14)


# --------------------------------------------------------------- photodiode

def test_photodiode_cases():
    E = np.array([3 + 4j])
    assert ch.photodiode(E)[0] == 25.0
    g = ch.photodiode_backward(np.array([1.0]), E)
    assert (g.real[0], g.imag[0]) == (6.0, 8.0)


@given(st.integers(0, 2**32), st.floats(-math.pi, math.pi))
@settings(max_examples=30, deadline=None)
def test_photodiode_phase_invariant_and_nonnegative(seed, phi):
    r = RngStream(seed)
    E = r.standard_normal(64) + 1j * r.standard_normal(64)
    y = ch.photodiode(E)
    assert np.all(y >= 0)
    assert np.allclose(ch.photodiode(E * np.exp(1j * phi)), y, rtol=1e-12, atol=0)


# ---------------------------------------------------------------- add_noise

def test_noise_zero_sigma_is_identity():
    y = np.linspace(0, 1, 50)
    assert np.array_equal(ch.add_noise(y, 0.0, RngStream(1)), y)


def test_noise_variance():
    # 1e6 samples: the variance estimator's relative std is sqrt(2/N) = 0.14%
    y = np.zeros(1_000_000)
    out = ch.add_noise(y, 0.1, RngStream(10))
    assert abs(np.var(out - y) / 0.01 - 1) < 0.01


def test_noise_gradient_is_identity():
    g = RngStream(11).standard_normal(20)
    assert np.array_equal(ch.add_noise_backward(g), g)


# ---------------------------------------------------------------- the chain

def test_chain_without_filters_or_fiber_is_square_law():
    cfg = ChannelConfig(noise_sigma=0.0, include_tx_lpf=False, include_rx_lpf=False)
    tx = RngStream(12).uniform(100)
    assert np.allclose(ch.channel_forward(tx, cfg), tx**2, rtol=0, atol=1e-15)


def test_constant_input_only_attenuated():
    c, L, a = 0.7, 60.0, 0.2
    cfg = ChannelConfig(distance=L, atten_db_per_km=a, noise_sigma=0.0,
                        include_tx_lpf=False, include_rx_lpf=False)
    out = ch.channel_forward(np.full(64, c), cfg)
    assert np.allclose(out, c**2 * 10 ** (-a * L / 10), rtol=1e-12)


def test_noiseless_chain_is_deterministic():
    cfg = ChannelConfig(distance=40.0, noise_sigma=0.0)
    tx = RngStream(13).uniform(120)
    assert np.array_equal(ch.channel_forward(tx, cfg, RngStream(1)), ch.channel_forward(tx, cfg, RngStream(2)))


def test_frozen_noise_reproduces_draw():
    cfg = ChannelConfig(distance=10.0)
    tx = RngStream(14).uniform(96)
    rx, _, noise = ch.channel_vjp(tx, cfg, RngStream(99))
    assert np.array_equal(ch.channel_forward(tx, cfg, noise=noise), rx)
    assert np.array_equal(noise, gaussian(RngStream(99), 96, cfg.noise_sigma))


def test_guard_padding_roundtrip():
    x = RngStream(15).uniform(2 * 36).reshape(2, 36)
    padded = ch.pad_guards(x, 24)
    assert padded.shape == (2, 84)
    assert not padded[:, :24].any() and not padded[:, -24:].any()
    assert np.array_equal(ch.strip_guards(padded, 24), x)
    rx, pb = ch.transmit_vjp(x, ChannelConfig(distance=30.0), 12)
    assert rx.shape == x.shape and pb(np.ones_like(rx)).shape == x.shape


@pytest.mark.parametrize("field,value", [
    ("sample_rate", 0.0), ("distance", -1.0), ("atten_db_per_km", -0.1),
    ("lpf_bandwidth", 42e9), ("noise_sigma", -0.5), ("guard_blocks", -1),
])
def test_config_validation_names_field(field, value):
    with pytest.raises(ConfigurationError, match=field):
        ChannelConfig(**{field: value}).validate()


def test_default_noise_is_20db_snr():
    assert ChannelConfig().noise_sigma == pytest.approx(0.1, rel=1e-15)
