"""Differentiable IM/DD link: low-pass, intensity modulation, chromatic
dispersion, fiber loss, square-law detection and receiver noise.

Waveforms are real arrays and optical fields complex arrays; time runs along
the last axis and all leading axes are batch axes.  The gradient of a real
loss w.r.t. a complex field is carried as ``dL/dRe + 1j * dL/dIm``.

Units: sample rate and bandwidths in Hz, distance in km, ``beta2`` in
ps^2/km, loss in dB/km.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .numerics import ConfigurationError, angular_frequencies, dft, gaussian, idft

MODULATOR_TOLERANCE = 1e-9


def sigma_for_snr(snr_db: float) -> float:
    """Noise std-dev giving ``snr_db`` for a full-scale (unit) signal."""
    return 10.0 ** (-snr_db / 20.0)


@dataclass
class ChannelConfig:
    sample_rate: float = 84e9
    distance: float = 0.0
    beta2: float = -21.7
    atten_db_per_km: float = 0.0  # amplified link: span loss compensated
    lpf_bandwidth: float = 32e9
    noise_sigma: float = sigma_for_snr(20.0)
    include_tx_lpf: bool = True
    include_rx_lpf: bool = True
    guard_blocks: int = 4

    def validate(self):
        if not self.sample_rate > 0:
            raise ConfigurationError("channel.sample_rate must be > 0")
        if not self.distance >= 0:
            raise ConfigurationError("channel.distance must be >= 0")
        if not self.atten_db_per_km >= 0:
            raise ConfigurationError("channel.atten_db_per_km must be >= 0")
        if not 0 < self.lpf_bandwidth < self.sample_rate / 2:
            raise ConfigurationError("channel.lpf_bandwidth must lie in (0, sample_rate/2)")
        if not self.noise_sigma >= 0:
            raise ConfigurationError("channel.noise_sigma must be >= 0")
        if self.guard_blocks < 0:
            raise ConfigurationError("channel.guard_blocks must be >= 0")
        return self

    def replace(self, **changes) -> "ChannelConfig":
        return ChannelConfig(**{**asdict(self), **changes}).validate()

    def to_dict(self):
        return asdict(self)


def lowpass(x, bandwidth, sample_rate):
    """Brick-wall filter: DFT bins with ``|f| > bandwidth`` are zeroed.

    Real input gives real output (the residual imaginary part is dropped).
    The operator is an orthogonal projection, hence its own adjoint.
    """
    n = x.shape[-1]
    keep = np.abs(np.fft.fftfreq(n, d=1.0 / sample_rate)) <= bandwidth
    y = idft(dft(x) * keep)
    return y.real if np.isrealobj(x) else y


lowpass_backward = lowpass


def modulate(x):
    """Field amplitude equals the drive signal: ``E = x`` with zero phase."""
    x = np.asarray(x, dtype=np.float64)
    if x.size and (x.min() < -MODULATOR_TOLERANCE or x.max() > 1 + MODULATOR_TOLERANCE):
        raise ConfigurationError(
            f"modulator drive outside [0, 1]: range [{x.min():.3g}, {x.max():.3g}]"
        )
    return x.astype(np.complex128)


def modulate_backward(gE):
    return np.real(gE).copy()


def dispersion_response(n, distance, beta2, sample_rate):
    """All-pass transfer function ``exp(1j * beta2/2 * w**2 * L)`` per DFT bin."""
    w = angular_frequencies(n, sample_rate)
    return np.exp(0.5j * (beta2 * 1e-24) * distance * w**2)


def disperse(E, distance, beta2, sample_rate=84e9):
    """Chromatic dispersion over ``distance`` km (circular boundary)."""
    if distance < 0:
        raise ConfigurationError("distance must be >= 0")
    if distance == 0:
        return np.array(E, dtype=np.complex128)
    return idft(dft(E) * dispersion_response(E.shape[-1], distance, beta2, sample_rate))


def disperse_backward(gE, distance, beta2, sample_rate=84e9):
    # adjoint filter is the conjugate response
    return disperse(gE, distance, -beta2, sample_rate)


def attenuation_factor(atten_db_per_km, distance):
    if atten_db_per_km < 0:
        raise ConfigurationError("attenuation must be >= 0")
    return 10.0 ** (-atten_db_per_km * distance / 20.0)


def attenuate(E, atten_db_per_km, distance):
    return E * attenuation_factor(atten_db_per_km, distance)


def attenuate_backward(gE, atten_db_per_km, distance):
    return gE * attenuation_factor(atten_db_per_km, distance)


def photodiode(E):
    return E.real**2 + E.imag**2


def photodiode_backward(gy, E):
    return 2.0 * E * gy


def add_noise(y, sigma, rng):
    return y + gaussian(rng, y.shape, sigma)


def add_noise_backward(gy):
    return gy


def channel_vjp(tx, cfg: ChannelConfig, rng=None, noise=None):
    """Run the link and return ``(rx, pullback, noise)``.

    Order: modulate -> TX low-pass -> disperse -> attenuate -> photodiode ->
    + noise -> RX low-pass.  Low-pass filtering the real drive or the
    zero-phase field it maps to is the same operation, so the filter is
    applied to the field and the modulator range check sees the raw
    transmitter output.  ``noise`` (an array shaped like ``tx``) freezes the
    noise realization; otherwise it is drawn from ``rng`` when one is given,
    and omitted when neither is.  ``pullback(g_rx)`` returns ``dL/dtx``.
    """
    fs = cfg.sample_rate
    E0 = modulate(tx)
    E1 = lowpass(E0, cfg.lpf_bandwidth, fs) if cfg.include_tx_lpf else E0
    E2 = disperse(E1, cfg.distance, cfg.beta2, fs)
    E3 = attenuate(E2, cfg.atten_db_per_km, cfg.distance)
    y = photodiode(E3)
    if noise is None and rng is not None:
        noise = gaussian(rng, y.shape, cfg.noise_sigma)
    if noise is not None:
        y = y + noise
    rx = lowpass(y, cfg.lpf_bandwidth, fs) if cfg.include_rx_lpf else y

    def pullback(g):
        if cfg.include_rx_lpf:
            g = lowpass_backward(g, cfg.lpf_bandwidth, fs)
        g = add_noise_backward(g)
        gE = photodiode_backward(g, E3)
        gE = attenuate_backward(gE, cfg.atten_db_per_km, cfg.distance)
        gE = disperse_backward(gE, cfg.distance, cfg.beta2, fs)
        if cfg.include_tx_lpf:
            gE = lowpass_backward(gE, cfg.lpf_bandwidth, fs)
        return modulate_backward(gE)

    return rx, pullback, noise


def channel_forward(tx, cfg: ChannelConfig, rng=None, noise=None):
    """Received waveform for transmitter output ``tx`` (values in [0, 1])."""
    return channel_vjp(tx, cfg, rng, noise)[0]


def pad_guards(waveform, guard_samples):
    """Zero-pad ``guard_samples`` on both sides of the time axis."""
    pad = [(0, 0)] * (waveform.ndim - 1) + [(guard_samples, guard_samples)]
    return np.pad(waveform, pad)


def strip_guards(waveform, guard_samples):
    if guard_samples == 0:
        return waveform
    return waveform[..., guard_samples:-guard_samples]


def transmit_vjp(tx, cfg: ChannelConfig, n, rng=None, noise=None):
    """Guard-padded link for a block stream of ``n`` samples per block.

    Pads ``cfg.guard_blocks`` dark blocks on each side, propagates, and strips
    them again.  Returns ``(rx, pullback)`` on the unpadded time axis.
    """
    g = cfg.guard_blocks * n
    rx, pb, _ = channel_vjp(pad_guards(tx, g), cfg, rng, noise)
    return strip_guards(rx, g), lambda grad: strip_guards(pb(pad_guards(grad, g)), g)
