"""Unitary DFT (numpy's pocketfft, ``norm="ortho"``) along the last axis.

Any length is accepted; no padding is applied.
"""

import numpy as np


def dft(x):
    return np.fft.fft(x, axis=-1, norm="ortho")


def idft(X):
    return np.fft.ifft(X, axis=-1, norm="ortho")


def angular_frequencies(n: int, sample_rate: float) -> np.ndarray:
    """Angular baseband frequency of each DFT bin, rad/s."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=1.0 / sample_rate)
