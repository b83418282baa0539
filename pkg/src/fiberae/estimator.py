"""Sliding-window sequence estimation and bit-error accounting."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .numerics import ConfigurationError, softmax, softmax_backward

Z95 = 1.959963984540054


def _decoder_of(model):
    return model.decode_window if hasattr(model, "decode_window") else model


def sliding_estimate(rx, model, window, n=None):
    """Per-block probabilities from overlapping windows of ``window`` blocks.

    Every window start ``s = 0 .. T-window`` is decoded (stride 1) and the
    probability vector for block ``t`` is the arithmetic mean over all
    windows covering it.  ``model`` is a transceiver or any callable mapping
    ``(S, window*n)`` windows to ``(S, window, M)`` probabilities; ``rx`` is
    ``(T*n,)`` or batched ``(B, T*n)``.
    """
    decode = _decoder_of(model)
    n = n if n is not None else model.n
    rx = np.asarray(rx, dtype=np.float64)
    single = rx.ndim == 1
    rx = np.atleast_2d(rx)
    B, L = rx.shape
    T = L // n
    if window < 1:
        raise ConfigurationError("window size must be >= 1")
    if T * n != L:
        raise ConfigurationError(f"waveform length {L} not a multiple of n={n}")
    if T < window:
        raise ConfigurationError(f"sequence of {T} blocks shorter than window {window}")
    S = T - window + 1
    probs = np.asarray(decode(_windows(rx.reshape(B, T, n), window))).reshape(B, S, window, -1)
    acc = np.zeros((B, T, probs.shape[-1]))
    for j in range(window):
        acc[:, j:j + S] += probs[:, :, j]
    out = acc / _coverage(T, window)[:, None]
    out /= out.sum(axis=-1, keepdims=True)
    return out[0] if single else out


def _windows(blocks, window):
    # (B, T, n) -> (B*S, window*n), window s covering blocks s .. s+window-1
    B, T, n = blocks.shape
    wins = np.lib.stride_tricks.sliding_window_view(blocks, window, axis=1)
    return np.moveaxis(wins, -1, -2).reshape(B * (T - window + 1), window * n)


def _coverage(T, window):
    S = T - window + 1
    t = np.arange(T)
    return np.minimum(t, S - 1) - np.maximum(0, t - window + 1) + 1


def sliding_vjp(rx, model, window):
    """Differentiable sliding-window estimate for a batch ``(B, T*n)``.

    Returns ``(probs (B, T, M), pullback)``; ``pullback(g_probs)`` gives the
    gradient w.r.t. ``rx`` and accumulates receiver parameter gradients.
    Unlike :func:`sliding_estimate` no final renormalization is applied
    (the mean of probability vectors already sums to one).
    """
    n = model.n
    B, L = rx.shape
    T = L // n
    if T < window:
        raise ConfigurationError(f"sequence of {T} blocks shorter than window {window}")
    S = T - window + 1
    wins = _windows(rx.reshape(B, T, n), window)
    logits, pb = model.decode_logits_vjp(wins)
    p = softmax(logits).reshape(B, S, window, -1)
    counts = _coverage(T, window)[:, None]
    acc = np.zeros((B, T, p.shape[-1]))
    for j in range(window):
        acc[:, j:j + S] += p[:, :, j]
    out = acc / counts

    def pullback(g):
        g = g / counts
        gp = np.empty_like(p)
        for j in range(window):
            gp[:, :, j] = g[:, j:j + S]
        gw = pb(softmax_backward(gp, p).reshape(B * S, window, -1)).reshape(B, S, window, n)
        grx = np.zeros((B, T, n))
        for j in range(window):
            grx[:, j:j + S] += gw[:, :, j]
        return grx.reshape(B, L)

    return out, pullback


def decide(p):
    """Argmax over the last axis; ties go to the lowest index."""
    return np.argmax(np.asarray(p), axis=-1)


def bits_of(m, M):
    """Natural binary labels, MSB first: ``(..., log2 M)`` of 0/1."""
    k = int(round(math.log2(M)))
    if 2**k != M:
        raise ConfigurationError("M must be a power of two")
    m = np.asarray(m, dtype=np.int64)
    shifts = np.arange(k - 1, -1, -1)
    return ((m[..., None] >> shifts) & 1).astype(np.uint8)


def wilson_interval(errors, total, z=Z95):
    if total == 0:
        return 0.0, 1.0
    p = errors / total
    denom = 1 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class BerResult:
    bit_errors: int
    bits_total: int
    ber: float
    block_errors: int
    blocks_total: int
    ci95: tuple

    def to_dict(self):
        d = asdict(self)
        d["ci95"] = list(self.ci95)
        return d


def ber(tx_bits, rx_bits, bits_per_block=None):
    """Bit error rate of two equal-length bit streams, with a Wilson 95% CI.

    When ``bits_per_block`` is given the streams are also grouped into
    blocks to count block errors.
    """
    a = np.asarray(tx_bits).reshape(-1)
    b = np.asarray(rx_bits).reshape(-1)
    if a.shape != b.shape:
        raise ConfigurationError(f"bit stream lengths differ: {a.size} vs {b.size}")
    diff = a != b
    errors = int(diff.sum())
    total = int(a.size)
    if bits_per_block:
        per_block = diff.reshape(-1, bits_per_block).any(axis=1)
        blocks, block_errors = per_block.size, int(per_block.sum())
    else:
        blocks, block_errors = total, errors
    return BerResult(errors, total, errors / total if total else 0.0, block_errors, blocks,
                     wilson_interval(errors, total))
