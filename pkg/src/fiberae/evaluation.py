"""Monte-Carlo BER evaluation of a trained transceiver."""

from __future__ import annotations

from .channel import ChannelConfig, transmit_vjp
from .estimator import BerResult, bits_of, decide, sliding_estimate, wilson_interval
from .numerics import ConfigurationError, RngStream, Streams, derive_seed

HD_FEC_BER = 4.5e-3
HD_FEC_LABEL = "6.7% HD-FEC"


def estimate_blocks(model, rx, window):
    """Block probabilities: sliding-window for BRNN receivers, per block for FFNN."""
    if model.kind == "ffnn":
        return model.decode(rx)
    return sliding_estimate(rx, model, window)


def evaluate_ber(model, channel: ChannelConfig, window=1, seed=0, min_errors=100,
                 max_blocks=200_000, seq_blocks=100, edge_exclusion=2, batch=16):
    """Simulate until ``min_errors`` bit errors or ``max_blocks`` counted blocks.

    Messages are sent as independent sequences of ``seq_blocks`` blocks with
    dark guard intervals; the ``edge_exclusion`` blocks at either end of each
    sequence are decoded but not counted.  ``min_errors = 0`` disables the
    error-count stopping rule.
    """
    channel.validate()
    per_seq = seq_blocks - 2 * edge_exclusion
    if per_seq < 1:
        raise ConfigurationError("eval.seq_blocks must exceed 2 * edge_exclusion")
    if seq_blocks < window:
        raise ConfigurationError("eval.seq_blocks must be >= window")
    if max_blocks < 1:
        raise ConfigurationError("eval.max_blocks must be >= 1")
    msg_rng = RngStream(derive_seed(seed, Streams.MESSAGES))
    noise_rng = RngStream(derive_seed(seed, Streams.NOISE))
    k = model.bits_per_block
    bit_errors = block_errors = blocks = 0
    while blocks < max_blocks and not (min_errors > 0 and bit_errors >= min_errors):
        remaining = max_blocks - blocks
        b = min(batch, -(-remaining // per_seq))
        msgs = msg_rng.integers(b * seq_blocks, model.M).reshape(b, seq_blocks)
        rx, _ = transmit_vjp(model.encode(msgs), channel, model.n, noise_rng)
        decided = decide(estimate_blocks(model, rx, window))
        inner = slice(edge_exclusion, seq_blocks - edge_exclusion)
        sent = msgs[:, inner].reshape(-1)[:remaining]
        got = decided[:, inner].reshape(-1)[:remaining]
        diff = bits_of(sent, model.M) != bits_of(got, model.M)
        bit_errors += int(diff.sum())
        block_errors += int(diff.any(axis=-1).sum())
        blocks += sent.size
    total = blocks * k
    return BerResult(bit_errors, total, bit_errors / total if total else 0.0,
                     block_errors, blocks, wilson_interval(bit_errors, total))
