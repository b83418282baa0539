"""Seeded, platform-independent random streams.

The generator is xoshiro256** run as ``LANES`` independent lanes in lock-step
so that large draws vectorise over numpy.  Lane ``k`` is seeded with four
consecutive splitmix64 outputs (indices ``4k .. 4k+3``) of the stream seed.
One generator step produces ``LANES`` words; word ``i`` of a stream's output
sequence is step ``i // LANES``, lane ``i % LANES``.  Words are buffered, so
the sequence depends only on the seed and on the total number drawn, never
on how the draws were chunked.

Per-purpose streams are derived from a root seed with :func:`derive_seed`
(see :class:`Streams` for the indices used by the library).
"""

from __future__ import annotations

import math

import numpy as np

LANES = 1024

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15

_U = np.uint64


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _U(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U(27))) * _U(0x94D049BB133111EB)
    return z ^ (z >> _U(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of splitmix64 started from ``seed``."""
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _U(seed & _MASK) + idx * _U(_GAMMA)
        return _mix64(z)


def derive_seed(root: int, index: int) -> int:
    """Seed of sub-stream ``index`` of ``root``.

    Equals splitmix64 output number ``index + 1`` of the sequence started at
    ``root ^ 0x5DEECE66D`` (the xor keeps sub-stream seeds off the lane seeds
    of the root stream itself).
    """
    if index < 0:
        raise ValueError("stream index must be non-negative")
    return int(splitmix64((root ^ 0x5DEECE66D) & _MASK, index + 1)[-1])


def _rotl(x: np.ndarray, k: int) -> np.ndarray:
    return (x << _U(k)) | (x >> _U(64 - k))


class RngStream:
    """xoshiro256** stream with Box-Muller Gaussians.

    Parameters
    ----------
    seed : int
        64-bit seed (reduced modulo 2**64).
    """

    algorithm = "xoshiro256**/splitmix64/lanes=%d" % LANES

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        words = splitmix64(self.seed, 4 * LANES).reshape(LANES, 4)
        self._s = [words[:, j].copy() for j in range(4)]
        self._buf = np.empty(0, dtype=np.uint64)
        self._spare = np.empty(0, dtype=np.float64)
        self.draws = 0  # number of 64-bit words handed out

    def spawn(self, index: int) -> "RngStream":
        return RngStream(derive_seed(self.seed, index))

    def _step(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        with np.errstate(over="ignore"):
            out = _rotl(s1 * _U(5), 7) * _U(9)
        t = s1 << _U(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        self._s[3] = _rotl(s3, 45)
        return out

    def next_u64(self, count: int) -> np.ndarray:
        """Next ``count`` raw 64-bit words."""
        need = count - self._buf.size
        if need > 0:
            steps = -(-need // LANES)
            fresh = np.concatenate([self._step() for _ in range(steps)])
            self._buf = np.concatenate([self._buf, fresh])
        out, self._buf = self._buf[:count], self._buf[count:]
        self.draws += count
        return out

    def uniform(self, count: int) -> np.ndarray:
        """Doubles in [0, 1) from the top 53 bits of each word."""
        return (self.next_u64(count) >> _U(11)).astype(np.float64) * 2.0**-53

    def integers(self, count: int, high: int) -> np.ndarray:
        """Integers uniform on [0, high) as ``floor(u * high)``."""
        if high < 1:
            raise ValueError("high must be >= 1")
        return np.minimum((self.uniform(count) * high).astype(np.int64), high - 1)

    def standard_normal(self, count: int) -> np.ndarray:
        """Box-Muller normals.

        Each pair of uniforms (u1, u2) yields ``r*cos(2 pi u2)`` followed by
        ``r*sin(2 pi u2)`` with ``r = sqrt(-2 ln(1 - u1))``.  An unused second
        output is kept for the next call.
        """
        take = min(count, self._spare.size)
        head, self._spare = self._spare[:take], self._spare[take:]
        rest = count - take
        if rest == 0:
            return head.copy()
        pairs = -(-rest // 2)
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * math.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        z = z.ravel()
        self._spare = z[rest:]
        return np.concatenate([head, z[:rest]])


def gaussian(rng: RngStream, n, sigma: float) -> np.ndarray:
    """i.i.d. N(0, sigma**2) samples; ``n`` may be an int or a shape."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    shape = (n,) if np.isscalar(n) else tuple(n)
    z = rng.standard_normal(int(np.prod(shape))).reshape(shape)
    # draw regardless of sigma so downstream stream positions do not move
    return np.zeros(shape) if sigma == 0 else sigma * z


class Streams:
    """Sub-stream indices derived from a run's root seed."""

    INIT = 0
    MESSAGES = 1
    NOISE = 2
    HELDOUT = 3
    EVAL = 4
    SWEEP = 5
