"""Learnable transmitters and receivers.

Two designs share one interface:

* :class:`FfnnTransceiver` encodes and decodes each block on its own.
* :class:`BrnnTransceiver` runs a bidirectional recurrent cell over the
  message sequence at the transmitter and over the received blocks at the
  receiver.

Forward passes come in two flavours: plain methods (``encode``, ``decode``,
``decode_window``) that only read the parameters, and ``*_vjp`` methods that
also return a pullback closure.  A pullback maps the gradient of the output
to the gradient of the input and accumulates parameter gradients.

Array layout: messages ``(..., T)``; waveforms ``(..., T*n)``; logits and
probabilities ``(..., T, M)``.
"""

from __future__ import annotations

import math

import numpy as np

from .numerics import (
    ACTIVATIONS,
    ConfigurationError,
    Parameter,
    RngStream,
    activation,
    activation_backward,
    dense,
    dense_backward,
    one_hot,
    softmax,
)

MERGE_MODES = ("concat", "average")


def _init_weight(rng, fan_out, fan_in):
    if rng is None:
        return np.zeros((fan_out, fan_in))
    return rng.standard_normal(fan_out * fan_in).reshape(fan_out, fan_in) / math.sqrt(fan_in)


class FfnnStack:
    """Fully connected layers ``h = act(W h + b)``, applied to the last axis."""

    def __init__(self, dims, activations, rng=None, zero_last=False):
        if len(activations) != len(dims) - 1:
            raise ConfigurationError("FfnnStack needs one activation per layer")
        for kind in activations:
            if kind not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {kind!r}")
        self.dims = list(dims)
        self.activations = list(activations)
        self.layers = []
        for i, (d_in, d_out) in enumerate(zip(dims[:-1], dims[1:])):
            last = i == len(dims) - 2
            W = Parameter(np.zeros((d_out, d_in)) if (last and zero_last) else _init_weight(rng, d_out, d_in))
            self.layers.append((W, Parameter(np.zeros(d_out)), activations[i]))

    @property
    def input_dim(self):
        return self.dims[0]

    @property
    def output_dim(self):
        return self.dims[-1]

    def parameters(self, prefix=""):
        out = []
        for i, (W, b, _) in enumerate(self.layers):
            out += [(f"{prefix}W{i}", W), (f"{prefix}b{i}", b)]
        return out

    def forward(self, x):
        for W, b, kind in self.layers:
            x = activation(dense(x, W, b), kind)
        return x

    def forward_vjp(self, x):
        tape = []
        for W, b, kind in self.layers:
            z = dense(x, W, b)
            tape.append((x, z))
            x = activation(z, kind)

        def pullback(g):
            for (W, b, kind), (xi, z) in zip(reversed(self.layers), reversed(tape)):
                g = dense_backward(activation_backward(g, z, kind), xi, W, b)
            return g

        return x, pullback


class BrnnCell:
    """Bidirectional recurrent cell.

    Forward:  ``hf[t] = act(W_fw [x[t]; hf[t-1]] + b_fw)`` for t = 1..T.
    Backward: ``hb[t] = act(W_bw [x[t]; hb[t+1]] + b_bw)`` for t = T..1.
    Both start from zero states.  The output at ``t`` merges ``hf[t]`` and
    ``hb[t]`` by concatenation (width 2H) or element-wise mean (width H).
    """

    def __init__(self, input_dim, hidden_dim, activation="relu", merge="concat", rng=None):
        if merge not in MERGE_MODES:
            raise ConfigurationError(f"unknown merge mode {merge!r}")
        if activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {activation!r}")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.activation = activation
        self.merge = merge
        fan_in = input_dim + hidden_dim
        self.W_fw = Parameter(_init_weight(rng, hidden_dim, fan_in))
        self.b_fw = Parameter(np.zeros(hidden_dim))
        self.W_bw = Parameter(_init_weight(rng, hidden_dim, fan_in))
        self.b_bw = Parameter(np.zeros(hidden_dim))

    @property
    def output_dim(self):
        return 2 * self.hidden_dim if self.merge == "concat" else self.hidden_dim

    def parameters(self, prefix=""):
        return [
            (prefix + "W_fw", self.W_fw),
            (prefix + "b_fw", self.b_fw),
            (prefix + "W_bw", self.W_bw),
            (prefix + "b_bw", self.b_bw),
        ]

    def _run(self, xs, W, b, reverse):
        # xs: (T, B, D) -> pre-activations and states, both (T, B, H)
        D = self.input_dim
        T, B, _ = xs.shape
        H = self.hidden_dim
        xw = xs @ W.value[:, :D].T + b.value
        Wh = W.value[:, D:].T
        z = np.empty((T, B, H))
        h = np.empty((T, B, H))
        prev = np.zeros((B, H))
        for t in (range(T - 1, -1, -1) if reverse else range(T)):
            z[t] = xw[t] + prev @ Wh
            prev = h[t] = activation(z[t], self.activation)
        return z, h

    def _unrun(self, gh, xs, z, h, W, b, reverse):
        D = self.input_dim
        T, B, H = h.shape
        Wh = W.value[:, D:]
        gz = np.empty_like(z)
        carry = np.zeros((B, H))
        for t in (range(T) if reverse else range(T - 1, -1, -1)):
            gz[t] = activation_backward(gh[t] + carry, z[t], self.activation)
            carry = gz[t] @ Wh
        # state fed into step t (zeros at the sequence start of this direction)
        prev = np.zeros_like(h)
        if reverse:
            prev[:-1] = h[1:]
        else:
            prev[1:] = h[:-1]
        g2 = gz.reshape(-1, H)
        W.grad[:, :D] += g2.T @ xs.reshape(-1, D)
        W.grad[:, D:] += g2.T @ prev.reshape(-1, H)
        b.grad += g2.sum(axis=0)
        return gz @ W.value[:, :D]

    def _merge(self, hf, hb):
        if self.merge == "concat":
            return np.concatenate([hf, hb], axis=-1)
        return 0.5 * (hf + hb)

    def forward_vjp(self, xs):
        """Run over ``xs`` of shape ``(..., T, D)``; returns ``(out, pullback)``."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim < 2 or xs.shape[-2] < 1:
            raise ConfigurationError("brnn_pass needs a non-empty sequence")
        if xs.shape[-1] != self.input_dim:
            raise ConfigurationError(f"brnn input width {xs.shape[-1]} != {self.input_dim}")
        lead = xs.shape[:-2]
        T = xs.shape[-2]
        xt = np.moveaxis(xs.reshape(-1, T, self.input_dim), 1, 0)
        zf, hf = self._run(xt, self.W_fw, self.b_fw, reverse=False)
        zb, hb = self._run(xt, self.W_bw, self.b_bw, reverse=True)
        out = np.moveaxis(self._merge(hf, hb), 0, 1).reshape(lead + (T, self.output_dim))

        def pullback(g):
            g = np.moveaxis(g.reshape(-1, T, self.output_dim), 1, 0)
            H = self.hidden_dim
            if self.merge == "concat":
                gf, gb = g[..., :H], g[..., H:]
            else:
                gf = gb = 0.5 * g
            gx = self._unrun(gf, xt, zf, hf, self.W_fw, self.b_fw, reverse=False)
            gx = gx + self._unrun(gb, xt, zb, hb, self.W_bw, self.b_bw, reverse=True)
            return np.moveaxis(gx, 0, 1).reshape(lead + (T, self.input_dim))

        return out, pullback

    def forward(self, xs):
        return self.forward_vjp(xs)[0]


def brnn_pass(xs, cell: BrnnCell):
    return cell.forward(xs)


class Transceiver:
    """Common surface of both designs."""

    kind = None

    def __init__(self, M, n):
        if M < 1 or (M & (M - 1)) != 0:
            raise ConfigurationError(f"M must be a power of two, got {M}")
        if n < 1:
            raise ConfigurationError("n must be >= 1")
        self.M = M
        self.n = n

    @property
    def bits_per_block(self):
        return int(math.log2(self.M))

    def named_parameters(self):
        raise NotImplementedError

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def hyperparameters(self):
        raise NotImplementedError

    def _blocks(self, rx):
        rx = np.asarray(rx, dtype=np.float64)
        if rx.shape[-1] % self.n:
            raise ConfigurationError(f"waveform length {rx.shape[-1]} is not a multiple of n={self.n}")
        return rx.reshape(rx.shape[:-1] + (rx.shape[-1] // self.n, self.n))

    def encode(self, messages):
        return self.encode_vjp(messages)[0]

    def decode_logits(self, rx):
        return self.decode_logits_vjp(rx)[0]

    def decode(self, rx):
        """Probabilities ``(..., T, M)`` for a received block stream."""
        return softmax(self.decode_logits(rx))

    def decode_window(self, windows):
        """Decode independent windows ``(S, Wn*n)`` -> ``(S, Wn, M)``."""
        windows = np.asarray(windows, dtype=np.float64)
        if windows.shape[-1] < self.n:
            raise ConfigurationError("window shorter than one block")
        return self.decode(windows)


class FfnnTransceiver(Transceiver):
    """Block-local autoencoder.

    Encoder: one-hot(M) -> hidden ReLU layers -> n samples through a clipped
    ReLU; decoder: n samples -> hidden ReLU layers -> M logits.
    """

    kind = "ffnn"

    def __init__(self, M=16, n=12, hidden=(128, 128), rng=None, zero_output=False):
        super().__init__(M, n)
        self.hidden = tuple(hidden)
        acts = ["relu"] * len(self.hidden)
        self.encoder = FfnnStack([M, *self.hidden, n], acts + ["clipped_relu01"], rng)
        self.decoder = FfnnStack([n, *self.hidden, M], acts + ["identity"], rng, zero_last=zero_output)

    def named_parameters(self):
        return self.encoder.parameters("encoder.") + self.decoder.parameters("decoder.")

    def hyperparameters(self):
        return {
            "kind": self.kind,
            "M": self.M,
            "n": self.n,
            "hidden": list(self.hidden),
            "encoder_activations": self.encoder.activations,
            "decoder_activations": self.decoder.activations,
        }

    def encode_block(self, m):
        """Samples ``(..., n)`` for message indices ``m``."""
        return self.encoder.forward(one_hot(m, self.M))

    def encode_vjp(self, messages):
        messages = np.asarray(messages)
        y, pb = self.encoder.forward_vjp(one_hot(messages, self.M))
        shape = y.shape
        wave = y.reshape(shape[:-2] + (shape[-2] * self.n,))
        return wave, lambda g: pb(g.reshape(shape))

    def decode_block(self, r):
        return softmax(self.decoder.forward(np.asarray(r, dtype=np.float64)))

    def decode_logits_vjp(self, rx):
        blocks = self._blocks(rx)
        logits, pb = self.decoder.forward_vjp(blocks)
        return logits, lambda g: pb(g).reshape(g.shape[:-2] + (-1,))


class BrnnTransceiver(Transceiver):
    """Sequence autoencoder built from two bidirectional cells.

    Transmitter: one-hot -> BRNN -> per-step dense + clipped ReLU to n samples.
    Receiver: n samples per step -> BRNN -> per-step dense to M logits.
    The per-step projections are shared across time.
    """

    kind = "brnn"

    def __init__(self, M=16, n=12, hidden=64, merge_tx="average", merge_rx="concat",
                 activation="relu", rng=None, zero_output=False):
        super().__init__(M, n)
        self.hidden = hidden
        self.tx_cell = BrnnCell(M, hidden, activation, merge_tx, rng)
        self.tx_proj = FfnnStack([self.tx_cell.output_dim, n], ["clipped_relu01"], rng)
        self.rx_cell = BrnnCell(n, hidden, activation, merge_rx, rng)
        self.rx_proj = FfnnStack([self.rx_cell.output_dim, M], ["identity"], rng, zero_last=zero_output)

    def named_parameters(self):
        return (
            self.tx_cell.parameters("tx_cell.")
            + self.tx_proj.parameters("tx_proj.")
            + self.rx_cell.parameters("rx_cell.")
            + self.rx_proj.parameters("rx_proj.")
        )

    def hyperparameters(self):
        return {
            "kind": self.kind,
            "M": self.M,
            "n": self.n,
            "hidden": self.hidden,
            "merge_tx": self.tx_cell.merge,
            "merge_rx": self.rx_cell.merge,
            "activation": self.tx_cell.activation,
            "encoder_activations": [self.tx_cell.activation, "clipped_relu01"],
            "decoder_activations": [self.rx_cell.activation, "identity"],
        }

    def encode_vjp(self, messages):
        messages = np.asarray(messages)
        if messages.ndim < 1 or messages.shape[-1] < 1:
            raise ConfigurationError("brnn_encode needs at least one message")
        h, pb_cell = self.tx_cell.forward_vjp(one_hot(messages, self.M))
        y, pb_proj = self.tx_proj.forward_vjp(h)
        shape = y.shape
        wave = y.reshape(shape[:-2] + (shape[-2] * self.n,))
        return wave, lambda g: pb_cell(pb_proj(g.reshape(shape)))

    def decode_logits_vjp(self, rx):
        blocks = self._blocks(rx)
        h, pb_cell = self.rx_cell.forward_vjp(blocks)
        logits, pb_proj = self.rx_proj.forward_vjp(h)
        return logits, lambda g: pb_cell(pb_proj(g)).reshape(g.shape[:-2] + (-1,))


def build_model(kind, M=16, n=12, seed=None, rng=None, zero_output=False, **arch):
    """Construct a transceiver; weights ~ N(0, 1/fan_in) from ``rng`` (or ``seed``)."""
    if rng is None and seed is not None:
        rng = RngStream(seed)
    if kind == "ffnn":
        return FfnnTransceiver(M, n, rng=rng, zero_output=zero_output, **arch)
    if kind == "brnn":
        return BrnnTransceiver(M, n, rng=rng, zero_output=zero_output, **arch)
    raise ConfigurationError(f"unknown model kind {kind!r}")


def model_from_hyperparameters(hp):
    hp = dict(hp)
    kind = hp.pop("kind")
    M, n = hp.pop("M"), hp.pop("n")
    hp.pop("encoder_activations", None)
    hp.pop("decoder_activations", None)
    if kind == "ffnn":
        return FfnnTransceiver(M, n, hidden=tuple(hp["hidden"]))
    if kind == "brnn":
        return BrnnTransceiver(M, n, hidden=hp["hidden"], merge_tx=hp["merge_tx"],
                               merge_rx=hp["merge_rx"], activation=hp["activation"])
    raise ConfigurationError(f"unknown model kind {kind!r}")
