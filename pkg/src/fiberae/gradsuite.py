"""Registered finite-difference gradient checks.

Three scopes: ``ops`` (each op alone, threshold 1e-6), ``chain`` (the full
channel with frozen noise, 1e-4) and ``e2e`` (encoder -> channel ->
decoder -> cross-entropy, 1e-4).  Each check draws at least 100 probes where
the operand has that many coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel as ch
from . import estimator
from .numerics import (
    Parameter,
    RngStream,
    activation,
    activation_backward,
    check_parameters,
    cross_entropy,
    dense,
    dense_backward,
    gaussian,
    grad_check,
    softmax,
    softmax_backward,
    softmax_cross_entropy_backward,
)
from .trainer import e2e_loss, sample_batch
from .transceiver import BrnnCell, build_model

OPS_THRESHOLD = 1e-6
COMPOSED_THRESHOLD = 1e-4
PROBES = 100


@dataclass
class CheckResult:
    name: str
    scope: str
    error: float
    threshold: float

    @property
    def passed(self):
        return self.error < self.threshold


_REGISTRY = []


def register(name, scope):
    def deco(fn):
        _REGISTRY.append((name, scope, fn))
        return fn
    return deco


def _probe_rng(name):
    return RngStream(sum(map(ord, name)))


def _real_loss(out, r):
    """Linear functional of a real or complex output; returns (value, dvalue/dout)."""
    if np.iscomplexobj(out):
        return float(np.sum(r.real * out.real + r.imag * out.imag)), r
    return float(np.sum(r * out)), r


def _randc(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _as_complex(x):
    return x[0] + 1j * x[1]


# ----------------------------------------------------------------------- ops

@register("dense", "ops")
def _dense():
    r = RngStream(101)
    W = Parameter(r.standard_normal(5 * 3).reshape(5, 3))
    b = Parameter(r.standard_normal(5))
    x = r.standard_normal(4 * 3).reshape(4, 3)
    proj = r.standard_normal(20).reshape(4, 5)

    def loss(backward):
        W.zero_grad()
        b.zero_grad()
        y = dense(x, W, b)
        if backward:
            dense_backward(proj, x, W, b)
        return float(np.sum(proj * y))

    e1 = check_parameters(loss, [W, b], PROBES, _probe_rng("dense"))
    e2 = grad_check(lambda z: (float(np.sum(proj * dense(z, W, b))), dense_backward(proj, z, W, Parameter(np.zeros(5)))), x)
    return max(e1, e2)


@register("activation", "ops")
def _activation():
    r = RngStream(102)
    # keep every probe at least 1e-3 away from the kinks at 0 and 1
    x = r.uniform(120) * 3 - 1
    x[np.abs(x) < 1e-3] += 2e-3
    x[np.abs(x - 1) < 1e-3] += 2e-3
    proj = r.standard_normal(120)
    return max(
        grad_check(lambda z: (float(proj @ activation(z, k)), activation_backward(proj, z, k)), x)
        for k in ("relu", "clipped_relu01", "identity")
    )


@register("softmax", "ops")
def _softmax():
    r = RngStream(103)
    proj = r.standard_normal(8 * 16).reshape(16, 8)

    def f(z):
        p = softmax(z)
        return float(np.sum(proj * p)), softmax_backward(proj, p)

    return grad_check(f, r.standard_normal(128).reshape(16, 8))


@register("softmax_cross_entropy", "ops")
def _softmax_ce():
    r = RngStream(104)
    t = r.integers(16, 8)

    def f(z):
        p = softmax(z)
        return float(cross_entropy(p, t).sum()), softmax_cross_entropy_backward(np.ones(16), p, t)

    return grad_check(f, r.standard_normal(128).reshape(16, 8))


def _field_check(op, back, n=64, seed=105):
    """Grad-check a complex->complex linear-ish op using (re, im) coordinates."""
    r = RngStream(seed)
    proj = _randc(r, n)

    def f(x):
        out = op(_as_complex(x))
        val, g = _real_loss(out, proj)
        gin = back(g)
        return val, np.stack([gin.real, gin.imag])

    x0 = np.stack([r.standard_normal(n), r.standard_normal(n)])
    return grad_check(f, x0, PROBES, _probe_rng(op.__name__ if hasattr(op, "__name__") else "op"))


@register("lowpass", "ops")
def _lowpass():
    fs, bw = 84e9, 32e9
    e1 = _field_check(lambda E: ch.lowpass(E, bw, fs), lambda g: ch.lowpass_backward(g, bw, fs))
    r = RngStream(106)
    proj = r.standard_normal(128)
    e2 = grad_check(lambda x: (float(proj @ ch.lowpass(x, bw, fs)), ch.lowpass_backward(proj, bw, fs)),
                    r.standard_normal(128), PROBES, _probe_rng("lowpass"))
    return max(e1, e2)


@register("disperse", "ops")
def _disperse():
    return _field_check(lambda E: ch.disperse(E, 40.0, -21.7), lambda g: ch.disperse_backward(g, 40.0, -21.7))


@register("attenuate", "ops")
def _attenuate():
    return _field_check(lambda E: ch.attenuate(E, 0.2, 50.0), lambda g: ch.attenuate_backward(g, 0.2, 50.0))


@register("photodiode", "ops")
def _photodiode():
    r = RngStream(107)
    proj = r.standard_normal(64)

    def f(x):
        E = _as_complex(x)
        gE = ch.photodiode_backward(proj, E)
        return float(proj @ ch.photodiode(E)), np.stack([gE.real, gE.imag])

    return grad_check(f, np.stack([r.standard_normal(64), r.standard_normal(64)]), PROBES, _probe_rng("pd"))


@register("modulate", "ops")
def _modulate():
    r = RngStream(108)
    proj = _randc(r, 128)

    def f(x):
        val, g = _real_loss(ch.modulate(x), proj)
        return val, ch.modulate_backward(g)

    return grad_check(f, r.uniform(128) * 0.98 + 0.01, PROBES, _probe_rng("mod"))


@register("add_noise", "ops")
def _add_noise():
    r = RngStream(109)
    proj = r.standard_normal(128)
    noise = gaussian(RngStream(1), 128, 0.1)
    return grad_check(lambda y: (float(proj @ (y + noise)), ch.add_noise_backward(proj)),
                      r.standard_normal(128), PROBES, _probe_rng("noise"))


@register("brnn_pass", "ops")
def _brnn_pass():
    worst = 0.0
    for merge in ("concat", "average"):
        r = RngStream(110)
        cell = BrnnCell(3, 5, "relu", merge, rng=r)
        for p in (cell.b_fw, cell.b_bw):
            p.value[:] = 0.3 * r.standard_normal(5)
        xs = r.standard_normal(2 * 6 * 3).reshape(2, 6, 3)
        proj = r.standard_normal(2 * 6 * cell.output_dim).reshape(2, 6, cell.output_dim)
        params = [p for _, p in cell.parameters()]

        def loss(backward):
            for p in params:
                p.zero_grad()
            out, pb = cell.forward_vjp(xs)
            if backward:
                pb(proj)
            return float(np.sum(proj * out))

        worst = max(worst, check_parameters(loss, params, PROBES, _probe_rng("brnn" + merge)))

        def f(x):
            out, pb = cell.forward_vjp(x)
            return float(np.sum(proj * out)), pb(proj)

        worst = max(worst, grad_check(f, xs, PROBES, _probe_rng("brnnx" + merge)))
    return worst


@register("sliding_estimate", "ops")
def _sliding():
    r = RngStream(111)
    model = build_model("brnn", M=4, n=3, rng=r, hidden=5)
    rx = r.standard_normal(2 * 6 * 3).reshape(2, 18)
    proj = r.standard_normal(2 * 6 * 4).reshape(2, 6, 4)

    def f(x):
        p, pb = estimator.sliding_vjp(x, model, 3)
        return float(np.sum(proj * p)), pb(proj)

    return grad_check(f, rx, PROBES, _probe_rng("sliding"))


# --------------------------------------------------------------------- chain

@register("channel_forward", "chain")
def _chain():
    worst = 0.0
    r = RngStream(201)
    for cfg in (ch.ChannelConfig(distance=30.0, atten_db_per_km=0.2),
                ch.ChannelConfig(distance=80.0, include_tx_lpf=False)):
        tx = r.uniform(3 * 96).reshape(3, 96) * 0.9 + 0.05
        noise = gaussian(r, tx.shape, cfg.noise_sigma)
        proj = r.standard_normal(tx.size).reshape(tx.shape)

        def f(x):
            rx, pb, _ = ch.channel_vjp(x, cfg, noise=noise)
            return float(np.sum(proj * rx)), pb(proj)

        worst = max(worst, grad_check(f, tx, PROBES, _probe_rng("chain")))
    return worst


# ----------------------------------------------------------------------- e2e

def _e2e(kind, window=None, **arch):
    r = RngStream(301)
    model = build_model(kind, M=4, n=4, rng=r, **arch)
    cfg = ch.ChannelConfig(distance=40.0)
    T = 6 if window else 4
    batch = sample_batch(r, 3, T, 4)
    noise = gaussian(r, (3, (T + 2 * cfg.guard_blocks) * 4), cfg.noise_sigma)

    def loss(backward):
        model.zero_grad()
        return e2e_loss(model, batch, cfg, edge_exclusion=1, noise=noise, backward=backward, window=window)

    return check_parameters(loss, model.parameters(), 2 * PROBES, _probe_rng("e2e" + kind))


@register("e2e_ffnn", "e2e")
def _e2e_ffnn():
    return _e2e("ffnn", hidden=(16, 16))


@register("e2e_brnn", "e2e")
def _e2e_brnn():
    return max(_e2e("brnn", hidden=8), _e2e("brnn", hidden=8, merge_tx="concat", merge_rx="average"))


@register("e2e_sbrnn", "e2e")
def _e2e_sbrnn():
    return _e2e("brnn", window=3, hidden=8)


def run(scopes=("ops", "chain", "e2e")):
    """Run every registered check in ``scopes``; returns a list of CheckResult."""
    out = []
    for name, scope, fn in _REGISTRY:
        if scope in scopes:
            thr = OPS_THRESHOLD if scope == "ops" else COMPOSED_THRESHOLD
            out.append(CheckResult(name, scope, fn(), thr))
    return out
