"""Central finite-difference gradient checks."""

from __future__ import annotations

import numpy as np

STEP = 1e-5
# Denominator floor of the relative error, as a fraction of max(1, |f(x)|).
# Central differences cannot resolve components much below eps*|f|/STEP
# (~1e-11 |f|), so smaller components are compared on this absolute scale.
FLOOR_SCALE = 1e-6


def floor_for(value):
    return FLOOR_SCALE * max(1.0, abs(float(value)))


def relative_error(analytic, numeric, floor=FLOOR_SCALE):
    """``|a - n| / max(|a|, |n|, floor)`` elementwise."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def _pick(size, probes, rng):
    if probes is None or probes >= size:
        return np.arange(size)
    if rng is None:
        return np.linspace(0, size - 1, probes).round().astype(np.int64)
    # a random subset: argsort of uniform keys, without replacement
    return np.sort(np.argsort(rng.uniform(size), kind="stable")[:probes])


def grad_check(f, point, probes=None, rng=None, step=STEP):
    """Worst relative error between an analytic and a numerical gradient.

    Relative errors use the denominator ``max(|a|, |n|, 1e-6 * max(1, |f(x)|))``.

    ``f(x)`` returns ``(value, gradient)``; only the value is used at the
    perturbed points.  ``probes`` coordinates are checked (all when None),
    drawn from ``rng`` when given, else evenly spaced.
    """
    x = np.array(point, dtype=np.float64)
    f0, g = f(x.copy())
    floor = floor_for(f0)
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    flat = x.reshape(-1)
    worst = 0.0
    for i in _pick(flat.size, probes, rng):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += step
        xm[i] -= step
        num = (f(xp.reshape(x.shape))[0] - f(xm.reshape(x.shape))[0]) / (2 * step)
        worst = max(worst, float(relative_error(g[i], num, floor)))
    return worst


def check_parameters(loss, params, probes=None, rng=None, step=STEP):
    """Grad-check a loss against the gradients it accumulates in ``params``.

    ``loss(backward)`` must reset the gradients, evaluate the loss and, when
    ``backward`` is true, fill every ``Parameter.grad``.  Returns the worst
    relative error over the probed coordinates of all parameters.
    """
    floor = floor_for(loss(True))
    analytic = np.concatenate([p.grad.reshape(-1) for p in params])
    offsets = np.cumsum([0] + [p.value.size for p in params])
    worst = 0.0
    for k in _pick(int(offsets[-1]), probes, rng):
        j = int(np.searchsorted(offsets, k, side="right") - 1)
        flat = params[j].value.reshape(-1)
        i = k - offsets[j]
        orig = flat[i]
        flat[i] = orig + step
        fp = loss(False)
        flat[i] = orig - step
        fm = loss(False)
        flat[i] = orig
        worst = max(worst, float(relative_error(analytic[k], (fp - fm) / (2 * step), floor)))
    return worst
