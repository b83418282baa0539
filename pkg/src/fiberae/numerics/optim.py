"""Adam."""

from __future__ import annotations

import numpy as np


class NonFiniteGradient(FloatingPointError):
    pass


def adam_step(params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, step_count=1, names=None):
    """One bias-corrected Adam update, in place.

    Gradients are left untouched. Raises :class:`NonFiniteGradient` before
    touching any parameter if a gradient holds NaN or Inf.
    """
    if step_count < 1:
        raise ValueError("step_count must be >= 1")
    for i, p in enumerate(params):
        if not np.all(np.isfinite(p.grad)):
            label = names[i] if names else f"#{i}"
            raise NonFiniteGradient(f"non-finite gradient in parameter {label} at step {step_count}")
    c1 = 1.0 - beta1**step_count
    c2 = 1.0 - beta2**step_count
    for p in params:
        g = p.grad
        p.adam_m *= beta1
        p.adam_m += (1.0 - beta1) * g
        p.adam_v *= beta2
        p.adam_v += (1.0 - beta2) * g * g
        p.value -= lr * (p.adam_m / c1) / (np.sqrt(p.adam_v / c2) + eps)
