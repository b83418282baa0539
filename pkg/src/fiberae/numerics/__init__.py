"""Numeric core: differentiable ops, Adam, unitary DFT, seeded RNG, grad checks."""

from .gradcheck import check_parameters, grad_check, relative_error
from .ops import (
    ACTIVATIONS,
    LOG_FLOOR,
    ConfigurationError,
    Parameter,
    activation,
    activation_backward,
    cross_entropy,
    cross_entropy_backward,
    dense,
    dense_backward,
    one_hot,
    softmax,
    softmax_backward,
    softmax_cross_entropy_backward,
)
from .optim import NonFiniteGradient, adam_step
from .rng import RngStream, Streams, derive_seed, gaussian, splitmix64
from .spectral import angular_frequencies, dft, idft

__all__ = [
    "ACTIVATIONS", "LOG_FLOOR", "ConfigurationError", "NonFiniteGradient", "Parameter",
    "RngStream", "Streams", "activation", "activation_backward", "adam_step",
    "angular_frequencies", "check_parameters", "cross_entropy", "cross_entropy_backward",
    "dense", "dense_backward", "derive_seed", "dft", "gaussian", "grad_check", "idft",
    "one_hot", "relative_error", "softmax", "softmax_backward",
    "softmax_cross_entropy_backward", "splitmix64",
]
