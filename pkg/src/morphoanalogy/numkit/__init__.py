"""Minimal deterministic numeric kernel: tensors, layers, losses, Adam, PRNG.

Only the layer set the models need is implemented (2-d convolution,
max-over-positions, fully connected, ReLU, sigmoid, dropout) together with
hand-written reverse-mode gradients for those fixed graphs. There is no
general autodiff; model modules compose forward and backward explicitly.
"""

from .ops import (
    BCE_EPS,
    DimensionError,
    NumericError,
    bce_loss,
    bce_loss_backward,
    conv2d,
    conv2d_backward,
    dropout,
    embedding_lookup,
    embedding_lookup_backward,
    fully_connected,
    fully_connected_backward,
    max_over_positions,
    max_over_positions_backward,
    mse,
    ratio_loss,
    ratio_loss_backward,
    relu,
    relu_backward,
    set_finite_checks,
    sigmoid,
    sigmoid_backward,
)
from .optim import Parameter, adam_step, uniform_fanin, zero_grads
from .rng import Rng

__all__ = [
    "BCE_EPS",
    "DimensionError",
    "NumericError",
    "Parameter",
    "Rng",
    "adam_step",
    "bce_loss",
    "bce_loss_backward",
    "conv2d",
    "conv2d_backward",
    "dropout",
    "embedding_lookup",
    "embedding_lookup_backward",
    "fully_connected",
    "fully_connected_backward",
    "max_over_positions",
    "max_over_positions_backward",
    "mse",
    "ratio_loss",
    "ratio_loss_backward",
    "relu",
    "relu_backward",
    "set_finite_checks",
    "sigmoid",
    "sigmoid_backward",
    "uniform_fanin",
    "zero_grads",
]
