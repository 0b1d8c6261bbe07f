"""
Autodiff Module

A small reverse-mode differentiation engine on float64 numpy arrays:

- tensor.py: Tensor, Tape and the primitive Functions
- layers.py: dense, dilated conv1d and GRU layers
- optim.py: ParameterStore, gradient clipping and Adam
- sampling.py: Laplace / Gaussian noise and seeded generators
"""

from .tensor import (
    Tape,
    Tensor,
    absolute,
    as_tensor,
    backward,
    clamp_min,
    concat,
    cross_entropy,
    exp,
    leaky_relu,
    log,
    mean,
    norm,
    power_spectrum,
    relu,
    sigmoid,
    sqrt,
    square,
    take,
    tanh,
)
from .layers import GRU, Conv1d, Dense, conv1d, dense, gru_step, numerical_gradient
from .optim import Adam, ParameterStore, adam_step, clip_grad_norm
from .sampling import make_rng, restore_rng, rng_state, sample_gaussian, sample_laplace

__all__ = [
    "Tape", "Tensor", "absolute", "as_tensor", "backward", "clamp_min", "concat",
    "cross_entropy", "exp", "leaky_relu", "log", "mean", "norm", "power_spectrum", "relu",
    "sigmoid", "sqrt", "square", "take", "tanh",
    "GRU", "Conv1d", "Dense", "conv1d", "dense", "gru_step", "numerical_gradient",
    "Adam", "ParameterStore", "adam_step", "clip_grad_norm",
    "make_rng", "restore_rng", "rng_state", "sample_gaussian", "sample_laplace",
]
