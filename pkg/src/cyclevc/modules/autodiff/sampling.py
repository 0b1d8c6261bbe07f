"""
Noise samplers for the Laplacian reparameterization and the vocoder input
"""

from typing import Sequence, Union

import numpy as np

from .tensor import Tensor

# 1 - 2|U| reaches zero at |U| = 1/2
LOG_ARGUMENT_FLOOR = 1e-12


def laplace_from_uniform(u: Union[float, np.ndarray]) -> np.ndarray:
    """eps = sign(U) * ln(1 - 2|U|) for U in (-1/2, 1/2]"""
    u = np.asarray(u, dtype=np.float64)
    return np.sign(u) * np.log(np.maximum(1.0 - 2.0 * np.abs(u), LOG_ARGUMENT_FLOOR))


def sample_laplace(shape: Sequence[int], rng: np.random.Generator) -> Tensor:
    """Standard Laplace draws via the sign/log transform of a uniform variate"""
    # rng.random is on [0, 1), so 0.5 - r is on (-1/2, 1/2]
    u = 0.5 - rng.random(tuple(shape))
    return Tensor(laplace_from_uniform(u))


def sample_gaussian(shape: Sequence[int], rng: np.random.Generator) -> Tensor:
    return Tensor(rng.standard_normal(tuple(shape)))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: dict) -> np.random.Generator:
    bit_generator = getattr(np.random, state["bit_generator"])()
    bit_generator.state = state
    return np.random.Generator(bit_generator)
