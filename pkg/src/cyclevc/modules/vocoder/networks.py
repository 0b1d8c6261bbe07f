"""
Noise-driven waveform generator and convolutional discriminator.

The generator is a stack of gated dilated convolutions over the sample axis,
conditioned at every layer on frame features repeated ``hop`` times; the
discriminator is a plain dilated convolution stack that scores every sample.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from ...config import VocoderConfig
from ...error_handling import ShapeError
from ..autodiff import Conv1d, ParameterStore, Tensor, leaky_relu, make_rng, relu, sigmoid, tanh
from .domain_entities import ConditioningSequence

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-3


@dataclass
class ConditioningNormalizer:
    """Per-channel mean / std of natural training features"""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, channels: int) -> "ConditioningNormalizer":
        return cls(np.zeros(channels), np.ones(channels))

    @classmethod
    def fit(cls, features: Iterable[np.ndarray]) -> "ConditioningNormalizer":
        stacked = [np.asarray(f, dtype=np.float64) for f in features]
        if not stacked:
            raise ShapeError("cannot fit conditioning statistics on zero utterances")
        data = np.concatenate(stacked, axis=0)
        return cls(data.mean(axis=0), np.maximum(data.std(axis=0), STD_FLOOR))

    def __call__(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.std

    def to_arrays(self, prefix: str = "conditioning.") -> Dict[str, np.ndarray]:
        return {f"{prefix}mean": self.mean.copy(), f"{prefix}std": self.std.copy()}

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "conditioning.") -> "ConditioningNormalizer":
        return cls(np.array(arrays[f"{prefix}mean"]), np.array(arrays[f"{prefix}std"]))


def upsample(features: np.ndarray, hop: int) -> np.ndarray:
    """Nearest-neighbour repetition of each frame ``hop`` times"""
    return np.repeat(features, hop, axis=0)


class Generator:
    def __init__(self, config: VocoderConfig, cond_dim: int, hop: int,
                 rng: Optional[np.random.Generator] = None, seed: int = 1):
        if config.layers % config.stacks:
            raise ShapeError("generator layers must be divisible by stacks")
        if config.gate_channels % 2:
            raise ShapeError("gate channels must be even")
        rng = rng if rng is not None else make_rng(seed)
        self.config = config
        self.cond_dim = cond_dim
        self.hop = hop
        self.store = ParameterStore()
        self.normalizer = ConditioningNormalizer.identity(cond_dim)

        res, gate, skip = config.residual_channels, config.gate_channels, config.skip_channels
        half = gate // 2
        per_stack = config.layers // config.stacks
        self.first = Conv1d(self.store, "generator.first", 1, res, 1, rng)
        self.blocks = []
        for layer in range(config.layers):
            dilation = 2 ** (layer % per_stack)
            prefix = f"generator.block{layer}"
            self.blocks.append((
                Conv1d(self.store, f"{prefix}.dilated", res, gate, config.kernel_size, rng, dilation=dilation),
                Conv1d(self.store, f"{prefix}.cond", cond_dim, gate, 1, rng),
                Conv1d(self.store, f"{prefix}.skip", half, skip, 1, rng),
                Conv1d(self.store, f"{prefix}.residual", half, res, 1, rng),
            ))
        self.post1 = Conv1d(self.store, "generator.post1", skip, skip, 1, rng)
        self.post2 = Conv1d(self.store, "generator.post2", skip, 1, 1, rng)
        logger.debug(f"generator with {self.store.parameter_count()} parameters, "
                     f"receptive field {self.receptive_field} samples")

    @property
    def receptive_field(self) -> int:
        return 1 + sum(dilated.receptive_field - 1 for dilated, _, _, _ in self.blocks)

    def params(self, tape=None) -> Dict[str, Tensor]:
        return self.store.bind(tape)

    def forward(self, params: Dict[str, Tensor], noise, cond: ConditioningSequence) -> Tensor:
        """Waveform [frames * hop] in (-1, 1) from Gaussian noise of the same length"""
        noise = noise if isinstance(noise, Tensor) else Tensor(noise)
        features = cond.features if isinstance(cond, ConditioningSequence) else np.asarray(cond, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.cond_dim:
            raise ShapeError(f"conditioning must be [frames, {self.cond_dim}], got {features.shape}")
        length = features.shape[0] * self.hop
        if noise.size != length:
            raise ShapeError(f"noise has {noise.size} samples, conditioning needs {length}")
        local = Tensor(upsample(self.normalizer(features), self.hop))

        half = self.config.gate_channels // 2
        x = self.first(params, noise.reshape(length, 1))
        skips = None
        for dilated, cond_conv, skip_conv, res_conv in self.blocks:
            gated = dilated(params, x) + cond_conv(params, local)
            z = tanh(gated[:, :half]) * sigmoid(gated[:, half:])
            s = skip_conv(params, z)
            skips = s if skips is None else skips + s
            x = (x + res_conv(params, z)) * np.sqrt(0.5)
        skips = skips * np.sqrt(1.0 / len(self.blocks))
        out = self.post2(params, relu(self.post1(params, relu(skips))))
        return tanh(out).reshape(length)


class Discriminator:
    def __init__(self, config: VocoderConfig, rng: Optional[np.random.Generator] = None, seed: int = 2):
        if config.disc_layers < 2:
            raise ShapeError("the discriminator needs at least two layers")
        rng = rng if rng is not None else make_rng(seed)
        self.config = config
        self.store = ParameterStore()
        channels, kernel = config.disc_channels, config.disc_kernel_size
        self.layers = []
        in_ch = 1
        for i in range(config.disc_layers - 1):
            dilation = 1 if i == 0 else i
            self.layers.append(Conv1d(self.store, f"discriminator.conv{i}", in_ch, channels, kernel, rng,
                                      dilation=dilation))
            in_ch = channels
        self.last = Conv1d(self.store, "discriminator.last", channels, 1, kernel, rng)

    @property
    def receptive_field(self) -> int:
        return 1 + sum(layer.receptive_field - 1 for layer in self.layers) + self.last.receptive_field - 1

    def params(self, tape=None) -> Dict[str, Tensor]:
        return self.store.bind(tape)

    def forward(self, params: Dict[str, Tensor], wave) -> Tensor:
        """Unbounded realness score per sample"""
        wave = wave if isinstance(wave, Tensor) else Tensor(wave)
        length = wave.size
        if length < self.receptive_field:
            raise ShapeError(f"waveform of {length} samples is shorter than the "
                             f"discriminator receptive field ({self.receptive_field})")
        x = wave.reshape(length, 1)
        for layer in self.layers:
            x = leaky_relu(layer(params, x), 0.2)
        return self.last(params, x).reshape(length)
