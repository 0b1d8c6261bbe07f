"""
Encoder / decoder networks of the spectral model.

Both networks are a non-causal convolutional input layer followed by a GRU
whose dense output is fed back into the next step. The encoder reads the
full acoustic vector [spectra, excitation] and emits the Laplace location,
log-scale and speaker logits; the decoder reads [latent, one-hot code] and
emits mel-cepstra.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np

from ...config import FeatureConfig, ModelConfig
from ...error_handling import ShapeError, SpeakerError
from ..autodiff import GRU, Conv1d, ParameterStore, Tensor, concat, make_rng
from ..dsp import AcousticFrameSequence
from .domain_entities import LatentPosterior, SpeakerCode

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-3


@dataclass
class FeatureNormalizer:
    """Per-channel mean / std for the encoder input and the decoder output"""
    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: np.ndarray
    output_std: np.ndarray

    @classmethod
    def identity(cls, input_dim: int, output_dim: int) -> "FeatureNormalizer":
        return cls(np.zeros(input_dim), np.ones(input_dim), np.zeros(output_dim), np.ones(output_dim))

    @classmethod
    def fit(cls, sequences: Iterable[AcousticFrameSequence]) -> "FeatureNormalizer":
        sequences = list(sequences)
        if not sequences:
            raise ShapeError("cannot fit normalization on zero utterances")
        data = np.concatenate([seq.to_array() for seq in sequences], axis=0)
        mcep_dim = sequences[0].spectral_dim
        mean = data.mean(axis=0)
        std = np.maximum(data.std(axis=0), STD_FLOOR)
        return cls(mean, std, mean[:mcep_dim].copy(), std[:mcep_dim].copy())

    def normalize_input(self, x):
        return (x - self.input_mean) * (1.0 / self.input_std)

    def denormalize_output(self, y):
        return y * self.output_std + self.output_mean

    def to_arrays(self, prefix: str = "normalizer.") -> Dict[str, np.ndarray]:
        return {
            f"{prefix}input_mean": self.input_mean.copy(),
            f"{prefix}input_std": self.input_std.copy(),
            f"{prefix}output_mean": self.output_mean.copy(),
            f"{prefix}output_std": self.output_std.copy(),
        }

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray], prefix: str = "normalizer.") -> "FeatureNormalizer":
        return cls(*(np.array(arrays[f"{prefix}{k}"], dtype=np.float64)
                     for k in ("input_mean", "input_std", "output_mean", "output_std")))


class CycleVAE:
    """Parameters and forward passes of the many-to-many encoder / decoder pair"""

    def __init__(self, model_config: ModelConfig, mcep_dim: int, excitation_dim: int,
                 rng: Optional[np.random.Generator] = None, seed: int = 1):
        self.config = model_config
        self.mcep_dim = mcep_dim
        self.excitation_dim = excitation_dim
        self.latent_dim = model_config.latent_dim
        self.n_speakers = model_config.n_speakers
        rng = rng if rng is not None else make_rng(seed)
        self.store = ParameterStore()

        in_dim = mcep_dim + excitation_dim
        enc_out = 2 * self.latent_dim + self.n_speakers
        self.encoder_conv = Conv1d(self.store, "encoder.conv", in_dim, model_config.hidden_enc,
                                   model_config.kernel_size_enc, rng)
        self.encoder_rnn = GRU(self.store, "encoder.gru", model_config.hidden_enc, model_config.hidden_enc, rng,
                               out_dim=enc_out, feedback=model_config.feedback_enc)
        dec_in = self.latent_dim + self.n_speakers
        self.decoder_conv = Conv1d(self.store, "decoder.conv", dec_in, model_config.hidden_dec,
                                   model_config.kernel_size_dec, rng)
        self.decoder_rnn = GRU(self.store, "decoder.gru", model_config.hidden_dec, model_config.hidden_dec, rng,
                               out_dim=mcep_dim, feedback=model_config.feedback_dec)
        self.normalizer = FeatureNormalizer.identity(in_dim, mcep_dim)
        logger.debug(f"CycleVAE with {self.store.parameter_count()} parameters")

    @classmethod
    def from_config(cls, model_config: ModelConfig, feature_config: FeatureConfig, seed: int = 1) -> "CycleVAE":
        return cls(model_config, feature_config.mcep_dim, feature_config.excitation_dim, seed=seed)

    @property
    def input_dim(self) -> int:
        return self.mcep_dim + self.excitation_dim

    def params(self, tape=None) -> Dict[str, Tensor]:
        return self.store.bind(tape)

    def encode(self, params: Dict[str, Tensor], spectra, excitation) -> LatentPosterior:
        """Posterior over the latent from spectra [T, D_mc] and excitation [T, D_e]"""
        spectra = spectra if isinstance(spectra, Tensor) else Tensor(spectra)
        excitation = np.asarray(excitation, dtype=np.float64)
        if spectra.ndim != 2 or spectra.shape[1] != self.mcep_dim:
            raise ShapeError(f"encoder expects [frames, {self.mcep_dim}] spectra, got {spectra.shape}")
        if excitation.shape != (spectra.shape[0], self.excitation_dim):
            raise ShapeError(f"encoder expects [frames, {self.excitation_dim}] excitation, got {excitation.shape}")
        x = self.normalizer.normalize_input(concat([spectra, Tensor(excitation)], axis=1))
        out = self.encoder_rnn(params, self.encoder_conv(params, x))
        d = self.latent_dim
        return LatentPosterior(mu=out[:, :d], log_scale=out[:, d:2 * d], speaker_logits=out[:, 2 * d:])

    def decode(self, params: Dict[str, Tensor], z, code: SpeakerCode) -> Tensor:
        """Mel-cepstra [T, D_mc] for latents ``z`` [T, D_z] spoken by ``code``"""
        z = z if isinstance(z, Tensor) else Tensor(z)
        if not isinstance(code, SpeakerCode) or code.n_speakers != self.n_speakers:
            raise SpeakerError(f"speaker code must index one of {self.n_speakers} speakers")
        if z.ndim != 2 or z.shape[1] != self.latent_dim:
            raise ShapeError(f"decoder expects [frames, {self.latent_dim}] latents, got {z.shape}")
        inputs = concat([z, Tensor(code.tile(z.shape[0]))], axis=1)
        out = self.decoder_rnn(params, self.decoder_conv(params, inputs))
        return self.normalizer.denormalize_output(out)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return self.normalizer.to_arrays()

    def load_state_arrays(self, arrays: Dict[str, np.ndarray]) -> None:
        normalizer = FeatureNormalizer.from_arrays(arrays)
        if normalizer.input_mean.shape != (self.input_dim,) or normalizer.output_mean.shape != (self.mcep_dim,):
            raise ShapeError("normalization statistics do not match the model dimensions")
        self.normalizer = normalizer
