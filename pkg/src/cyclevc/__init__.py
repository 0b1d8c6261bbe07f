"""
cyclevc - many-to-many voice conversion

Cyclic spectral modeling with a Laplacian variational autoencoder and a
noise-driven GAN vocoder trained on natural, reconstructed and cyclically
reconstructed features.
"""

__version__ = "0.1.0"

from .config import Config, FeatureConfig, ModelConfig, TrainingConfig, VocoderConfig
from .error_handling import ErrorHandler, VoiceConversionError

__all__ = [
    "Config",
    "FeatureConfig",
    "ModelConfig",
    "TrainingConfig",
    "VocoderConfig",
    "ErrorHandler",
    "VoiceConversionError",
]
