"""
Shared fixtures: tiny configurations, synthetic signals and feature sequences
"""

import numpy as np
import pytest

from cyclevc.config import ModelConfig, VocoderConfig
from cyclevc.modules.cyclevae import CycleVAE, SpeakerCode
from cyclevc.modules.dsp import LogF0Stats, Waveform

from .helpers import pulse_train, random_sequence, small_pipeline_config


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_model_config():
    return ModelConfig(latent_dim=3, n_speakers=3, n_cycles=2, hidden_enc=6, hidden_dec=6,
                       kernel_size_enc=3, kernel_size_dec=3)


@pytest.fixture
def tiny_model(tiny_model_config):
    return CycleVAE(tiny_model_config, mcep_dim=4, excitation_dim=4, seed=3)


@pytest.fixture
def tiny_sequence(rng):
    return random_sequence(rng, n_frames=6, mcep_dim=4, bands=2)


@pytest.fixture
def speaker_stats():
    return {
        0: LogF0Stats(np.log(120.0), 0.10),
        1: LogF0Stats(np.log(200.0), 0.15),
        2: LogF0Stats(np.log(160.0), 0.12),
    }


@pytest.fixture
def source_code():
    return SpeakerCode(0, 3)


@pytest.fixture
def tiny_vocoder_config():
    return VocoderConfig(residual_channels=4, gate_channels=4, skip_channels=4, layers=2, stacks=1,
                         kernel_size=3, disc_layers=3, disc_channels=4, disc_kernel_size=3,
                         stft_resolutions=[[64, 16, 32], [128, 32, 64]],
                         pretrain_steps=2, adversarial_steps=2)


@pytest.fixture
def voiced_wave():
    return Waveform(pulse_train(150.0, 0.5), 24000)


@pytest.fixture
def pipeline_config(tmp_path):
    return small_pipeline_config(str(tmp_path / "exp"))
