"""
Synthetic signals, feature sequences and configurations shared by the tests
"""

import numpy as np

from cyclevc.config import Config, FeatureConfig, ModelConfig, TrainingConfig, VocoderConfig
from cyclevc.modules.dsp import AcousticFrameSequence


def pulse_train(f0: float, duration: float, sample_rate: int = 24000, level: float = 0.5) -> np.ndarray:
    """Band-limited-ish periodic signal: a decaying sum of harmonics"""
    t = np.arange(int(round(duration * sample_rate))) / sample_rate
    harmonics = np.arange(1, int(4000 // f0) + 1)
    signal = np.sum(np.sin(2.0 * np.pi * f0 * harmonics[:, None] * t[None, :]) / harmonics[:, None], axis=0)
    return level * signal / np.max(np.abs(signal))


def random_sequence(rng: np.random.Generator, n_frames: int, mcep_dim: int, bands: int,
                    voiced: bool = True) -> AcousticFrameSequence:
    uv = np.ones(n_frames) if voiced else (rng.random(n_frames) > 0.3).astype(np.float64)
    return AcousticFrameSequence(
        mcep=rng.normal(scale=0.5, size=(n_frames, mcep_dim)),
        log_f0=np.log(120.0) + 0.1 * rng.standard_normal(n_frames),
        uv=uv,
        coded_ap=rng.uniform(0.0, 1.0, size=(n_frames, bands)),
    )


def small_pipeline_config(output_dir: str) -> Config:
    """Small but complete configuration for end-to-end pipeline runs"""
    return Config(
        features=FeatureConfig(mcep_dim=9),
        model=ModelConfig(latent_dim=3, hidden_enc=6, hidden_dec=6, kernel_size_enc=3, kernel_size_dec=3),
        vocoder=VocoderConfig(residual_channels=4, gate_channels=4, skip_channels=4, layers=2, stacks=1,
                              disc_layers=3, disc_channels=4,
                              stft_resolutions=[[256, 60, 240], [512, 120, 480]],
                              pretrain_steps=1, adversarial_steps=1, segment_frames=40),
        training=TrainingConfig(vae_epochs=2, vae_max_steps=4, batch_size=2, checkpoint_every=1,
                                log_interval=1, validation_count=2),
        seed=7,
        output_dir=output_dir,
    )
