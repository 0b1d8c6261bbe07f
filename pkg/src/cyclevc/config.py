"""
Configuration management for cyclevc
"""

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .error_handling import ConfigurationError


@dataclass
class FeatureConfig:
    """Acoustic analysis settings"""

    sample_rate: int = 24000
    frame_shift_ms: float = 5.0
    fft_size: int = 2048
    win_length: int = 1200
    mcep_dim: int = 49
    alpha: float = 0.466
    magnitude_floor: float = 1e-10
    voicing_threshold: float = 0.45
    ap_bands_hz: List[float] = field(default_factory=lambda: [0.0, 3000.0, 7500.0, 12000.0])
    power_threshold_db: float = -40.0
    f0_min: float = 70.0
    f0_max: float = 400.0

    @property
    def hop(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000.0))

    @property
    def excitation_dim(self) -> int:
        # log-F0, U/V, coded aperiodicity
        return 2 + len(self.ap_bands_hz) - 1

    @property
    def acoustic_dim(self) -> int:
        return self.mcep_dim + self.excitation_dim


@dataclass
class ModelConfig:
    """CycleVAE spectral model settings"""

    latent_dim: int = 32
    n_speakers: int = 2
    n_cycles: int = 2
    hidden_enc: int = 128
    hidden_dec: int = 128
    kernel_size_enc: int = 7
    kernel_size_dec: int = 7
    feedback_enc: bool = True
    feedback_dec: bool = True
    weight_rec: float = 1.0
    weight_cyc: float = 1.0
    weight_power: float = 1.0
    weight_kl_x: float = 1.0
    weight_kl_y: float = 1.0
    weight_spk_x: float = 1.0
    weight_spk_y: float = 1.0


@dataclass
class VocoderConfig:
    """Generator / discriminator and STFT-loss settings"""

    residual_channels: int = 16
    gate_channels: int = 32
    skip_channels: int = 16
    layers: int = 10
    stacks: int = 2
    kernel_size: int = 3
    disc_layers: int = 6
    disc_channels: int = 16
    disc_kernel_size: int = 3
    stft_resolutions: List[List[int]] = field(default_factory=lambda: [
        [512, 60, 240],
        [1024, 120, 600],
        [2048, 240, 1200],
    ])
    lambda_adv: float = 4.0
    weight_stft: float = 1.0
    pretrain_steps: int = 2000
    adversarial_steps: int = 4000
    n_pivots: Optional[int] = None
    segment_frames: Optional[int] = None

    @property
    def resolutions(self) -> List[Tuple[int, int, int]]:
        return [tuple(int(v) for v in res) for res in self.stft_resolutions]


@dataclass
class TrainingConfig:
    """Optimizer and schedule settings"""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 10.0
    vocoder_learning_rate: float = 1e-4
    vae_epochs: int = 200
    vae_max_steps: int = 5000
    batch_size: int = 4
    checkpoint_every: int = 10
    log_interval: int = 50
    validation_count: int = 10
    max_workers: int = 1


@dataclass
class Config:
    """Configuration class for cyclevc"""

    features: FeatureConfig = field(default_factory=FeatureConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    seed: int = 1
    output_dir: str = "exp"

    _SECTIONS = {
        "features": FeatureConfig,
        "model": ModelConfig,
        "vocoder": VocoderConfig,
        "training": TrainingConfig,
    }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Config":
        """Build a config from a (possibly partial) nested dictionary"""
        data = dict(data or {})
        kwargs: Dict[str, Any] = {}
        for name, section_cls in cls._SECTIONS.items():
            section = data.pop(name, None) or {}
            if not isinstance(section, dict):
                raise ConfigurationError(f"section '{name}' must be a mapping")
            known = {f.name for f in fields(section_cls)}
            unknown = sorted(set(section) - known)
            if unknown:
                raise ConfigurationError(f"unknown keys in '{name}': {', '.join(unknown)}")
            kwargs[name] = section_cls(**section)
        for key in ("seed", "output_dir"):
            if key in data:
                kwargs[key] = data.pop(key)
        if data:
            raise ConfigurationError(f"unknown top-level keys: {', '.join(sorted(data))}")
        return cls(**kwargs)

    @classmethod
    def load(cls, config_path: Optional[str] = None) -> "Config":
        """Load configuration from a YAML file, defaults when no path is given"""
        if not config_path:
            return cls()
        config_file = Path(config_path)
        if not config_file.exists():
            raise ConfigurationError(f"config file not found: {config_path}")
        with open(config_file, "r") as f:
            config_data = yaml.safe_load(f) or {}
        config = cls.from_dict(config_data)
        config.validate()
        return config

    def to_dict(self) -> Dict[str, Any]:
        return {
            "features": asdict(self.features),
            "model": asdict(self.model),
            "vocoder": asdict(self.vocoder),
            "training": asdict(self.training),
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), default_flow_style=False, sort_keys=True)

    def save(self, config_path: str) -> None:
        """Save configuration to file"""
        config_file = Path(config_path)
        config_file.parent.mkdir(parents=True, exist_ok=True)
        with open(config_file, "w") as f:
            f.write(self.to_yaml())

    def validate(self) -> bool:
        """Validate configuration"""
        feat = self.features
        if feat.sample_rate <= 0:
            raise ConfigurationError("sample_rate must be positive")
        if feat.hop < 1:
            raise ConfigurationError("frame shift must cover at least one sample")
        if feat.fft_size < 2 or feat.fft_size & (feat.fft_size - 1):
            raise ConfigurationError("fft_size must be a power of two")
        if not feat.hop <= feat.win_length <= feat.fft_size:
            raise ConfigurationError("expected hop <= win_length <= fft_size")
        if not -1.0 < feat.alpha < 1.0:
            raise ConfigurationError("alpha must lie in (-1, 1)")
        if feat.mcep_dim < 2:
            raise ConfigurationError("mcep_dim must be at least 2")
        if not 0.0 < feat.f0_min < feat.f0_max < feat.sample_rate / 4:
            raise ConfigurationError("expected 0 < f0_min < f0_max < sample_rate / 4")
        bands = feat.ap_bands_hz
        if len(bands) < 2 or any(b1 <= b0 for b0, b1 in zip(bands, bands[1:])):
            raise ConfigurationError("ap_bands_hz must be increasing edges")
        if bands[-1] > feat.sample_rate / 2:
            raise ConfigurationError("aperiodicity bands exceed the Nyquist frequency")

        model = self.model
        if model.n_cycles < 1:
            raise ConfigurationError("n_cycles must be >= 1")
        if model.n_speakers < 2:
            raise ConfigurationError("at least two speakers are required")
        if model.latent_dim < 1 or model.hidden_enc < 1 or model.hidden_dec < 1:
            raise ConfigurationError("latent and hidden sizes must be positive")

        voc = self.vocoder
        if not voc.stft_resolutions:
            raise ConfigurationError("at least one STFT resolution is required")
        for fft, hop, win in voc.resolutions:
            if fft & (fft - 1) or not 1 <= hop <= win <= fft:
                raise ConfigurationError(f"invalid STFT resolution ({fft}, {hop}, {win})")
        if voc.layers % voc.stacks:
            raise ConfigurationError("generator layers must be divisible by stacks")

        train = self.training
        if train.learning_rate <= 0 or train.vocoder_learning_rate <= 0:
            raise ConfigurationError("learning rates must be positive")
        if not math.isfinite(train.grad_clip) or train.grad_clip <= 0:
            raise ConfigurationError("grad_clip must be positive")
        return True
