"""
Domain Entities - speaker codes, latent posteriors and cycle outputs
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ...error_handling import ShapeError, SpeakerError
from ..autodiff import Tensor
from ..dsp import AcousticFrameSequence


@dataclass(frozen=True)
class SpeakerCode:
    """Time-invariant one-hot speaker identity"""
    index: int
    n_speakers: int

    def __post_init__(self):
        if self.n_speakers < 1:
            raise SpeakerError("speaker set is empty")
        if not 0 <= self.index < self.n_speakers:
            raise SpeakerError(f"speaker index {self.index} outside [0, {self.n_speakers})")

    @property
    def one_hot(self) -> np.ndarray:
        vector = np.zeros(self.n_speakers)
        vector[self.index] = 1.0
        return vector

    def tile(self, n_frames: int) -> np.ndarray:
        return np.tile(self.one_hot, (n_frames, 1))


@dataclass
class LatentPosterior:
    """Per-frame Laplace location / log-scale and speaker logits, each [T, ...]"""
    mu: Tensor
    log_scale: Tensor
    speaker_logits: Tensor

    @property
    def n_frames(self) -> int:
        return self.mu.shape[0]

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale.data)

    def predicted_speakers(self) -> np.ndarray:
        return np.argmax(self.speaker_logits.data, axis=1)


@dataclass
class CycleNoise:
    """Laplace noise for the two reparameterizations of one cycle"""
    eps_x: np.ndarray
    eps_y: np.ndarray

    @classmethod
    def zeros(cls, n_frames: int, latent_dim: int) -> "CycleNoise":
        return cls(np.zeros((n_frames, latent_dim)), np.zeros((n_frames, latent_dim)))


@dataclass
class CycleStep:
    """Everything one conversion / cyclic-reconstruction cycle produced"""
    index: int
    pivot: SpeakerCode
    input_spectra: Tensor
    input_excitation: np.ndarray
    posterior_x: LatentPosterior
    z_x: Tensor
    reconstructed: Tensor
    converted: Tensor
    converted_excitation: np.ndarray
    posterior_y: LatentPosterior
    z_y: Tensor
    cyclic: Tensor


@dataclass
class CycleOutputs:
    source: SpeakerCode
    input_spectra: np.ndarray
    steps: List[CycleStep] = field(default_factory=list)

    @property
    def n_cycles(self) -> int:
        return len(self.steps)

    @property
    def n_frames(self) -> int:
        return self.input_spectra.shape[0]

    def cyclic_spectra(self, n: int):
        """s^(x|y)_n; cycle 0 is the input spectra"""
        if n == 0:
            return self.input_spectra
        return self.steps[n - 1].cyclic


@dataclass
class TrainingItem:
    """One utterance ready for a training step"""
    features: AcousticFrameSequence
    source: SpeakerCode
    frame_weights: Optional[np.ndarray] = None
    utterance_id: str = ""

    def weights(self) -> np.ndarray:
        if self.frame_weights is None:
            return np.ones(self.features.n_frames)
        weights = np.asarray(self.frame_weights, dtype=np.float64)
        if weights.shape != (self.features.n_frames,):
            raise ShapeError("frame weights must have one entry per frame")
        return weights


@dataclass
class LossReport:
    """Scalar summary of the cycle loss; terms are summed over cycles, MCDs averaged"""
    total: float = 0.0
    rec_mcd: float = 0.0
    cyc_mcd: float = 0.0
    power: float = 0.0
    kl_x: float = 0.0
    kl_y: float = 0.0
    ce_x: float = 0.0
    ce_y: float = 0.0
    spk_acc_x: float = 0.0
    spk_acc_y: float = 0.0
    grad_norm: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def mean(cls, reports: List["LossReport"]) -> "LossReport":
        if not reports:
            return cls()
        keys = asdict(reports[0]).keys()
        return cls(**{k: float(np.mean([getattr(r, k) for r in reports])) for k in keys})
