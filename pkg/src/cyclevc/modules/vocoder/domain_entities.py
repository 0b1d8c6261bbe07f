"""
Domain Entities - vocoder conditioning and augmented training batches
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

from ...error_handling import DataError, ShapeError


class Provenance(Enum):
    """Where a conditioning sequence came from"""
    NATURAL = "natural"
    RECONSTRUCTED = "reconstructed"
    CYCLIC = "cyclic"


class TrainingStage(Enum):
    PRETRAIN = "pretrain"
    ADVERSARIAL = "adversarial"


@dataclass
class ConditioningSequence:
    """Frame-rate acoustic features [frames, channels] tagged with their provenance"""
    features: np.ndarray
    provenance: Provenance = Provenance.NATURAL
    pivot: Optional[int] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ShapeError(f"conditioning must be a non-empty [frames, channels] array, got {self.features.shape}")
        if (self.provenance == Provenance.CYCLIC) != (self.pivot is not None):
            raise DataError("exactly the cyclic provenance carries a pivot speaker")

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def label(self) -> str:
        if self.provenance == Provenance.CYCLIC:
            return f"cyclic:{self.pivot}"
        return self.provenance.value


@dataclass
class AugmentedBatch:
    """A waveform with its natural, reconstructed and per-pivot cyclic conditioning"""
    waveform: np.ndarray
    natural: ConditioningSequence
    reconstructed: Optional[ConditioningSequence] = None
    cyclic: List[ConditioningSequence] = field(default_factory=list)
    utterance_id: str = ""

    def __post_init__(self):
        self.waveform = np.asarray(self.waveform, dtype=np.float64).reshape(-1)

    @property
    def n_frames(self) -> int:
        return self.natural.n_frames

    def variants(self) -> List[ConditioningSequence]:
        variants = [self.natural]
        if self.reconstructed is not None:
            variants.append(self.reconstructed)
        variants.extend(self.cyclic)
        return variants

    def validate(self, hop: int, expected_pivots: Optional[int] = None) -> "AugmentedBatch":
        if self.natural is None or self.natural.provenance != Provenance.NATURAL:
            raise DataError("batch is missing its natural conditioning")
        if self.reconstructed is not None and self.reconstructed.provenance != Provenance.RECONSTRUCTED:
            raise DataError("reconstructed slot holds a different provenance")
        if any(c.provenance != Provenance.CYCLIC for c in self.cyclic):
            raise DataError("cyclic slot holds a different provenance")
        if expected_pivots is not None and len(self.cyclic) != expected_pivots:
            raise DataError(f"expected {expected_pivots} cyclic variants, batch has {len(self.cyclic)}")
        channels = self.natural.features.shape[1]
        for variant in self.variants():
            if variant.features.shape != (self.n_frames, channels):
                raise ShapeError(f"{variant.label} conditioning shape {variant.features.shape} "
                                 f"differs from natural {(self.n_frames, channels)}")
        if self.waveform.size != self.n_frames * hop:
            raise ShapeError(f"waveform has {self.waveform.size} samples, expected {self.n_frames} * {hop}")
        return self

    def crop(self, start: int, n_frames: int, hop: int) -> "AugmentedBatch":
        stop = start + n_frames

        def cut(cond: Optional[ConditioningSequence]) -> Optional[ConditioningSequence]:
            if cond is None:
                return None
            return ConditioningSequence(cond.features[start:stop], cond.provenance, cond.pivot)

        return AugmentedBatch(
            waveform=self.waveform[start * hop:stop * hop],
            natural=cut(self.natural),
            reconstructed=cut(self.reconstructed),
            cyclic=[cut(c) for c in self.cyclic],
            utterance_id=self.utterance_id,
        )


@dataclass
class VocoderReport:
    """Losses of one vocoder step; adversarial fields stay None during pretraining"""
    step: int
    stage: TrainingStage
    generator_total: float
    stft: float
    adversarial: Optional[float] = None
    discriminator: Optional[float] = None
    terms: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "stage": self.stage.value,
            "generator_total": self.generator_total,
            "stft": self.stft,
            "adversarial": self.adversarial,
            "discriminator": self.discriminator,
        }
