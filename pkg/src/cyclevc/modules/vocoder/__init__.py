"""
Vocoder Module

Non-autoregressive GAN vocoder trained on natural, reconstructed and
cyclically reconstructed conditioning:

- domain_entities.py: Provenance, ConditioningSequence, AugmentedBatch, VocoderReport
- networks.py: Generator, Discriminator, ConditioningNormalizer
- business_logic.py: multi-resolution STFT loss, LSGAN losses, training step, synthesis
"""

from .domain_entities import AugmentedBatch, ConditioningSequence, Provenance, TrainingStage, VocoderReport
from .networks import ConditioningNormalizer, Discriminator, Generator, upsample
from .business_logic import (
    crop_segment,
    discriminator_loss,
    generator_loss,
    mr_stft_loss,
    stage_for_step,
    stft_magnitude,
    synthesize,
    vocoder_train_step,
)

__all__ = [
    "AugmentedBatch", "ConditioningSequence", "Provenance", "TrainingStage", "VocoderReport",
    "ConditioningNormalizer", "Discriminator", "Generator", "upsample",
    "crop_segment", "discriminator_loss", "generator_loss", "mr_stft_loss", "stage_for_step",
    "stft_magnitude", "synthesize", "vocoder_train_step",
]
