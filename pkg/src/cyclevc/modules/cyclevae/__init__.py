"""
CycleVAE Module

Nonparallel many-to-many spectral conversion with a Laplacian latent and
cyclic reconstruction through sampled pivot speakers:

- domain_entities.py: SpeakerCode, LatentPosterior, CycleNoise, CycleOutputs, LossReport
- networks.py: CycleVAE encoder / decoder and corpus feature normalization
- business_logic.py: reparameterization, KL, cycle flow, loss, training, conversion
"""

from .domain_entities import (
    CycleNoise,
    CycleOutputs,
    CycleStep,
    LatentPosterior,
    LossReport,
    SpeakerCode,
    TrainingItem,
)
from .networks import CycleVAE, FeatureNormalizer
from .business_logic import (
    convert,
    converted_excitation,
    cycle_forward,
    decode,
    draw_cycle_noise,
    elbo_loss,
    encode,
    evaluate_batch,
    kl_laplace,
    kl_laplace_frames,
    reconstruct_variants,
    reparameterize,
    sample_pivot,
    spectral_distance_frames,
    train_step,
)

__all__ = [
    "CycleNoise", "CycleOutputs", "CycleStep", "LatentPosterior", "LossReport", "SpeakerCode",
    "TrainingItem", "CycleVAE", "FeatureNormalizer", "convert", "converted_excitation",
    "cycle_forward", "decode", "draw_cycle_noise", "elbo_loss", "encode", "evaluate_batch",
    "kl_laplace", "kl_laplace_frames", "reconstruct_variants", "reparameterize", "sample_pivot",
    "spectral_distance_frames", "train_step",
]
