"""
Conversion - analysis, spectral conversion and waveform synthesis of one utterance
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

from ...error_handling import ConfigurationError, SpeakerError
from ..autodiff import make_rng
from ..cyclevae import convert
from ..dsp import AcousticFrameSequence, analyze_waveform, read_wav, write_wav
from ..vocoder import ConditioningSequence, Provenance, synthesize
from .audit_trail import IAuditTrail, NullAuditTrail
from .domain_entities import AccessPurpose, CheckpointKind, SpeakerProfile, Split
from .persistence import load_checkpoint
from .training import load_generator, load_vae

logger = logging.getLogger(__name__)


@dataclass
class ConversionResult:
    output_path: Path
    source_id: str
    target_id: str
    n_frames: int
    duration: float
    features: AcousticFrameSequence


def _profiles(metadata: Dict, n_speakers: int) -> Dict[str, SpeakerProfile]:
    profiles = [SpeakerProfile.from_dict(entry, n_speakers) for entry in metadata.get("speakers", [])]
    return {profile.speaker_id: profile for profile in profiles}


def convert_utterance(wav_path: Union[str, Path], source_id: str, target_id: str,
                      vae_checkpoint: Union[str, Path], vocoder_checkpoint: Union[str, Path],
                      output_path: Union[str, Path], seed: int = 1,
                      audit: Optional[IAuditTrail] = None) -> ConversionResult:
    """Convert a source-speaker WAV to the target speaker and write PCM-16 audio.

    The input is analyzed untrimmed, so the output lasts exactly
    ``frames * frame shift``.
    """
    audit = audit or NullAuditTrail()
    vae_ckpt = load_checkpoint(vae_checkpoint, CheckpointKind.VAE)
    model, config, codes, stats = load_vae(vae_ckpt)
    generator, voc_config = load_generator(load_checkpoint(vocoder_checkpoint, CheckpointKind.VOCODER))
    if voc_config.features.hop != config.features.hop:
        raise ConfigurationError("vocoder and spectral model use different frame shifts")
    profiles = _profiles(vae_ckpt.metadata, config.model.n_speakers)
    for speaker_id in (source_id, target_id):
        if speaker_id not in codes:
            raise SpeakerError(f"unknown speaker id '{speaker_id}'", {"known": sorted(codes)})
    source, target = profiles[source_id], profiles[target_id]

    audit.log_access(str(wav_path), source_id, Split.VALIDATION, AccessPurpose.CONVERT)
    wave = read_wav(wav_path, expected_rate=config.features.sample_rate)
    analysis = analyze_waveform(wave, config.features, f0_min=source.f0_min, f0_max=source.f0_max,
                                power_threshold_db=source.power_threshold_db, trim=False)
    converted = convert(model, analysis.features, source.code, target.code, stats)

    cond = ConditioningSequence(converted.to_array(), Provenance.NATURAL)
    output = synthesize(cond, generator, make_rng(seed), config.features.sample_rate)
    path = write_wav(output_path, output)
    logger.info(f"converted {wav_path} from {source_id} to {target_id}: {converted.n_frames} frames -> {path}")
    return ConversionResult(
        output_path=path,
        source_id=source_id,
        target_id=target_id,
        n_frames=converted.n_frames,
        duration=len(output) / float(output.sample_rate),
        features=converted,
    )
