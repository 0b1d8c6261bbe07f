"""
DSP Module

Deterministic signal analysis and feature mathematics:

- domain_entities.py: Waveform, spectral/excitation frames, AcousticFrameSequence, LogF0Stats
- spectral.py: STFT / inverse STFT, warped mel-cepstral analysis, mel-cepstral distortion
- excitation.py: autocorrelation F0, continuous log-F0, band aperiodicity, log-F0 transform
- business_logic.py: utterance analysis and silence trimming
- wav_io.py: mono WAV input and PCM-16 output
"""

from .domain_entities import AcousticFrameSequence, ExcitationFrame, LogF0Stats, SpectralFrame, Waveform
from .spectral import (
    all_pass_warp,
    istft,
    mcd,
    mean_mcd,
    mel_cepstrogram,
    mel_cepstrum_analysis,
    stft,
)
from .excitation import (
    code_aperiodicity,
    estimate_f0,
    interpolate_log_f0,
    log_f0_stats,
    transform_log_f0,
)
from .business_logic import (
    AnalysisResult,
    analyze_waveform,
    frame_power_db,
    speech_frame_mask,
    trim_bounds,
    trim_silence,
)
from .wav_io import read_wav, write_wav

__all__ = [
    "AcousticFrameSequence", "ExcitationFrame", "LogF0Stats", "SpectralFrame", "Waveform",
    "all_pass_warp", "istft", "mcd", "mean_mcd", "mel_cepstrogram", "mel_cepstrum_analysis", "stft",
    "code_aperiodicity", "estimate_f0", "interpolate_log_f0", "log_f0_stats", "transform_log_f0",
    "AnalysisResult", "analyze_waveform", "frame_power_db", "speech_frame_mask", "trim_bounds",
    "trim_silence", "read_wav", "write_wav",
]
