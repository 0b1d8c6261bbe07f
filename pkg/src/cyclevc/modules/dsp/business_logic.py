"""
Business Logic - utterance analysis and silence trimming

Composes the spectral and excitation analysis into frame-aligned acoustic
sequences and applies the per-speaker power threshold.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ...config import FeatureConfig
from ...error_handling import AudioFormatError, EmptyUtteranceError
from .domain_entities import AcousticFrameSequence, Waveform
from .excitation import code_aperiodicity, estimate_f0, interpolate_log_f0
from .spectral import MAGNITUDE_FLOOR, mel_cepstrogram, stft

logger = logging.getLogger(__name__)

DB_PER_NEPER = 20.0 / np.log(10.0)
# frames within this many dB of the magnitude floor count as digital silence
SILENCE_MARGIN_DB = 20.0


def frame_power_db(seq: AcousticFrameSequence) -> np.ndarray:
    """Frame power in dB relative to the loudest frame, from coefficient 0"""
    c0 = seq.mcep[:, 0]
    return DB_PER_NEPER * (c0 - np.max(c0))


def speech_frame_mask(seq: AcousticFrameSequence, power_threshold_db: float = -40.0,
                      magnitude_floor: float = MAGNITUDE_FLOOR) -> np.ndarray:
    """True for frames at or above the relative power threshold"""
    c0 = seq.mcep[:, 0]
    above_floor = DB_PER_NEPER * (c0 - np.log(magnitude_floor)) > SILENCE_MARGIN_DB
    return (frame_power_db(seq) >= power_threshold_db) & above_floor


def trim_bounds(seq: AcousticFrameSequence, power_threshold_db: float = -40.0,
                magnitude_floor: float = MAGNITUDE_FLOOR) -> Tuple[int, int]:
    """[start, stop) frame interval left after removing leading and trailing low-power runs"""
    speech = np.flatnonzero(speech_frame_mask(seq, power_threshold_db, magnitude_floor))
    if speech.size == 0:
        raise EmptyUtteranceError()
    return int(speech[0]), int(speech[-1]) + 1


def trim_silence(seq: AcousticFrameSequence, power_threshold_db: float = -40.0,
                 magnitude_floor: float = MAGNITUDE_FLOOR) -> AcousticFrameSequence:
    start, stop = trim_bounds(seq, power_threshold_db, magnitude_floor)
    if start == 0 and stop == seq.n_frames:
        return seq
    return seq.slice(start, stop)


@dataclass
class AnalysisResult:
    """Features plus the waveform cut to exactly ``frames * hop`` samples"""
    features: AcousticFrameSequence
    waveform: Waveform
    bounds: Tuple[int, int]
    voiced_ratio: float


def align_waveform(wave: Waveform, n_frames: int, hop: int) -> Waveform:
    samples = np.zeros(n_frames * hop)
    count = min(samples.size, wave.samples.size)
    samples[:count] = wave.samples[:count]
    return Waveform(samples, wave.sample_rate)


def analyze_waveform(wave: Waveform, config: FeatureConfig, f0_min: Optional[float] = None,
                     f0_max: Optional[float] = None, power_threshold_db: Optional[float] = None,
                     trim: bool = True) -> AnalysisResult:
    """STFT -> warped mel-cepstra, F0 -> continuous log-F0, band aperiodicity; optionally edge-trimmed"""
    if wave.sample_rate != config.sample_rate:
        raise AudioFormatError(
            f"sample rate {wave.sample_rate} Hz does not match configured {config.sample_rate} Hz; resample first"
        )
    f0_min = config.f0_min if f0_min is None else f0_min
    f0_max = config.f0_max if f0_max is None else f0_max
    threshold = config.power_threshold_db if power_threshold_db is None else power_threshold_db
    hop = config.hop

    spectrum = stft(wave, config.fft_size, hop, config.win_length)
    magnitude = np.abs(spectrum)
    mcep = mel_cepstrogram(magnitude, config.alpha, config.mcep_dim - 1, config.magnitude_floor)
    f0, uv = estimate_f0(wave, f0_min, f0_max, config.frame_shift_ms, config.voicing_threshold)
    coded_ap = code_aperiodicity(wave, f0, uv, config.ap_bands_hz, config.fft_size, hop,
                                 config.win_length, power=magnitude ** 2)

    n_frames = mcep.shape[0]
    if trim:
        # voicing is judged inside the retained region only
        probe = AcousticFrameSequence(mcep, np.zeros(n_frames), np.zeros(n_frames), coded_ap,
                                      config.frame_shift_ms)
        start, stop = trim_bounds(probe, threshold, config.magnitude_floor)
    else:
        start, stop = 0, n_frames

    f0, uv, coded_ap, mcep = f0[start:stop], uv[start:stop], coded_ap[start:stop], mcep[start:stop]
    log_f0 = interpolate_log_f0(f0, uv)
    features = AcousticFrameSequence(mcep, log_f0, uv, coded_ap, config.frame_shift_ms)
    aligned = align_waveform(wave, n_frames, hop)
    cut = Waveform(aligned.samples[start * hop:stop * hop], wave.sample_rate)
    voiced_ratio = float(np.mean(uv))
    logger.debug(f"analyzed {n_frames} frames, kept [{start}, {stop}), voiced ratio {voiced_ratio:.2f}")
    return AnalysisResult(features=features, waveform=cut, bounds=(start, stop), voiced_ratio=voiced_ratio)
