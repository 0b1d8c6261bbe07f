"""
Excitation features: F0 / voicing, continuous log-F0, coded aperiodicity and
the log-F0 statistics transform
"""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ...error_handling import SignalError, UnvoicedUtteranceError
from .domain_entities import LogF0Stats, Waveform
from .spectral import frame_count, stft

logger = logging.getLogger(__name__)

VOICING_THRESHOLD = 0.45
# candidates within this fraction of the best peak win if they come first
PEAK_TOLERANCE = 0.9
ENERGY_FLOOR = 1e-12
# half width of the Hann main lobe in window bins
HANN_LOBE_BINS = 2.0
# cap on the lobe half width as a fraction of F0 for closely spaced harmonics
LOBE_FRACTION = 0.4
BAND_ENERGY_FLOOR = 1e-10


def _lag_range(sample_rate: int, f0_min: float, f0_max: float) -> Tuple[int, int]:
    if not 0.0 < f0_min < f0_max < sample_rate / 4.0:
        raise SignalError(f"invalid F0 range [{f0_min}, {f0_max}] for {sample_rate} Hz")
    return int(np.floor(sample_rate / f0_max)), int(np.ceil(sample_rate / f0_min))


def nccf(segments: np.ndarray, min_lag: int, max_lag: int) -> np.ndarray:
    """Normalized cross-correlation [frames, lags] of each segment's first ``max_lag`` samples"""
    width = max_lag
    head = segments[:, :width]
    head_energy = np.sum(head * head, axis=1)
    squares = np.concatenate([np.zeros((segments.shape[0], 1)), np.cumsum(segments * segments, axis=1)], axis=1)
    lags = np.arange(min_lag, max_lag + 1)
    corr = np.zeros((segments.shape[0], lags.size))
    for i, lag in enumerate(lags):
        shifted = segments[:, lag:lag + width]
        lag_energy = squares[:, lag + width] - squares[:, lag]
        denom = np.sqrt(head_energy * lag_energy)
        num = np.sum(head * shifted, axis=1)
        corr[:, i] = np.where(denom > ENERGY_FLOOR, num / np.maximum(denom, ENERGY_FLOOR), 0.0)
    return corr


def pick_periods(corr: np.ndarray, min_lag: int) -> Tuple[np.ndarray, np.ndarray]:
    """(fractional lag, clarity) per frame from the first local maximum near the best one"""
    n_frames, n_lags = corr.shape
    best = corr.max(axis=1)
    left = np.concatenate([np.full((n_frames, 1), -np.inf), corr[:, :-1]], axis=1)
    right = np.concatenate([corr[:, 1:], np.full((n_frames, 1), -np.inf)], axis=1)
    candidate = (corr >= left) & (corr >= right) & (corr >= PEAK_TOLERANCE * best[:, None])
    candidate &= (best > 0.0)[:, None]
    found = candidate.any(axis=1)
    index = np.argmax(candidate, axis=1)
    rows = np.arange(n_frames)
    clarity = np.where(found, corr[rows, index], 0.0)

    # parabolic refinement for interior peaks
    interior = found & (index > 0) & (index < n_lags - 1)
    prev = corr[rows, np.maximum(index - 1, 0)]
    nxt = corr[rows, np.minimum(index + 1, n_lags - 1)]
    curvature = prev - 2.0 * clarity + nxt
    refine = interior & (curvature < 0)
    shift = np.where(refine, 0.5 * (prev - nxt) / np.where(refine, curvature, 1.0), 0.0)
    lags = np.where(found, min_lag + index + shift, 0.0)
    return lags, clarity


def estimate_f0(wave: Waveform, f0_min: float = 70.0, f0_max: float = 400.0, frame_shift_ms: float = 5.0,
                threshold: float = VOICING_THRESHOLD) -> Tuple[np.ndarray, np.ndarray]:
    """Per-frame (f0 in Hz or 0, uv flag) from the normalized autocorrelation peak.

    Frame t is centered on sample t * hop, matching ``stft`` framing. A frame
    is voiced when the peak clarity reaches ``threshold``.
    """
    sample_rate = wave.sample_rate
    hop = int(round(sample_rate * frame_shift_ms / 1000.0))
    if hop < 1:
        raise SignalError("frame shift shorter than one sample")
    min_lag, max_lag = _lag_range(sample_rate, f0_min, f0_max)
    samples = wave.samples
    if samples.size == 0:
        raise SignalError("empty waveform")
    n_frames = frame_count(samples.size, hop)
    f0 = np.zeros(n_frames)
    uv = np.zeros(n_frames)
    if samples.size < 2 * max_lag:
        logger.debug("waveform shorter than two periods of f0_min, all frames unvoiced")
        return f0, uv

    padded = np.pad(samples, (max_lag, 2 * max_lag))
    segments = sliding_window_view(padded, 2 * max_lag)[::hop][:n_frames]
    corr = nccf(segments, min_lag, max_lag)
    lags, clarity = pick_periods(corr, min_lag)
    candidate_f0 = np.where(lags > 0, sample_rate / np.where(lags > 0, lags, 1.0), 0.0)
    voiced = (lags > 0) & (clarity >= threshold) & (candidate_f0 >= f0_min) & (candidate_f0 <= f0_max)
    f0[voiced] = candidate_f0[voiced]
    uv[voiced] = 1.0
    return f0, uv


def interpolate_log_f0(f0: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Continuous log-F0: linear in log between voiced frames, held at the edges"""
    f0 = np.asarray(f0, dtype=np.float64)
    uv = np.asarray(uv, dtype=np.float64)
    voiced = np.flatnonzero((uv > 0.5) & (f0 > 0))
    if voiced.size == 0:
        raise UnvoicedUtteranceError()
    return np.interp(np.arange(f0.size), voiced, np.log(f0[voiced]))


def code_aperiodicity(wave: Waveform, f0: np.ndarray, uv: np.ndarray,
                      bands_hz: Sequence[float] = (0.0, 3000.0, 7500.0, 12000.0),
                      fft_size: int = 2048, hop: int = 120, win_length: int = 1200,
                      power: Optional[np.ndarray] = None) -> np.ndarray:
    """Band aperiodicity [frames, bands] in [0, 1].

    For voiced frames each band value is the aperiodic energy of the band over
    its total energy. Aperiodic energy is the mean power of the bins outside
    the harmonic main lobes, spread over the whole band. Unvoiced frames, and
    bands without energy, are fully aperiodic (1.0).
    """
    if power is None:
        power = np.abs(stft(wave, fft_size, hop, win_length)) ** 2
    f0 = np.asarray(f0, dtype=np.float64)
    uv = np.asarray(uv, dtype=np.float64)
    n_frames, n_bins = power.shape
    if f0.size != n_frames or uv.size != n_frames:
        raise SignalError(f"F0 track has {f0.size} frames, spectrogram has {n_frames}")
    bands = np.asarray(bands_hz, dtype=np.float64)
    n_bands = bands.size - 1
    freqs = np.arange(n_bins) * wave.sample_rate / float(2 * (n_bins - 1))
    band_of_bin = np.searchsorted(bands, freqs, side="right") - 1
    band_of_bin[freqs == bands[-1]] = n_bands - 1
    in_band = [band_of_bin == b for b in range(n_bands)]
    band_bins = np.array([mask.sum() for mask in in_band])
    lobe_hz = HANN_LOBE_BINS * wave.sample_rate / float(win_length)
    coded = np.ones((n_frames, n_bands))

    for t in np.flatnonzero((uv > 0.5) & (f0 > 0)):
        frame = power[t]
        total = max(float(np.sum(frame)), ENERGY_FLOOR)
        offset = np.abs(freqs - f0[t] * np.round(freqs / f0[t]))
        off_lobe = offset >= min(lobe_hz, LOBE_FRACTION * f0[t])
        for b in range(n_bands):
            band_energy = float(np.sum(frame[in_band[b]]))
            noise = in_band[b] & off_lobe
            if band_energy <= BAND_ENERGY_FLOOR * total or not np.any(noise):
                continue
            aperiodic = float(np.mean(frame[noise])) * band_bins[b]
            coded[t, b] = min(1.0, aperiodic / band_energy)
    return coded


def transform_log_f0(log_f0: Union[float, np.ndarray], src: LogF0Stats,
                     tgt: LogF0Stats) -> Union[float, np.ndarray]:
    """tgt.mean + (tgt.std / src.std) * (log_f0 - src.mean), always a new value"""
    if src.std <= 0:
        raise SignalError("source log-F0 std must be positive")
    values = np.array(log_f0, dtype=np.float64)
    scaled = values if src == tgt else tgt.mean + (tgt.std / src.std) * (values - src.mean)
    return float(scaled) if np.ndim(scaled) == 0 else scaled


def log_f0_stats(log_f0: np.ndarray, std_floor: float = 1e-3) -> LogF0Stats:
    """Mean / std of voiced log-F0 values; the std is floored for constant-pitch speakers"""
    values = np.asarray(log_f0, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise UnvoicedUtteranceError("no voiced frames for log-F0 statistics")
    return LogF0Stats(mean=float(np.mean(values)), std=max(float(np.std(values)), std_floor))
