"""
Short-time Fourier analysis, warped mel-cepstra and mel-cepstral distortion
"""

from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ...error_handling import ShapeError, SignalError
from .domain_entities import SpectralFrame, Waveform

MAGNITUDE_FLOOR = 1e-10
MCD_SCALE = 10.0 / np.log(10.0)


def _check_stft_args(fft_size: int, hop: int, win_length: int) -> None:
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise SignalError(f"fft_size must be a power of two, got {fft_size}")
    if hop < 1:
        raise SignalError("hop must be >= 1")
    if win_length > fft_size:
        raise SignalError(f"win_length {win_length} exceeds fft_size {fft_size}")
    if hop > win_length:
        raise SignalError(f"hop {hop} exceeds win_length {win_length}")


@lru_cache(maxsize=32)
def analysis_window(fft_size: int, win_length: int) -> np.ndarray:
    """Periodic Hann window of ``win_length`` centered in ``fft_size`` zeros"""
    window = np.zeros(fft_size)
    offset = (fft_size - win_length) // 2
    window[offset:offset + win_length] = get_window("hann", win_length, fftbins=True)
    window.setflags(write=False)
    return window


def frame_count(n_samples: int, hop: int) -> int:
    return -(-n_samples // hop)


def frame_signal(samples: np.ndarray, fft_size: int, hop: int) -> np.ndarray:
    """[frames, fft_size] view; frame t is centered on sample t * hop (reflection padded)"""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1)
    n_frames = frame_count(samples.size, hop)
    half = fft_size // 2
    if samples.size > 1:
        padded = np.pad(samples, (half, half), mode="reflect")
    else:
        padded = np.pad(samples, (half, half), mode="edge")
    return sliding_window_view(padded, fft_size)[::hop][:n_frames]


def stft(wave: Union[Waveform, np.ndarray], fft_size: int, hop: int, win_length: int) -> np.ndarray:
    """Complex spectrogram [frames, fft_size // 2 + 1], frames = ceil(len / hop)"""
    samples = wave.samples if isinstance(wave, Waveform) else np.asarray(wave, dtype=np.float64).reshape(-1)
    if samples.size == 0:
        raise SignalError("empty waveform")
    _check_stft_args(fft_size, hop, win_length)
    frames = frame_signal(samples, fft_size, hop) * analysis_window(fft_size, win_length)
    return np.fft.rfft(frames, axis=1)


def istft(spec: np.ndarray, hop: int, win_length: int, length: int) -> np.ndarray:
    """Weighted overlap-add inverse of ``stft``, normalized by the summed squared window"""
    spec = np.asarray(spec)
    if spec.ndim != 2:
        raise ShapeError("spectrogram must be [frames, bins]")
    fft_size = 2 * (spec.shape[1] - 1)
    _check_stft_args(fft_size, hop, win_length)
    window = analysis_window(fft_size, win_length)
    frames = np.fft.irfft(spec, n=fft_size, axis=1) * window
    half = fft_size // 2
    total = (spec.shape[0] - 1) * hop + fft_size
    output = np.zeros(total)
    norm = np.zeros(total)
    for t in range(spec.shape[0]):
        start = t * hop
        output[start:start + fft_size] += frames[t]
        norm[start:start + fft_size] += window * window
    covered = norm > 1e-8
    output[covered] /= norm[covered]
    return output[half:half + length]


def all_pass_warp(omega: np.ndarray, alpha: float) -> np.ndarray:
    """Phase response of the first-order all-pass: omega + 2 atan(alpha sin / (1 - alpha cos))"""
    omega = np.asarray(omega, dtype=np.float64)
    return omega + 2.0 * np.arctan(alpha * np.sin(omega) / (1.0 - alpha * np.cos(omega)))


@lru_cache(maxsize=16)
def _warp_interpolation(n_bins: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Left bin index and fraction that sample the linear bin grid at uniformly spaced warped frequencies"""
    half = n_bins - 1
    warped_grid = np.pi * np.arange(n_bins) / half
    positions = all_pass_warp(warped_grid, -alpha) * half / np.pi
    positions = np.clip(positions, 0.0, half)
    left = np.minimum(np.floor(positions).astype(np.int64), half - 1)
    frac = positions - left
    if alpha == 0.0:
        left = np.minimum(np.arange(n_bins), half - 1)
        frac = np.arange(n_bins) - left.astype(np.float64)
    left.setflags(write=False)
    frac.setflags(write=False)
    return left, frac


def mel_cepstrogram(magnitude: np.ndarray, alpha: float, order: int,
                    floor: float = MAGNITUDE_FLOOR) -> np.ndarray:
    """Warped cepstra [frames, order + 1] from magnitude spectra [frames, bins]"""
    magnitude = np.asarray(magnitude, dtype=np.float64)
    squeeze = magnitude.ndim == 1
    if squeeze:
        magnitude = magnitude[None, :]
    if magnitude.ndim != 2 or magnitude.shape[1] < 2:
        raise ShapeError(f"magnitude spectra must be [frames, bins], got {magnitude.shape}")
    if not np.all(np.isfinite(magnitude)):
        raise SignalError("magnitude spectrum contains non-finite values")
    if np.any(magnitude < 0):
        raise SignalError("magnitude spectrum must be non-negative")
    if not -1.0 < alpha < 1.0:
        raise SignalError(f"warping coefficient must lie in (-1, 1), got {alpha}")
    n_bins = magnitude.shape[1]
    n_fft = 2 * (n_bins - 1)
    if order < 0 or order + 1 > n_fft // 2 + 1:
        raise SignalError(f"cepstral order {order} too high for {n_bins} bins")

    log_mag = np.log(np.maximum(magnitude, floor))
    left, frac = _warp_interpolation(n_bins, float(alpha))
    warped = log_mag[:, left] * (1.0 - frac) + log_mag[:, left + 1] * frac
    cepstrum = np.fft.irfft(warped, n=n_fft, axis=1)[:, :order + 1]
    return cepstrum[0] if squeeze else cepstrum


def mel_cepstrum_analysis(mag_frame: np.ndarray, alpha: float = 0.466, order: int = 48,
                          floor: float = MAGNITUDE_FLOOR) -> SpectralFrame:
    """Real cepstrum of the log magnitude resampled on the all-pass warped axis.

    Coefficient 0 is the mean log magnitude over the warped axis, so it tracks
    frame power; ``alpha = 0`` gives the plain truncated real cepstrum.
    """
    mag_frame = np.asarray(mag_frame, dtype=np.float64)
    if mag_frame.ndim != 1:
        raise ShapeError("mel_cepstrum_analysis takes one magnitude frame; use mel_cepstrogram for many")
    return SpectralFrame(mel_cepstrogram(mag_frame, alpha, order, floor))


def _coefficients(x) -> np.ndarray:
    return x.mel_cepstrum if isinstance(x, SpectralFrame) else np.asarray(x, dtype=np.float64)


def mcd(a, b) -> Union[float, np.ndarray]:
    """Mel-cepstral distortion in dB over coefficients 1..D-1.

    Accepts single frames (returns a float) or [frames, D] arrays (returns one value per frame).
    """
    a, b = _coefficients(a), _coefficients(b)
    if a.shape != b.shape:
        raise ShapeError(f"mel-cepstrum dimension mismatch: {a.shape} vs {b.shape}")
    diff = a[..., 1:] - b[..., 1:]
    value = MCD_SCALE * np.sqrt(2.0 * np.sum(diff * diff, axis=-1))
    return float(value) if np.ndim(value) == 0 else value


def mean_mcd(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(mcd(a, b)))
