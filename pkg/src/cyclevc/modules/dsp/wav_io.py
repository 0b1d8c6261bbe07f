"""
Mono WAV reading and writing
"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.io import wavfile

from ...error_handling import AudioFormatError
from .domain_entities import Waveform

PCM16_SCALE = 32768.0


def read_wav(path: Union[str, Path], expected_rate: Optional[int] = None) -> Waveform:
    """Mono PCM-16 or float-32 WAV to a float64 waveform in [-1, 1]"""
    try:
        sample_rate, data = wavfile.read(str(path))
    except (OSError, ValueError) as e:
        raise AudioFormatError(f"cannot read WAV file {path}: {e}", details={"path": str(path)}) from e
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected mono audio, got {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / PCM16_SCALE
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise AudioFormatError(f"{path}: unsupported sample format {data.dtype}, need PCM-16 or float-32")
    if expected_rate is not None and sample_rate != expected_rate:
        raise AudioFormatError(
            f"{path}: sample rate {sample_rate} Hz, expected {expected_rate} Hz (resampling is not supported)"
        )
    if not np.all(np.isfinite(samples)):
        raise AudioFormatError(f"{path}: non-finite samples")
    return Waveform(samples, int(sample_rate))


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    return np.round(clipped * (PCM16_SCALE - 1.0)).astype(np.int16)


def write_wav(path: Union[str, Path], wave: Waveform) -> Path:
    """Write PCM-16; samples outside [-1, 1] are clipped"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), wave.sample_rate, to_pcm16(wave.samples))
    return path
