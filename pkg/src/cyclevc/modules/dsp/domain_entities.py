"""
Domain Entities - acoustic signal and feature types

Waveforms, per-frame spectral/excitation features and the utterance-level
feature sequence shared by the spectral model, the vocoder and the pipeline.
"""

from dataclasses import dataclass
from typing import Any, Dict, Iterator, Tuple

import numpy as np

from ...error_handling import ShapeError, SignalError


@dataclass
class Waveform:
    """Mono audio samples in [-1, 1]"""
    samples: np.ndarray
    sample_rate: int = 24000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).reshape(-1)
        if self.sample_rate <= 0:
            raise SignalError(f"sample rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise SignalError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / float(self.sample_rate)


@dataclass
class SpectralFrame:
    mel_cepstrum: np.ndarray

    def __post_init__(self):
        self.mel_cepstrum = np.asarray(self.mel_cepstrum, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.mel_cepstrum)):
            raise SignalError("mel-cepstrum contains non-finite coefficients")

    @property
    def dim(self) -> int:
        return self.mel_cepstrum.size


@dataclass
class ExcitationFrame:
    log_f0: float
    uv: int
    coded_ap: np.ndarray

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.log_f0, float(self.uv)], np.asarray(self.coded_ap, dtype=np.float64)])


@dataclass
class LogF0Stats:
    """Mean and standard deviation of voiced-frame log-F0"""
    mean: float
    std: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.std) or self.std <= 0:
            raise SignalError(f"log-F0 statistics need finite mean and std > 0, got ({self.mean}, {self.std})")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LogF0Stats":
        return cls(mean=float(data["mean"]), std=float(data["std"]))

    def to_dict(self) -> Dict[str, float]:
        return {"mean": float(self.mean), "std": float(self.std)}


@dataclass
class AcousticFrameSequence:
    """Per-frame mel-cepstra and excitation (log-F0, U/V, coded aperiodicity) of one utterance.

    Arrays are frame-major: ``mcep`` [T, D_mc], ``log_f0`` [T], ``uv`` [T],
    ``coded_ap`` [T, bands].
    """
    mcep: np.ndarray
    log_f0: np.ndarray
    uv: np.ndarray
    coded_ap: np.ndarray
    frame_shift_ms: float = 5.0

    def __post_init__(self):
        self.mcep = np.asarray(self.mcep, dtype=np.float64)
        self.log_f0 = np.asarray(self.log_f0, dtype=np.float64).reshape(-1)
        self.uv = np.asarray(self.uv, dtype=np.float64).reshape(-1)
        self.coded_ap = np.asarray(self.coded_ap, dtype=np.float64)
        if self.mcep.ndim != 2:
            raise ShapeError(f"mel-cepstra must be [frames, dim], got {self.mcep.shape}")
        if self.coded_ap.ndim == 1:
            self.coded_ap = self.coded_ap.reshape(-1, 1)
        frames = self.mcep.shape[0]
        if frames == 0:
            raise ShapeError("acoustic sequence has no frames")
        if not (self.log_f0.size == self.uv.size == self.coded_ap.shape[0] == frames):
            raise ShapeError("spectral and excitation frame counts differ")
        if not np.all(np.isin(self.uv, (0.0, 1.0))):
            raise SignalError("U/V flags must be 0 or 1")
        for name in ("mcep", "log_f0", "coded_ap"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise SignalError(f"{name} contains non-finite values")

    def __len__(self) -> int:
        return self.mcep.shape[0]

    @property
    def n_frames(self) -> int:
        return self.mcep.shape[0]

    @property
    def spectral_dim(self) -> int:
        return self.mcep.shape[1]

    @property
    def excitation_dim(self) -> int:
        return 2 + self.coded_ap.shape[1]

    def excitation(self) -> np.ndarray:
        """[T, 2 + bands] excitation block: log-F0, U/V, coded aperiodicity"""
        return np.concatenate([self.log_f0[:, None], self.uv[:, None], self.coded_ap], axis=1)

    def to_array(self) -> np.ndarray:
        """x_t = [s_t, e_t] for every frame"""
        return np.concatenate([self.mcep, self.excitation()], axis=1)

    @classmethod
    def from_array(cls, data: np.ndarray, mcep_dim: int, frame_shift_ms: float = 5.0) -> "AcousticFrameSequence":
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[1] < mcep_dim + 3:
            raise ShapeError(f"cannot split {data.shape} into {mcep_dim} spectral and excitation channels")
        return cls(
            mcep=data[:, :mcep_dim].copy(),
            log_f0=data[:, mcep_dim].copy(),
            uv=data[:, mcep_dim + 1].copy(),
            coded_ap=data[:, mcep_dim + 2:].copy(),
            frame_shift_ms=frame_shift_ms,
        )

    def with_spectra(self, mcep: np.ndarray) -> "AcousticFrameSequence":
        """Same excitation, different spectra"""
        mcep = np.asarray(mcep, dtype=np.float64)
        if mcep.shape[0] != self.n_frames:
            raise ShapeError(f"expected {self.n_frames} frames, got {mcep.shape[0]}")
        return AcousticFrameSequence(mcep, self.log_f0.copy(), self.uv.copy(), self.coded_ap.copy(),
                                     self.frame_shift_ms)

    def slice(self, start: int, stop: int) -> "AcousticFrameSequence":
        return AcousticFrameSequence(
            self.mcep[start:stop].copy(), self.log_f0[start:stop].copy(), self.uv[start:stop].copy(),
            self.coded_ap[start:stop].copy(), self.frame_shift_ms,
        )

    def frames(self) -> Iterator[Tuple[SpectralFrame, ExcitationFrame]]:
        for t in range(self.n_frames):
            yield (
                SpectralFrame(self.mcep[t]),
                ExcitationFrame(float(self.log_f0[t]), int(self.uv[t]), self.coded_ap[t]),
            )

    def voiced_log_f0(self) -> np.ndarray:
        return self.log_f0[self.uv > 0.5]
