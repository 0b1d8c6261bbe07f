"""
Synthetic parallel corpus of filtered pulse-train vowels.

Each speaker has its own pitch level and formant scaling; utterance ``k`` has
the same vowel sequence and pitch-contour shape for every speaker, so
utterances with equal names form parallel pairs.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from ...error_handling import DataError
from ..dsp import Waveform, write_wav
from .domain_entities import CorpusManifest

logger = logging.getLogger(__name__)

VOWEL_FORMANTS: List[Tuple[float, float, float]] = [
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (300.0, 870.0, 2240.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
]
PITCH_DEPTH = 0.08
PEAK_LEVEL = 0.5


@dataclass
class SyntheticSpeaker:
    speaker_id: str
    f0_mean: float
    formant_scale: float

    @property
    def f0_range(self) -> Tuple[float, float]:
        return round(0.6 * self.f0_mean, 1), round(1.6 * self.f0_mean, 1)


def default_speakers(n_speakers: int) -> List[SyntheticSpeaker]:
    if not 2 <= n_speakers <= 4:
        raise DataError("the synthetic corpus supports 2 to 4 speakers")
    return [SyntheticSpeaker(f"spk{k + 1}", 100.0 * 1.45 ** k, 1.0 + 0.12 * k) for k in range(n_speakers)]


def resonator(signal: np.ndarray, frequency: float, sample_rate: int) -> np.ndarray:
    """Two-pole resonance with a bandwidth that widens with frequency"""
    bandwidth = 80.0 + 0.1 * frequency
    radius = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2.0 * np.pi * frequency / sample_rate
    return lfilter([1.0 - radius], [1.0, -2.0 * radius * np.cos(theta), radius * radius], signal)


def render_utterance(speaker: SyntheticSpeaker, content_index: int, duration: float = 1.0,
                     sample_rate: int = 24000, seed: int = 1, silence: float = 0.15) -> Waveform:
    content = np.random.default_rng([seed, content_index])
    vowels = content.integers(len(VOWEL_FORMANTS), size=3)
    rate = content.uniform(1.0, 3.0)
    phase = content.uniform(0.0, 2.0 * np.pi)
    noise = np.random.default_rng([seed, content_index, int(speaker.f0_mean)])

    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    f0 = speaker.f0_mean * np.exp(PITCH_DEPTH * np.sin(2.0 * np.pi * rate * t + phase))
    cycles = np.cumsum(f0 / sample_rate)
    pulses = np.diff(np.floor(cycles), prepend=0.0)
    excitation = pulses + 0.01 * noise.standard_normal(n)

    voiced = np.zeros(n)
    bounds = np.linspace(0, n, len(vowels) + 1).astype(int)
    for vowel, start, stop in zip(vowels, bounds[:-1], bounds[1:]):
        segment = excitation[start:stop]
        for formant in VOWEL_FORMANTS[vowel]:
            segment = resonator(segment, formant * speaker.formant_scale, sample_rate)
        voiced[start:stop] = segment
    voiced *= PEAK_LEVEL / max(np.max(np.abs(voiced)), 1e-9)

    pad = np.zeros(int(round(silence * sample_rate)))
    return Waveform(np.concatenate([pad, voiced, pad]), sample_rate)


def make_synthetic_corpus(out_dir: str, n_speakers: int = 2, n_train: int = 8, n_validation: int = 2,
                          duration: float = 1.0, sample_rate: int = 24000, seed: int = 1,
                          speakers: Optional[List[SyntheticSpeaker]] = None) -> CorpusManifest:
    """Write ``wav/<speaker>/<index>.wav`` files and ``manifest.json``"""
    speakers = speakers or default_speakers(n_speakers)
    root = Path(out_dir)
    entries = []
    for speaker in speakers:
        f0_min, f0_max = speaker.f0_range
        entry = {"id": speaker.speaker_id, "f0_min": f0_min, "f0_max": f0_max,
                 "power_threshold_db": -40.0, "train": [], "validation": []}
        for k in range(n_train + n_validation):
            relative = f"wav/{speaker.speaker_id}/{k:03d}.wav"
            write_wav(root / relative, render_utterance(speaker, k, duration, sample_rate, seed))
            entry["train" if k < n_train else "validation"].append(relative)
        entries.append(entry)
    manifest = CorpusManifest.from_dict({"speakers": entries}, root=str(root))
    manifest.save(str(root / "manifest.json"))
    logger.info(f"wrote {len(speakers) * (n_train + n_validation)} synthetic utterances to {root}")
    return manifest
