"""
Business Logic - multi-resolution STFT loss, least-squares adversarial losses,
two-stage training and synthesis
"""

import logging
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...config import VocoderConfig
from ...error_handling import DataError, ShapeError, StageError
from ..autodiff import Adam, Tape, Tensor, absolute, clamp_min, log, norm, power_spectrum, sample_gaussian, sqrt, take
from ..dsp import Waveform
from ..dsp.spectral import analysis_window, frame_count
from .domain_entities import AugmentedBatch, ConditioningSequence, TrainingStage, VocoderReport
from .networks import Discriminator, Generator

logger = logging.getLogger(__name__)

POWER_FLOOR = 1e-12

Resolution = Tuple[int, int, int]


def reflect_index(positions: np.ndarray, length: int) -> np.ndarray:
    """Map arbitrary sample positions into [0, length) by mirror reflection without edge repeat"""
    if length == 1:
        return np.zeros_like(positions)
    period = 2 * (length - 1)
    folded = np.mod(positions, period)
    return np.where(folded < length, folded, period - folded)


@lru_cache(maxsize=32)
def frame_indices(length: int, fft_size: int, hop: int) -> np.ndarray:
    """[frames, fft_size] sample indices of centered, reflection-padded frames"""
    starts = np.arange(frame_count(length, hop)) * hop - fft_size // 2
    indices = reflect_index(starts[:, None] + np.arange(fft_size)[None, :], length)
    indices.setflags(write=False)
    return indices


def stft_magnitude(wave, fft_size: int, hop: int, win_length: int) -> Tensor:
    """Differentiable |STFT| [frames, bins] with the same framing and window as dsp ``stft``"""
    wave = wave if isinstance(wave, Tensor) else Tensor(wave)
    frames = take(wave, frame_indices(wave.size, fft_size, hop)) * analysis_window(fft_size, win_length)
    return sqrt(clamp_min(power_spectrum(frames), POWER_FLOOR))


def stft_loss(w, w_hat, fft_size: int, hop: int, win_length: int) -> Tuple[Tensor, Tensor]:
    """(spectral convergence, mean absolute log-magnitude difference) at one resolution"""
    target = stft_magnitude(w, fft_size, hop, win_length)
    estimate = stft_magnitude(w_hat, fft_size, hop, win_length)
    convergence = norm(target - estimate) / norm(target)
    log_magnitude = absolute(log(target) - log(estimate)).mean()
    return convergence, log_magnitude


def mr_stft_loss(w, w_hat, resolutions: Sequence[Resolution]) -> Tensor:
    """Spectral convergence plus log-magnitude L1, averaged over resolutions"""
    w = w if isinstance(w, Tensor) else Tensor(w)
    w_hat = w_hat if isinstance(w_hat, Tensor) else Tensor(w_hat)
    if w.shape != w_hat.shape or w.ndim != 1:
        raise ShapeError(f"waveforms must be equal-length 1-D signals, got {w.shape} and {w_hat.shape}")
    if not resolutions:
        raise ShapeError("at least one STFT resolution is required")
    total = None
    for fft_size, hop, win_length in resolutions:
        convergence, log_magnitude = stft_loss(w, w_hat, fft_size, hop, win_length)
        term = convergence + log_magnitude
        total = term if total is None else total + term
    return total * (1.0 / len(resolutions))


def _check_batch(batch: AugmentedBatch, generator: Generator) -> None:
    if batch.natural is None:
        raise DataError("batch is missing its natural conditioning")
    batch.validate(generator.hop)


def _mean(terms: List[Tensor]) -> Tensor:
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total * (1.0 / len(terms))


def generator_loss(batch: AugmentedBatch, generator: Generator, discriminator: Discriminator,
                   gen_params: Dict[str, Tensor], disc_params: Dict[str, Tensor],
                   rng: np.random.Generator, config: VocoderConfig,
                   adversarial: bool = True) -> Tuple[Tensor, Dict[str, float]]:
    """STFT terms for every conditioning variant plus, when adversarial, (1 - D(G(h|x)))^2 terms.

    STFT and adversarial terms are each averaged over variants; fresh noise per variant.
    """
    _check_batch(batch, generator)
    target = Tensor(batch.waveform)
    stft_terms: List[Tensor] = []
    adv_terms: List[Tensor] = []
    breakdown: Dict[str, float] = {}
    for variant in batch.variants():
        noise = sample_gaussian((batch.waveform.size,), rng)
        generated = generator.forward(gen_params, noise, variant)
        stft_term = mr_stft_loss(target, generated, config.resolutions)
        stft_terms.append(stft_term)
        breakdown[f"stft/{variant.label}"] = stft_term.item()
        if adversarial:
            score = discriminator.forward(disc_params, generated)
            gap = 1.0 - score
            adv_term = (gap * gap).mean()
            adv_terms.append(adv_term)
            breakdown[f"adv/{variant.label}"] = adv_term.item()

    stft = _mean(stft_terms)
    total = stft * config.weight_stft
    breakdown["stft"] = stft.item()
    if adversarial:
        adv = _mean(adv_terms)
        total = total + adv * config.lambda_adv
        breakdown["adv"] = adv.item()
    breakdown["total"] = total.item()
    return total, breakdown


def discriminator_loss(batch: AugmentedBatch, generator: Generator, discriminator: Discriminator,
                       gen_params: Dict[str, Tensor], disc_params: Dict[str, Tensor],
                       rng: np.random.Generator, adversarial: bool = True) -> Tensor:
    """E[(1 - D(w))^2] + mean over variants of E[D(G(h|x))^2]; generated waveforms are detached"""
    if not adversarial:
        raise StageError("the discriminator loss is undefined during generator pretraining")
    _check_batch(batch, generator)
    real = discriminator.forward(disc_params, batch.waveform)
    miss = 1.0 - real
    loss = (miss * miss).mean()
    fake_terms = []
    for variant in batch.variants():
        noise = sample_gaussian((batch.waveform.size,), rng)
        generated = Tensor(generator.forward(gen_params, noise, variant).data)
        score = discriminator.forward(disc_params, generated)
        fake_terms.append((score * score).mean())
    return loss + _mean(fake_terms)


def stage_for_step(step_index: int, config: VocoderConfig) -> TrainingStage:
    return TrainingStage.PRETRAIN if step_index < config.pretrain_steps else TrainingStage.ADVERSARIAL


def vocoder_train_step(batch: AugmentedBatch, generator: Generator, discriminator: Discriminator,
                       gen_optimizer: Adam, disc_optimizer: Adam, step_index: int,
                       rng: np.random.Generator, config: VocoderConfig) -> VocoderReport:
    """Pretrain: one generator step on STFT terms. Adversarial: a discriminator step, then a generator step."""
    stage = stage_for_step(step_index, config)
    adversarial = stage == TrainingStage.ADVERSARIAL
    disc_value = None

    if adversarial:
        tape = Tape()
        d_loss = discriminator_loss(batch, generator, discriminator, generator.params(),
                                    discriminator.params(tape), rng)
        disc_optimizer.zero_grad()
        tape.backward(d_loss)
        disc_optimizer.step()
        disc_value = d_loss.item()

    tape = Tape()
    g_loss, breakdown = generator_loss(batch, generator, discriminator, generator.params(tape),
                                       discriminator.params(), rng, config, adversarial)
    gen_optimizer.zero_grad()
    tape.backward(g_loss)
    gen_optimizer.step()

    return VocoderReport(
        step=step_index,
        stage=stage,
        generator_total=breakdown["total"],
        stft=breakdown["stft"],
        adversarial=breakdown.get("adv"),
        discriminator=disc_value,
        terms=breakdown,
    )


def synthesize(cond: ConditioningSequence, generator: Generator, rng: np.random.Generator,
               sample_rate: int = 24000, params: Optional[Dict[str, Tensor]] = None) -> Waveform:
    """One tape-free generator pass with fresh Gaussian noise; length = frames * hop"""
    params = generator.params() if params is None else params
    noise = sample_gaussian((cond.n_frames * generator.hop,), rng)
    return Waveform(generator.forward(params, noise, cond).data, sample_rate)


def crop_segment(batch: AugmentedBatch, segment_frames: Optional[int], hop: int,
                 rng: np.random.Generator) -> AugmentedBatch:
    """Random aligned crop of all variants and the waveform; short utterances pass through"""
    if not segment_frames or batch.n_frames <= segment_frames:
        return batch
    start = int(rng.integers(batch.n_frames - segment_frames + 1))
    return batch.crop(start, segment_frames, hop)
