"""
Business Logic - cycle flow, lower-bound loss, conversion and training steps

Training runs one utterance at a time through N cycles of
encode -> decode(source) / decode(pivot) -> re-encode -> decode(source),
feeding each cycle's cyclic reconstruction into the next one while the
encoder keeps seeing the utterance's own excitation.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ...config import ModelConfig
from ...error_handling import DataError, ShapeError, SignalError, SpeakerError
from ..autodiff import Adam, Tape, Tensor, absolute, cross_entropy, exp, sample_laplace, sqrt
from ..dsp import AcousticFrameSequence, LogF0Stats, transform_log_f0
from ..dsp.spectral import MCD_SCALE
from .domain_entities import (
    CycleNoise,
    CycleOutputs,
    CycleStep,
    LatentPosterior,
    LossReport,
    SpeakerCode,
    TrainingItem,
)
from .networks import CycleVAE

logger = logging.getLogger(__name__)

# keeps d sqrt / dx finite at a perfect reconstruction
SPECTRAL_LOSS_EPS = 1e-10

SpeakerStats = Mapping[int, LogF0Stats]


def encode(model: CycleVAE, seq: AcousticFrameSequence, params=None) -> LatentPosterior:
    params = model.params() if params is None else params
    return model.encode(params, seq.mcep, seq.excitation())


def decode(model: CycleVAE, z, code: SpeakerCode, params=None) -> Tensor:
    params = model.params() if params is None else params
    return model.decode(params, z, code)


def reparameterize(post: LatentPosterior, eps) -> Tensor:
    """z = mu - scale * eps"""
    eps = eps.data if isinstance(eps, Tensor) else np.asarray(eps, dtype=np.float64)
    if eps.shape != post.mu.shape:
        raise ShapeError(f"noise shape {eps.shape} does not match latent shape {post.mu.shape}")
    return post.mu - exp(post.log_scale) * eps


def kl_laplace(mu, scale):
    """KL(Laplace(mu, scale) || Laplace(0, 1)), elementwise"""
    mu = np.asarray(mu, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale <= 0):
        raise SignalError("Laplace scale must be positive")
    abs_mu = np.abs(mu)
    value = abs_mu + scale * np.exp(-abs_mu / scale) - 1.0 - np.log(scale)
    return float(value) if value.ndim == 0 else value


def kl_laplace_frames(post: LatentPosterior) -> Tensor:
    """Per-frame KL summed over latent dimensions, [T]"""
    abs_mu = absolute(post.mu)
    scale = exp(post.log_scale)
    kl = abs_mu + scale * exp(-abs_mu * exp(-post.log_scale)) - 1.0 - post.log_scale
    return kl.sum(axis=1)


def spectral_distance_frames(estimate: Tensor, target, power_weight: float = 0.0) -> Tensor:
    """Per-frame MCD over coefficients 1.., plus ``power_weight`` * |c0 error| when nonzero, [T]"""
    target = target if isinstance(target, Tensor) else Tensor(target)
    if estimate.shape != target.shape:
        raise ShapeError(f"spectral shapes differ: {estimate.shape} vs {target.shape}")
    diff = estimate - target
    body = diff[:, 1:]
    mcd = MCD_SCALE * sqrt((body * body).sum(axis=1) * 2.0 + SPECTRAL_LOSS_EPS)
    if power_weight:
        mcd = mcd + absolute(diff[:, 0]) * power_weight
    return mcd


def _weighted_mean(values: Tensor, weights: np.ndarray) -> Tensor:
    return (values * weights).sum() * (1.0 / float(np.sum(weights)))


def sample_pivot(source: SpeakerCode, rng: np.random.Generator) -> SpeakerCode:
    """Uniform draw over every speaker except ``source``"""
    if source.n_speakers < 2:
        raise SpeakerError("a pivot needs at least two speakers")
    draw = int(rng.integers(source.n_speakers - 1))
    index = draw if draw < source.index else draw + 1
    return SpeakerCode(index, source.n_speakers)


def draw_cycle_noise(n_cycles: int, n_frames: int, latent_dim: int, rng: np.random.Generator) -> List[CycleNoise]:
    return [
        CycleNoise(sample_laplace((n_frames, latent_dim), rng).data,
                   sample_laplace((n_frames, latent_dim), rng).data)
        for _ in range(n_cycles)
    ]


def converted_excitation(seq: AcousticFrameSequence, source: SpeakerCode, target: SpeakerCode,
                         speaker_stats: SpeakerStats) -> np.ndarray:
    """e^(y): transformed log-F0, the input's U/V and aperiodicity"""
    for code in (source, target):
        if code.index not in speaker_stats:
            raise SpeakerError(f"no log-F0 statistics for speaker {code.index}")
    excitation = seq.excitation()
    excitation[:, 0] = transform_log_f0(seq.log_f0, speaker_stats[source.index], speaker_stats[target.index])
    return excitation


def cycle_forward(model: CycleVAE, seq: AcousticFrameSequence, source: SpeakerCode,
                  pivots: Sequence[SpeakerCode], noise: Sequence[CycleNoise],
                  speaker_stats: SpeakerStats, params=None) -> CycleOutputs:
    """Run len(pivots) conversion / cyclic-reconstruction cycles"""
    params = model.params() if params is None else params
    if len(noise) != len(pivots):
        raise ShapeError(f"{len(pivots)} pivots but {len(noise)} noise draws")
    for pivot in pivots:
        if pivot.index == source.index:
            raise SpeakerError(f"pivot speaker {pivot.index} equals the source")
    excitation_x = seq.excitation()
    outputs = CycleOutputs(source=source, input_spectra=seq.mcep)

    spectra = Tensor(seq.mcep)
    for n, (pivot, eps) in enumerate(zip(pivots, noise), start=1):
        posterior_x = model.encode(params, spectra, excitation_x)
        z_x = reparameterize(posterior_x, eps.eps_x)
        reconstructed = model.decode(params, z_x, source)
        converted = model.decode(params, z_x, pivot)

        excitation_y = converted_excitation(seq, source, pivot, speaker_stats)
        posterior_y = model.encode(params, converted, excitation_y)
        z_y = reparameterize(posterior_y, eps.eps_y)
        cyclic = model.decode(params, z_y, source)

        outputs.steps.append(CycleStep(
            index=n, pivot=pivot, input_spectra=spectra, input_excitation=excitation_x,
            posterior_x=posterior_x, z_x=z_x, reconstructed=reconstructed, converted=converted,
            converted_excitation=excitation_y, posterior_y=posterior_y, z_y=z_y, cyclic=cyclic,
        ))
        spectra = cyclic
    return outputs


def _accuracy(logits: Tensor, target: int) -> float:
    return float(np.mean(np.argmax(logits.data, axis=1) == target))


def elbo_loss(outputs: CycleOutputs, target_spectra, source: SpeakerCode, config: ModelConfig,
              frame_weights: Optional[np.ndarray] = None) -> Tuple[Tensor, LossReport]:
    """Negative lower bound summed over cycles, each term a weighted mean over frames"""
    target = np.asarray(target_spectra, dtype=np.float64)
    n_frames = target.shape[0]
    weights = np.ones(n_frames) if frame_weights is None else np.asarray(frame_weights, dtype=np.float64)
    if weights.shape != (n_frames,) or not np.sum(weights) > 0:
        raise ShapeError("frame weights must be one nonnegative value per frame with a positive sum")
    if not outputs.steps:
        raise DataError("no cycles to score")

    total = None
    report = LossReport()
    source_targets = np.full(n_frames, source.index)
    for step in outputs.steps:
        if step.reconstructed.shape[0] != n_frames or step.cyclic.shape[0] != n_frames:
            raise ShapeError("cycle outputs and target have different frame counts")
        rec_frames = spectral_distance_frames(step.reconstructed, target)
        cyc_frames = spectral_distance_frames(step.cyclic, target)
        rec_power = _weighted_mean(absolute(step.reconstructed[:, 0] - target[:, 0]), weights)
        cyc_power = _weighted_mean(absolute(step.cyclic[:, 0] - target[:, 0]), weights)
        rec = _weighted_mean(rec_frames, weights)
        cyc = _weighted_mean(cyc_frames, weights)
        kl_x = _weighted_mean(kl_laplace_frames(step.posterior_x), weights)
        kl_y = _weighted_mean(kl_laplace_frames(step.posterior_y), weights)
        ce_x = _weighted_mean(cross_entropy(step.posterior_x.speaker_logits, source_targets), weights)
        ce_y = _weighted_mean(cross_entropy(step.posterior_y.speaker_logits,
                                            np.full(n_frames, step.pivot.index)), weights)

        cycle_total = (
            (rec + rec_power * config.weight_power) * config.weight_rec
            + (cyc + cyc_power * config.weight_power) * config.weight_cyc
            + kl_x * config.weight_kl_x
            + kl_y * config.weight_kl_y
            + ce_x * config.weight_spk_x
            + ce_y * config.weight_spk_y
        )
        total = cycle_total if total is None else total + cycle_total

        n = outputs.n_cycles
        report.rec_mcd += rec.item() / n
        report.cyc_mcd += cyc.item() / n
        report.power += (rec_power.item() + cyc_power.item()) / n
        report.kl_x += kl_x.item()
        report.kl_y += kl_y.item()
        report.ce_x += ce_x.item()
        report.ce_y += ce_y.item()
        report.spk_acc_x += _accuracy(step.posterior_x.speaker_logits, source.index) / n
        report.spk_acc_y += _accuracy(step.posterior_y.speaker_logits, step.pivot.index) / n
    report.total = total.item()
    return total, report


def train_step(model: CycleVAE, batch: Sequence[TrainingItem], optimizer: Adam, rng: np.random.Generator,
               speaker_stats: SpeakerStats) -> LossReport:
    """One gradient step on the mean loss of the batch; pivots and noise are drawn per utterance per cycle"""
    if not batch:
        raise DataError("empty training batch")
    config = model.config
    tape = Tape()
    params = model.params(tape)
    losses = []
    reports = []
    for item in batch:
        if item.source.n_speakers != model.n_speakers:
            raise SpeakerError("speaker code does not match the model's speaker count")
        seq = item.features
        pivots = [sample_pivot(item.source, rng) for _ in range(config.n_cycles)]
        noise = draw_cycle_noise(config.n_cycles, seq.n_frames, model.latent_dim, rng)
        outputs = cycle_forward(model, seq, item.source, pivots, noise, speaker_stats, params)
        loss, report = elbo_loss(outputs, seq.mcep, item.source, config, item.weights())
        losses.append(loss)
        reports.append(report)

    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    total = total * (1.0 / len(losses))
    optimizer.zero_grad()
    tape.backward(total)
    grad_norm = optimizer.step()

    summary = LossReport.mean(reports)
    summary.grad_norm = grad_norm
    return summary


def evaluate_batch(model: CycleVAE, batch: Sequence[TrainingItem], rng: np.random.Generator,
                   speaker_stats: SpeakerStats) -> LossReport:
    """Loss report without gradients, using z = mu"""
    if not batch:
        raise DataError("empty evaluation batch")
    params = model.params()
    reports = []
    for item in batch:
        seq = item.features
        pivots = [sample_pivot(item.source, rng) for _ in range(model.config.n_cycles)]
        noise = [CycleNoise.zeros(seq.n_frames, model.latent_dim) for _ in pivots]
        outputs = cycle_forward(model, seq, item.source, pivots, noise, speaker_stats, params)
        reports.append(elbo_loss(outputs, seq.mcep, item.source, model.config, item.weights())[1])
    return LossReport.mean(reports)


def convert(model: CycleVAE, seq: AcousticFrameSequence, source: SpeakerCode, target: SpeakerCode,
            speaker_stats: SpeakerStats, params=None) -> AcousticFrameSequence:
    """Decode z = mu with the target code; log-F0 mapped by speaker statistics, U/V and aperiodicity kept"""
    params = model.params() if params is None else params
    for code in (source, target):
        if code.index not in speaker_stats:
            raise SpeakerError(f"no log-F0 statistics for speaker {code.index}")
    posterior = model.encode(params, seq.mcep, seq.excitation())
    spectra = model.decode(params, posterior.mu, target).data
    log_f0 = transform_log_f0(seq.log_f0, speaker_stats[source.index], speaker_stats[target.index])
    return AcousticFrameSequence(spectra, np.array(log_f0, dtype=np.float64), seq.uv.copy(),
                                 seq.coded_ap.copy(), seq.frame_shift_ms)


def reconstruct_variants(model: CycleVAE, seq: AcousticFrameSequence, source: SpeakerCode,
                         pivots: Sequence[SpeakerCode], speaker_stats: SpeakerStats,
                         params=None) -> Tuple[np.ndarray, Dict[int, np.ndarray]]:
    """First-cycle reconstructed spectra and the cyclic spectra through each pivot, with z = mu"""
    params = model.params() if params is None else params
    posterior = model.encode(params, seq.mcep, seq.excitation())
    reconstructed = model.decode(params, posterior.mu, source).data
    cyclic: Dict[int, np.ndarray] = {}
    for pivot in pivots:
        if pivot.index == source.index:
            raise SpeakerError(f"pivot speaker {pivot.index} equals the source")
        converted = model.decode(params, posterior.mu, pivot)
        posterior_y = model.encode(params, converted, converted_excitation(seq, source, pivot, speaker_stats))
        cyclic[pivot.index] = model.decode(params, posterior_y.mu, source).data
    return reconstructed, cyclic
