"""
Training orchestration for the spectral model and the vocoder.

Both loops are sequential and seeded from ``Config.seed``: the seed is split
into an initialization stream and a training stream, and the training
stream's state is checkpointed so a resumed run continues the same
trajectory. Metric logs are CSV files with fixed headers.
"""

import logging
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from ...config import Config
from ...error_handling import ConfigurationError, DataError
from ..autodiff import Adam, restore_rng, rng_state
from ..cyclevae import CycleVAE, FeatureNormalizer, LossReport, SpeakerCode, TrainingItem
from ..cyclevae import evaluate_batch, reconstruct_variants, train_step
from ..dsp import LogF0Stats, speech_frame_mask
from ..vocoder import (
    AugmentedBatch,
    ConditioningNormalizer,
    ConditioningSequence,
    Discriminator,
    Generator,
    Provenance,
    crop_segment,
    vocoder_train_step,
)
from .audit_trail import IAuditTrail, NullAuditTrail
from .domain_entities import AccessPurpose, Checkpoint, CheckpointKind, CorpusManifest, FeatureIndex, Split
from .persistence import load_checkpoint, load_features, save_checkpoint

logger = logging.getLogger(__name__)

VAE_COLUMNS = ["epoch", "rec_mcd", "cyc_mcd", "kl_x", "kl_y", "spk_acc_x", "spk_acc_y", "total"]
VOCODER_COLUMNS = ["step", "stage", "generator_total", "stft", "adversarial", "discriminator"]


@dataclass
class TrainingResult:
    checkpoint_path: Path
    steps: int
    metrics: Dict[str, pd.DataFrame]


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    init_seq, train_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(init_seq)), np.random.Generator(np.random.PCG64(train_seq))


def corpus_config(config: Config, manifest: CorpusManifest) -> Config:
    """Config with the speaker count taken from the manifest"""
    if config.model.n_speakers != manifest.n_speakers:
        logger.info(f"using {manifest.n_speakers} speakers from the manifest "
                    f"(config said {config.model.n_speakers})")
    return replace(config, model=replace(config.model, n_speakers=manifest.n_speakers))


def speaker_stats_by_code(manifest: CorpusManifest) -> Dict[int, LogF0Stats]:
    return {profile.code.index: profile.require_stats() for profile in manifest.speakers}


def load_items(manifest: CorpusManifest, index: FeatureIndex, split: Split, audit: IAuditTrail,
               purpose: AccessPurpose, limit: Optional[int] = None) -> List[TrainingItem]:
    """Training items of one split, weighted to the speech frames of each utterance"""
    items = []
    for record in index.split(split)[:limit]:
        audit.log_access(record.utterance_id, record.speaker_id, record.split, purpose)
        profile = manifest.speaker(record.speaker_id)
        features, _ = load_features(index.resolve(record))
        mask = speech_frame_mask(features, profile.power_threshold_db).astype(np.float64)
        items.append(TrainingItem(features=features, source=profile.code,
                                  frame_weights=mask if mask.any() else None,
                                  utterance_id=record.utterance_id))
    return items


def _snapshot(config: Config) -> Dict[str, Dict]:
    return {"features": asdict(config.features), "model": asdict(config.model)}


def _check_resume(checkpoint: Checkpoint, config: Config) -> None:
    saved = Config.from_dict(checkpoint.config)
    for section, values in _snapshot(config).items():
        if _snapshot(saved)[section] != values:
            raise ConfigurationError(f"cannot resume: the {section} section differs from the checkpoint",
                                     {"section": section})


def _report_row(report: LossReport, epoch: int) -> Dict[str, float]:
    row = {"epoch": epoch}
    row.update({k: v for k, v in report.to_dict().items() if k in VAE_COLUMNS})
    return row


def _write_csv(rows: List[Dict], columns: Sequence[str], path: Path) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=list(columns))
    frame.to_csv(path, index=False)
    return frame


def _read_rows(path: Path, upto_epoch: int) -> List[Dict]:
    if not path.exists():
        return []
    frame = pd.read_csv(path, float_precision="round_trip")
    return frame[frame["epoch"] <= upto_epoch].to_dict("records")


def vae_checkpoint(model: CycleVAE, optimizer: Adam, config: Config, manifest: CorpusManifest,
                   step: int, epoch: int, rng: np.random.Generator) -> Checkpoint:
    params, moments = model.store.state_dict()
    return Checkpoint(
        kind=CheckpointKind.VAE,
        config=config.to_dict(),
        step=step,
        parameters=params,
        optimizer_state=moments,
        buffers=model.state_arrays(),
        rng_state=rng_state(rng),
        metadata={
            "epoch": epoch,
            "optimizer_steps": optimizer.step_count,
            "speakers": [profile.to_dict() for profile in manifest.speakers],
        },
    )


def load_vae(checkpoint: Checkpoint) -> Tuple[CycleVAE, Config, Dict[str, SpeakerCode], Dict[int, LogF0Stats]]:
    """Model, config, speaker codes by id and log-F0 statistics by code from a VAE checkpoint"""
    config = Config.from_dict(checkpoint.config)
    model = CycleVAE.from_config(config.model, config.features, seed=config.seed)
    model.store.load_state_dict(checkpoint.parameters)
    model.load_state_arrays(checkpoint.buffers)
    codes: Dict[str, SpeakerCode] = {}
    stats: Dict[int, LogF0Stats] = {}
    for entry in checkpoint.metadata.get("speakers", []):
        code = SpeakerCode(int(entry["code"]), config.model.n_speakers)
        codes[str(entry["id"])] = code
        if entry.get("logf0_stats"):
            stats[code.index] = LogF0Stats.from_dict(entry["logf0_stats"])
    return model, config, codes, stats


def train_vae(manifest: CorpusManifest, index: FeatureIndex, config: Config, out_dir: str,
              resume: Optional[str] = None, audit: Optional[IAuditTrail] = None,
              progress: bool = True) -> TrainingResult:
    """Epochs of cycle training with per-epoch train / validation metrics and periodic checkpoints"""
    audit = audit or NullAuditTrail()
    config = corpus_config(config, manifest)
    train_cfg = config.training
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stats = speaker_stats_by_code(manifest)

    train_items = load_items(manifest, index, Split.TRAIN, audit, AccessPurpose.TRAIN)
    if not train_items:
        raise DataError("no training utterances in the feature index")
    val_items = load_items(manifest, index, Split.VALIDATION, audit, AccessPurpose.VALIDATE,
                           limit=train_cfg.validation_count)

    init_rng, rng = _streams(config.seed)
    model = CycleVAE(config.model, config.features.mcep_dim, config.features.excitation_dim, rng=init_rng)
    optimizer = Adam(model.store, train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2,
                     train_cfg.adam_eps, train_cfg.grad_clip)
    step, first_epoch = 0, 1
    train_path, val_path = out / "vae_train.csv", out / "vae_validation.csv"

    if resume:
        checkpoint = load_checkpoint(resume, CheckpointKind.VAE)
        _check_resume(checkpoint, config)
        model.store.load_state_dict(checkpoint.parameters, checkpoint.optimizer_state)
        model.load_state_arrays(checkpoint.buffers)
        optimizer.step_count = int(checkpoint.metadata.get("optimizer_steps", checkpoint.step))
        rng = restore_rng(checkpoint.rng_state)
        step = checkpoint.step
        first_epoch = int(checkpoint.metadata["epoch"]) + 1
        logger.info(f"resuming from {resume} at epoch {first_epoch}, step {step}")
    else:
        model.normalizer = FeatureNormalizer.fit(item.features for item in train_items)

    train_rows = _read_rows(train_path, first_epoch - 1)
    val_rows = _read_rows(val_path, first_epoch - 1)
    last_path = out / "vae_last.vcck"
    batch_size = max(1, train_cfg.batch_size)

    epochs = tqdm(range(first_epoch, train_cfg.vae_epochs + 1), desc="vae", disable=not progress)
    for epoch in epochs:
        if step >= train_cfg.vae_max_steps:
            break
        order = rng.permutation(len(train_items))
        reports = []
        for start in range(0, len(order), batch_size):
            if step >= train_cfg.vae_max_steps:
                break
            batch = [train_items[i] for i in order[start:start + batch_size]]
            reports.append(train_step(model, batch, optimizer, rng, stats))
            step += 1
        summary = LossReport.mean(reports)
        train_rows.append(_report_row(summary, epoch))
        message = f"epoch {epoch} step {step}: rec {summary.rec_mcd:.3f} dB, cyc {summary.cyc_mcd:.3f} dB, " \
                  f"acc {summary.spk_acc_x:.3f}"

        if val_items:
            # seeded per epoch so validation never perturbs the training stream
            val_rng = np.random.Generator(np.random.PCG64([config.seed, epoch]))
            val_report = evaluate_batch(model, val_items, val_rng, stats)
            val_rows.append(_report_row(val_report, epoch))
            message += f", validation rec {val_report.rec_mcd:.3f} dB"
        logger.info(message)
        epochs.set_postfix(rec=f"{summary.rec_mcd:.2f}", cyc=f"{summary.cyc_mcd:.2f}")

        _write_csv(train_rows, VAE_COLUMNS, train_path)
        _write_csv(val_rows, VAE_COLUMNS, val_path)
        checkpoint = vae_checkpoint(model, optimizer, config, manifest, step, epoch, rng)
        if train_cfg.checkpoint_every and epoch % train_cfg.checkpoint_every == 0:
            save_checkpoint(out / f"vae_epoch{epoch:04d}.vcck", checkpoint)
        save_checkpoint(last_path, checkpoint)

    if not last_path.exists():
        save_checkpoint(last_path, vae_checkpoint(model, optimizer, config, manifest, step, first_epoch - 1, rng))
    return TrainingResult(
        checkpoint_path=last_path,
        steps=step,
        metrics={
            "train": _write_csv(train_rows, VAE_COLUMNS, train_path),
            "validation": _write_csv(val_rows, VAE_COLUMNS, val_path),
        },
    )


def pivot_codes(source: SpeakerCode, codes: Sequence[SpeakerCode], n_pivots: Optional[int]) -> List[SpeakerCode]:
    """The first ``n_pivots`` speakers other than the source, all of them by default"""
    others = [code for code in codes if code.index != source.index]
    count = len(others) if n_pivots is None else n_pivots
    if not 1 <= count <= len(others):
        raise ConfigurationError(f"n_pivots must be between 1 and {len(others)}, got {count}")
    return others[:count]


def augment(model: CycleVAE, manifest: CorpusManifest, index: FeatureIndex, stats: Dict[int, LogF0Stats],
            n_pivots: Optional[int], audit: IAuditTrail) -> List[AugmentedBatch]:
    """Natural, reconstructed and per-pivot cyclic conditioning for every training utterance"""
    codes = [profile.code for profile in manifest.speakers]
    batches = []
    for record in index.split(Split.TRAIN):
        audit.log_access(record.utterance_id, record.speaker_id, record.split, AccessPurpose.AUGMENT)
        source = manifest.speaker(record.speaker_id).code
        features, wave = load_features(index.resolve(record))
        pivots = pivot_codes(source, codes, n_pivots)
        reconstructed, cyclic = reconstruct_variants(model, features, source, pivots, stats)
        batches.append(AugmentedBatch(
            waveform=wave.samples,
            natural=ConditioningSequence(features.to_array(), Provenance.NATURAL),
            reconstructed=ConditioningSequence(features.with_spectra(reconstructed).to_array(),
                                               Provenance.RECONSTRUCTED),
            cyclic=[ConditioningSequence(features.with_spectra(cyclic[p.index]).to_array(),
                                         Provenance.CYCLIC, p.index) for p in pivots],
            utterance_id=record.utterance_id,
        ))
    return batches


def vocoder_checkpoint(generator: Generator, discriminator: Discriminator, gen_optimizer: Adam,
                       disc_optimizer: Adam, config: Config, step: int, rng: np.random.Generator,
                       metadata: Dict) -> Checkpoint:
    gen_params, gen_moments = generator.store.state_dict()
    disc_params, disc_moments = discriminator.store.state_dict()
    return Checkpoint(
        kind=CheckpointKind.VOCODER,
        config=config.to_dict(),
        step=step,
        parameters={**gen_params, **disc_params},
        optimizer_state={**gen_moments, **disc_moments},
        buffers=generator.normalizer.to_arrays(),
        rng_state=rng_state(rng),
        metadata={**metadata, "generator_steps": gen_optimizer.step_count,
                  "discriminator_steps": disc_optimizer.step_count},
    )


def load_generator(checkpoint: Checkpoint) -> Tuple[Generator, Config]:
    config = Config.from_dict(checkpoint.config)
    generator = Generator(config.vocoder, config.features.acoustic_dim, config.features.hop)
    generator.store.load_state_dict({k: v for k, v in checkpoint.parameters.items() if k.startswith("generator.")})
    generator.normalizer = ConditioningNormalizer.from_arrays(checkpoint.buffers)
    return generator, config


def train_vocoder(manifest: CorpusManifest, index: FeatureIndex, config: Config, vae_checkpoint_path: str,
                  out_dir: str, audit: Optional[IAuditTrail] = None, progress: bool = True) -> TrainingResult:
    """Two-stage vocoder training on conditioning augmented by the frozen spectral model"""
    audit = audit or NullAuditTrail()
    vae_ckpt = load_checkpoint(vae_checkpoint_path, CheckpointKind.VAE)
    model, vae_config, _, stats = load_vae(vae_ckpt)
    if vae_config.model.n_speakers != manifest.n_speakers:
        raise ConfigurationError("the spectral model was trained on a different number of speakers")
    if asdict(vae_config.features) != asdict(config.features):
        raise ConfigurationError("feature settings differ from the spectral model checkpoint")
    config = corpus_config(config, manifest)
    voc_cfg = config.vocoder
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    batches = augment(model, manifest, index, stats, voc_cfg.n_pivots, audit)
    if not batches:
        raise DataError("no training utterances in the feature index")
    hop = config.features.hop

    init_rng, rng = _streams(config.seed)
    generator = Generator(voc_cfg, config.features.acoustic_dim, hop, rng=init_rng)
    discriminator = Discriminator(voc_cfg, rng=init_rng)
    generator.normalizer = ConditioningNormalizer.fit(b.natural.features for b in batches)
    train_cfg = config.training
    gen_optimizer = Adam(generator.store, train_cfg.vocoder_learning_rate, train_cfg.beta1, train_cfg.beta2,
                         train_cfg.adam_eps, train_cfg.grad_clip)
    disc_optimizer = Adam(discriminator.store, train_cfg.vocoder_learning_rate, train_cfg.beta1,
                          train_cfg.beta2, train_cfg.adam_eps, train_cfg.grad_clip)
    metadata = {"vae_checkpoint": str(vae_checkpoint_path), "variants": len(batches[0].variants()),
                "speakers": [profile.speaker_id for profile in manifest.speakers]}

    rows = []
    total_steps = voc_cfg.pretrain_steps + voc_cfg.adversarial_steps
    log_path = out / "vocoder_train.csv"
    for step in tqdm(range(total_steps), desc="vocoder", disable=not progress):
        batch = batches[int(rng.integers(len(batches)))]
        batch = crop_segment(batch, voc_cfg.segment_frames, hop, rng)
        report = vocoder_train_step(batch, generator, discriminator, gen_optimizer, disc_optimizer,
                                    step, rng, voc_cfg)
        rows.append(report.to_dict())
        if train_cfg.log_interval and (step + 1) % train_cfg.log_interval == 0:
            logger.info(f"step {step + 1} [{report.stage.value}]: generator {report.generator_total:.4f}, "
                        f"stft {report.stft:.4f}, discriminator {report.discriminator}")
            _write_csv(rows, VOCODER_COLUMNS, log_path)
        if step + 1 == voc_cfg.pretrain_steps:
            save_checkpoint(out / "vocoder_pretrain.vcck",
                            vocoder_checkpoint(generator, discriminator, gen_optimizer, disc_optimizer,
                                               config, step + 1, rng, metadata))

    last_path = save_checkpoint(out / "vocoder_last.vcck",
                                vocoder_checkpoint(generator, discriminator, gen_optimizer, disc_optimizer,
                                                   config, total_steps, rng, metadata))
    return TrainingResult(checkpoint_path=last_path, steps=total_steps,
                          metrics={"train": _write_csv(rows, VOCODER_COLUMNS, log_path)})
