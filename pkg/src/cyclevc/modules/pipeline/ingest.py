"""
Ingest - feature extraction over a corpus manifest and per-speaker statistics
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ...config import FeatureConfig
from ...error_handling import DataError, ErrorHandler, UnvoicedUtteranceError
from ..dsp import analyze_waveform, log_f0_stats, read_wav
from ..dsp.business_logic import DB_PER_NEPER
from .audit_trail import IAuditTrail, NullAuditTrail
from .domain_entities import (
    AccessPurpose,
    CorpusManifest,
    FeatureIndex,
    FeatureRecord,
    Split,
    SpeakerStatistics,
    UtteranceEntry,
)
from .persistence import load_features, save_features

logger = logging.getLogger(__name__)

FEATURE_DIR = "features"
INDEX_FILE = "index.json"
STATS_FILE = "stats.json"


def feature_path(entry: UtteranceEntry) -> str:
    """Path of an utterance's feature file relative to the feature directory"""
    return f"{entry.speaker_id}/{Path(entry.wav_path).stem}.vcft"


def _ingest_one(entry: UtteranceEntry, manifest: CorpusManifest, config: FeatureConfig,
                feature_dir: Path) -> FeatureRecord:
    profile = manifest.speaker(entry.speaker_id)
    wave = read_wav(manifest.resolve(entry.wav_path), expected_rate=config.sample_rate)
    result = analyze_waveform(wave, config, f0_min=profile.f0_min, f0_max=profile.f0_max,
                              power_threshold_db=profile.power_threshold_db)
    relative = feature_path(entry)
    target = feature_dir / relative
    target.parent.mkdir(parents=True, exist_ok=True)
    save_features(target, result.features, result.waveform)
    return FeatureRecord(
        utterance_id=entry.utterance_id,
        speaker_id=entry.speaker_id,
        split=entry.split,
        path=relative,
        frames=result.features.n_frames,
        voiced_ratio=result.voiced_ratio,
    )


def ingest(manifest: CorpusManifest, config: FeatureConfig, out_dir: str,
           audit: Optional[IAuditTrail] = None, max_workers: int = 1,
           error_handler: Optional[ErrorHandler] = None) -> FeatureIndex:
    """Extract and persist features for every manifest utterance.

    Failing utterances are recorded and skipped. Utterances are processed in
    path-sorted order and the index keeps that order whatever the worker
    count.
    """
    audit = audit or NullAuditTrail()
    handler = error_handler or ErrorHandler(logger)
    feature_dir = Path(out_dir) / FEATURE_DIR
    feature_dir.mkdir(parents=True, exist_ok=True)
    entries = sorted(manifest.utterances, key=lambda u: (u.speaker_id, u.wav_path))

    def run(entry: UtteranceEntry) -> Tuple[UtteranceEntry, Optional[FeatureRecord], Optional[Exception]]:
        try:
            return entry, _ingest_one(entry, manifest, config, feature_dir), None
        except Exception as e:
            return entry, None, e

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            outcomes = list(executor.map(run, entries))
    else:
        outcomes = [run(entry) for entry in entries]

    records: List[FeatureRecord] = []
    failures: List[Dict[str, str]] = []
    for entry, record, error in outcomes:
        audit.log_access(entry.utterance_id, entry.speaker_id, entry.split, AccessPurpose.INGEST)
        if error is not None:
            recorded = handler.handle_error(error, {"component": "ingest", "utterance": entry.utterance_id})
            failures.append({"utterance_id": entry.utterance_id, "path": entry.wav_path,
                             "error": recorded.category.value, "message": recorded.message})
            continue
        records.append(record)

    if not records:
        raise DataError(f"no utterance could be ingested ({len(failures)} failures)")
    index = FeatureIndex(records=records, failures=failures, root=str(feature_dir))
    index.save(str(feature_dir / INDEX_FILE))
    logger.info(f"ingested {len(records)} utterances, {len(failures)} failures")
    return index


def compute_stats(index: FeatureIndex, speaker_id: str, audit: Optional[IAuditTrail] = None,
                  std_floor: float = 1e-3) -> SpeakerStatistics:
    """Voiced log-F0 and frame-power statistics over the speaker's training split only"""
    audit = audit or NullAuditTrail()
    records = index.split(Split.TRAIN, speaker_id)
    if not records:
        raise DataError(f"speaker {speaker_id} has no ingested training utterances")
    voiced: List[np.ndarray] = []
    power: List[np.ndarray] = []
    total_frames = 0
    for record in records:
        audit.log_access(record.utterance_id, record.speaker_id, record.split, AccessPurpose.STATS)
        features, _ = load_features(index.resolve(record))
        voiced.append(features.voiced_log_f0())
        power.append(DB_PER_NEPER * features.mcep[:, 0])
        total_frames += features.n_frames
    voiced_values = np.concatenate(voiced)
    if voiced_values.size == 0:
        raise UnvoicedUtteranceError(f"speaker {speaker_id} has no voiced training frames")
    power_values = np.concatenate(power)
    return SpeakerStatistics(
        speaker_id=speaker_id,
        logf0=log_f0_stats(voiced_values, std_floor),
        power_mean_db=float(np.mean(power_values)),
        power_std_db=float(np.std(power_values)),
        voiced_frames=int(voiced_values.size),
        total_frames=total_frames,
    )


def compute_all_stats(manifest: CorpusManifest, index: FeatureIndex, out_path: str,
                      audit: Optional[IAuditTrail] = None) -> Dict[str, SpeakerStatistics]:
    """Statistics for every manifest speaker, written as JSON and attached to the profiles"""
    stats = {}
    for profile in manifest.speakers:
        stats[profile.speaker_id] = compute_stats(index, profile.speaker_id, audit)
        profile.logf0_stats = stats[profile.speaker_id].logf0
        logger.info(f"speaker {profile.speaker_id}: log-F0 mean {profile.logf0_stats.mean:.4f}, "
                    f"std {profile.logf0_stats.std:.4f}")
    target = Path(out_path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w") as f:
        json.dump({spk: s.to_dict() for spk, s in stats.items()}, f, indent=2, sort_keys=True)
    return stats


def load_stats(path: str) -> Dict[str, SpeakerStatistics]:
    stats_path = Path(path)
    if not stats_path.exists():
        raise DataError(f"speaker statistics not found: {path}; run `cyclevc stats` first")
    with open(stats_path, "r") as f:
        data = json.load(f)
    return {spk: SpeakerStatistics.from_dict(entry) for spk, entry in data.items()}


def attach_stats(manifest: CorpusManifest, stats: Dict[str, SpeakerStatistics]) -> CorpusManifest:
    for profile in manifest.speakers:
        if profile.speaker_id in stats:
            profile.logf0_stats = stats[profile.speaker_id].logf0
    return manifest
