"""
Pipeline Module

Corpus handling, training orchestration, conversion and evaluation:

- domain_entities.py: manifests, speaker profiles, feature index, checkpoints, audit entries
- audit_trail.py: utterance access logging for train / validation separation
- persistence.py: binary feature and checkpoint files
- ingest.py: feature extraction and per-speaker statistics
- training.py: spectral model and vocoder training loops
- conversion.py: end-to-end utterance conversion
- evaluation.py: DTW alignment and objective metrics
- synthetic.py: synthetic parallel corpus generator
"""

from .domain_entities import (
    AccessPurpose,
    AuditEntry,
    Checkpoint,
    CheckpointKind,
    CorpusManifest,
    FeatureIndex,
    FeatureRecord,
    SpeakerProfile,
    SpeakerStatistics,
    Split,
    UtteranceEntry,
)
from .audit_trail import FileAuditTrail, IAuditTrail, InMemoryAuditTrail, NullAuditTrail
from .persistence import checkpoint_summary, load_checkpoint, load_features, save_checkpoint, save_features
from .ingest import attach_stats, compute_all_stats, compute_stats, ingest, load_stats
from .training import TrainingResult, load_generator, load_vae, train_vae, train_vocoder
from .conversion import ConversionResult, convert_utterance
from .evaluation import PairMetrics, dtw_align, evaluate, evaluate_pair, read_pairs
from .synthetic import make_synthetic_corpus, render_utterance

__all__ = [
    "AccessPurpose", "AuditEntry", "Checkpoint", "CheckpointKind", "CorpusManifest", "FeatureIndex",
    "FeatureRecord", "SpeakerProfile", "SpeakerStatistics", "Split", "UtteranceEntry",
    "FileAuditTrail", "IAuditTrail", "InMemoryAuditTrail", "NullAuditTrail",
    "checkpoint_summary", "load_checkpoint", "load_features", "save_checkpoint", "save_features",
    "attach_stats", "compute_all_stats", "compute_stats", "ingest", "load_stats",
    "TrainingResult", "load_generator", "load_vae", "train_vae", "train_vocoder",
    "ConversionResult", "convert_utterance",
    "PairMetrics", "dtw_align", "evaluate", "evaluate_pair", "read_pairs",
    "make_synthetic_corpus", "render_utterance",
]
