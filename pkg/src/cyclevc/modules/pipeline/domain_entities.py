"""
Domain Entities - speakers, corpus manifests, feature index and checkpoints
"""

import json
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from ...error_handling import DataError, SpeakerError
from ..cyclevae import SpeakerCode
from ..dsp import LogF0Stats


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"


class AccessPurpose(Enum):
    """Why an utterance was read"""
    INGEST = "ingest"
    STATS = "stats"
    TRAIN = "train"
    VALIDATE = "validate"
    AUGMENT = "augment"
    CONVERT = "convert"
    EVALUATE = "evaluate"


class CheckpointKind(Enum):
    VAE = "vae"
    VOCODER = "vocoder"


@dataclass
class SpeakerProfile:
    """Per-speaker annotation: F0 search range, power threshold and (once computed) log-F0 statistics"""
    speaker_id: str
    code: SpeakerCode
    f0_min: float = 70.0
    f0_max: float = 400.0
    power_threshold_db: float = -40.0
    logf0_stats: Optional[LogF0Stats] = None

    def __post_init__(self):
        if not 0 < self.f0_min < self.f0_max:
            raise SpeakerError(f"speaker {self.speaker_id}: expected 0 < f0_min < f0_max")

    def require_stats(self) -> LogF0Stats:
        if self.logf0_stats is None:
            raise SpeakerError(f"speaker {self.speaker_id} has no log-F0 statistics; run `cyclevc stats` first")
        return self.logf0_stats

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.speaker_id,
            "code": self.code.index,
            "f0_min": self.f0_min,
            "f0_max": self.f0_max,
            "power_threshold_db": self.power_threshold_db,
            "logf0_stats": self.logf0_stats.to_dict() if self.logf0_stats else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], n_speakers: int) -> "SpeakerProfile":
        stats = data.get("logf0_stats")
        return cls(
            speaker_id=str(data["id"]),
            code=SpeakerCode(int(data["code"]), n_speakers),
            f0_min=float(data.get("f0_min", 70.0)),
            f0_max=float(data.get("f0_max", 400.0)),
            power_threshold_db=float(data.get("power_threshold_db", -40.0)),
            logf0_stats=LogF0Stats.from_dict(stats) if stats else None,
        )


@dataclass
class UtteranceEntry:
    utterance_id: str
    speaker_id: str
    split: Split
    wav_path: str


@dataclass
class CorpusManifest:
    """Speakers with their annotations and explicit train / validation utterance lists.

    JSON layout::

        {"speakers": [{"id": "spk1", "f0_min": 70, "f0_max": 250,
                       "power_threshold_db": -40,
                       "train": ["wav/a.wav", ...], "validation": [...]}, ...]}

    Relative paths resolve against the manifest's directory; speaker codes
    follow list order.
    """
    speakers: List[SpeakerProfile]
    utterances: List[UtteranceEntry]
    root: str = "."

    def __post_init__(self):
        if len(self.speakers) < 2:
            raise DataError("a corpus needs at least two speakers")
        ids = [s.speaker_id for s in self.speakers]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate speaker ids in manifest")
        seen: Dict[str, Split] = {}
        for entry in self.utterances:
            key = str(Path(entry.wav_path))
            if key in seen and seen[key] != entry.split:
                raise DataError(f"{entry.wav_path} appears in both train and validation splits")
            seen[key] = entry.split
        uids = [u.utterance_id for u in self.utterances]
        if len(set(uids)) != len(uids):
            raise DataError("duplicate utterance ids in manifest")

    @property
    def n_speakers(self) -> int:
        return len(self.speakers)

    def speaker(self, speaker_id: str) -> SpeakerProfile:
        for profile in self.speakers:
            if profile.speaker_id == speaker_id:
                return profile
        raise SpeakerError(f"unknown speaker id '{speaker_id}'")

    def split(self, split: Split, speaker_id: Optional[str] = None) -> List[UtteranceEntry]:
        return [u for u in self.utterances
                if u.split == split and (speaker_id is None or u.speaker_id == speaker_id)]

    def resolve(self, wav_path: str) -> Path:
        path = Path(wav_path)
        return path if path.is_absolute() else Path(self.root) / path

    @classmethod
    def from_dict(cls, data: Dict[str, Any], root: str = ".") -> "CorpusManifest":
        speakers_data = data.get("speakers") or []
        n_speakers = len(speakers_data)
        speakers: List[SpeakerProfile] = []
        utterances: List[UtteranceEntry] = []
        for index, spk in enumerate(speakers_data):
            if "id" not in spk:
                raise DataError(f"speaker entry {index} has no id")
            speakers.append(SpeakerProfile(
                speaker_id=str(spk["id"]),
                code=SpeakerCode(index, max(n_speakers, 1)),
                f0_min=float(spk.get("f0_min", 70.0)),
                f0_max=float(spk.get("f0_max", 400.0)),
                power_threshold_db=float(spk.get("power_threshold_db", -40.0)),
            ))
            for split in Split:
                for wav in spk.get(split.value, []):
                    uid = f"{spk['id']}/{Path(wav).stem}"
                    utterances.append(UtteranceEntry(uid, str(spk["id"]), split, str(wav)))
        return cls(speakers=speakers, utterances=utterances, root=root)

    @classmethod
    def load(cls, path: str) -> "CorpusManifest":
        manifest_path = Path(path)
        if not manifest_path.exists():
            raise DataError(f"manifest not found: {path}")
        try:
            with open(manifest_path, "r") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"manifest {path} is not valid JSON: {e}") from e
        return cls.from_dict(data, root=str(manifest_path.parent))

    def to_dict(self) -> Dict[str, Any]:
        speakers = []
        for profile in self.speakers:
            entry = {
                "id": profile.speaker_id,
                "f0_min": profile.f0_min,
                "f0_max": profile.f0_max,
                "power_threshold_db": profile.power_threshold_db,
            }
            for split in Split:
                entry[split.value] = [u.wav_path for u in self.split(split, profile.speaker_id)]
            speakers.append(entry)
        return {"speakers": speakers}

    def save(self, path: str) -> None:
        manifest_path = Path(path)
        manifest_path.parent.mkdir(parents=True, exist_ok=True)
        with open(manifest_path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)


@dataclass
class FeatureRecord:
    """One ingested utterance in the feature index"""
    utterance_id: str
    speaker_id: str
    split: Split
    path: str
    frames: int
    voiced_ratio: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "utterance_id": self.utterance_id,
            "speaker_id": self.speaker_id,
            "split": self.split.value,
            "path": self.path,
            "frames": self.frames,
            "voiced_ratio": self.voiced_ratio,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureRecord":
        return cls(
            utterance_id=data["utterance_id"],
            speaker_id=data["speaker_id"],
            split=Split(data["split"]),
            path=data["path"],
            frames=int(data["frames"]),
            voiced_ratio=float(data["voiced_ratio"]),
        )


@dataclass
class SpeakerStatistics:
    """Training-split statistics of one speaker"""
    speaker_id: str
    logf0: LogF0Stats
    power_mean_db: float
    power_std_db: float
    voiced_frames: int
    total_frames: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "speaker_id": self.speaker_id,
            "logf0": self.logf0.to_dict(),
            "power_mean_db": self.power_mean_db,
            "power_std_db": self.power_std_db,
            "voiced_frames": self.voiced_frames,
            "total_frames": self.total_frames,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SpeakerStatistics":
        return cls(
            speaker_id=data["speaker_id"],
            logf0=LogF0Stats.from_dict(data["logf0"]),
            power_mean_db=float(data["power_mean_db"]),
            power_std_db=float(data["power_std_db"]),
            voiced_frames=int(data["voiced_frames"]),
            total_frames=int(data["total_frames"]),
        )


@dataclass
class Checkpoint:
    """Everything needed to resume training or run inference for one model kind"""
    kind: CheckpointKind
    config: Dict[str, Any]
    step: int
    parameters: Dict[str, np.ndarray]
    optimizer_state: Dict[str, np.ndarray] = field(default_factory=dict)
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    rng_state: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)
    version: int = 1


@dataclass
class AuditEntry:
    """One utterance access"""
    entry_id: str
    timestamp: datetime
    utterance_id: str
    speaker_id: str
    split: Split
    purpose: AccessPurpose
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "entry_id": self.entry_id,
            "timestamp": self.timestamp.isoformat(),
            "utterance_id": self.utterance_id,
            "speaker_id": self.speaker_id,
            "split": self.split.value,
            "purpose": self.purpose.value,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AuditEntry":
        return cls(
            entry_id=data["entry_id"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
            utterance_id=data["utterance_id"],
            speaker_id=data["speaker_id"],
            split=Split(data["split"]),
            purpose=AccessPurpose(data["purpose"]),
            details=data.get("details", {}),
        )


@dataclass
class FeatureIndex:
    """Ingested utterances plus the failures recorded while ingesting"""
    records: List[FeatureRecord]
    failures: List[Dict[str, Any]] = field(default_factory=list)
    root: str = "."

    def split(self, split: Split, speaker_id: Optional[str] = None) -> List[FeatureRecord]:
        return [r for r in self.records
                if r.split == split and (speaker_id is None or r.speaker_id == speaker_id)]

    def resolve(self, record: FeatureRecord) -> Path:
        return Path(self.root) / record.path

    def to_dict(self) -> Dict[str, Any]:
        return {"records": [r.to_dict() for r in self.records], "failures": self.failures}

    @classmethod
    def load(cls, path: str) -> "FeatureIndex":
        index_path = Path(path)
        if not index_path.exists():
            raise DataError(f"feature index not found: {path}; run `cyclevc ingest` first")
        with open(index_path, "r") as f:
            data = json.load(f)
        return cls(records=[FeatureRecord.from_dict(r) for r in data.get("records", [])],
                   failures=list(data.get("failures", [])), root=str(index_path.parent))

    def save(self, path: str) -> None:
        index_path = Path(path)
        index_path.parent.mkdir(parents=True, exist_ok=True)
        with open(index_path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
