"""
Audit Trail

Records every utterance access with its split and purpose so that the
separation between training and validation data can be checked after the
fact.
"""

import json
import logging
import uuid
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

from .domain_entities import AccessPurpose, AuditEntry, Split

logger = logging.getLogger(__name__)

# purposes that shape trained parameters or statistics
LEARNING_PURPOSES = (AccessPurpose.STATS, AccessPurpose.TRAIN, AccessPurpose.AUGMENT)


class IAuditTrail(ABC):
    """Interface for utterance access logging"""

    @abstractmethod
    def log_access(self, utterance_id: str, speaker_id: str, split: Split, purpose: AccessPurpose,
                   details: Optional[Dict[str, Any]] = None) -> AuditEntry:
        pass

    @abstractmethod
    def entries(self) -> List[AuditEntry]:
        pass

    def accessed(self, purpose: Optional[AccessPurpose] = None, split: Optional[Split] = None) -> List[str]:
        """Utterance ids in access order, filtered by purpose and split"""
        return [e.utterance_id for e in self.entries()
                if (purpose is None or e.purpose == purpose) and (split is None or e.split == split)]

    def leaked_validation(self) -> List[AuditEntry]:
        """Validation utterances that were used for learning"""
        return [e for e in self.entries() if e.split == Split.VALIDATION and e.purpose in LEARNING_PURPOSES]

    def get_summary(self) -> Dict[str, Any]:
        counts: Dict[str, int] = {}
        for entry in self.entries():
            key = f"{entry.purpose.value}/{entry.split.value}"
            counts[key] = counts.get(key, 0) + 1
        return {"total_accesses": len(self.entries()), "by_purpose_and_split": counts,
                "validation_leaks": len(self.leaked_validation())}

    @staticmethod
    def _new_entry(utterance_id: str, speaker_id: str, split: Split, purpose: AccessPurpose,
                   details: Optional[Dict[str, Any]]) -> AuditEntry:
        return AuditEntry(
            entry_id=str(uuid.uuid4()),
            timestamp=datetime.now(),
            utterance_id=utterance_id,
            speaker_id=speaker_id,
            split=split,
            purpose=purpose,
            details=details or {},
        )


class InMemoryAuditTrail(IAuditTrail):
    def __init__(self):
        self._entries: List[AuditEntry] = []

    def log_access(self, utterance_id, speaker_id, split, purpose, details=None) -> AuditEntry:
        entry = self._new_entry(utterance_id, speaker_id, split, purpose, details)
        self._entries.append(entry)
        return entry

    def entries(self) -> List[AuditEntry]:
        return list(self._entries)


class FileAuditTrail(IAuditTrail):
    """JSON-lines audit log, appended on every access"""

    def __init__(self, path: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._entries: List[AuditEntry] = []
        self._load()

    def log_access(self, utterance_id, speaker_id, split, purpose, details=None) -> AuditEntry:
        entry = self._new_entry(utterance_id, speaker_id, split, purpose, details)
        self._entries.append(entry)
        try:
            with open(self.path, "a") as f:
                f.write(json.dumps(entry.to_dict(), default=str) + "\n")
        except OSError as e:
            logger.warning(f"Failed to persist audit entry: {e}")
        return entry

    def entries(self) -> List[AuditEntry]:
        return list(self._entries)

    def _load(self) -> None:
        if not self.path.exists():
            return
        try:
            with open(self.path, "r") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        self._entries.append(AuditEntry.from_dict(json.loads(line)))
        except (OSError, ValueError, KeyError) as e:
            logger.warning(f"Failed to load audit trail {self.path}: {e}")


class NullAuditTrail(IAuditTrail):
    """Discards accesses"""

    def log_access(self, utterance_id, speaker_id, split, purpose, details=None) -> AuditEntry:
        return self._new_entry(utterance_id, speaker_id, split, purpose, details)

    def entries(self) -> List[AuditEntry]:
        return []
