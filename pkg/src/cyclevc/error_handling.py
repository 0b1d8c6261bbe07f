"""
Error Handling

Structured exceptions for the voice conversion pipeline and a small handler
that records failures (for example unreadable files during ingest) so a
long-running job can report them at the end instead of stopping.
"""

import json
import logging
import traceback
import uuid
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional


class ErrorSeverity(Enum):
    """Error severity levels"""
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    """Categories of errors"""
    CONFIGURATION = "configuration"
    SIGNAL = "signal"
    UNVOICED = "unvoiced_utterance"
    EMPTY_UTTERANCE = "empty_utterance"
    SHAPE = "shape"
    SPEAKER = "speaker"
    STAGE = "stage"
    AUDIO_FORMAT = "audio_format"
    PERSISTENCE = "persistence"
    DATA = "data"
    SYSTEM = "system"


@dataclass
class RecordedError:
    """Structured error information"""
    error_id: str
    timestamp: datetime
    category: ErrorCategory
    severity: ErrorSeverity
    message: str
    component: str
    details: Dict[str, Any] = field(default_factory=dict)
    context: Dict[str, Any] = field(default_factory=dict)
    traceback: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error_id": self.error_id,
            "timestamp": self.timestamp.isoformat(),
            "category": self.category.value,
            "severity": self.severity.value,
            "message": self.message,
            "component": self.component,
            "details": self.details,
            "context": self.context,
        }


class VoiceConversionError(ValueError):
    """Base exception for pipeline errors"""

    def __init__(self, message: str, category: ErrorCategory = ErrorCategory.SYSTEM,
                 severity: ErrorSeverity = ErrorSeverity.HIGH,
                 details: Optional[Dict[str, Any]] = None, component: str = "unknown"):
        super().__init__(message)
        self.category = category
        self.severity = severity
        self.details = details or {}
        self.component = component


class ConfigurationError(VoiceConversionError):
    """Invalid or inconsistent configuration"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.CONFIGURATION, ErrorSeverity.CRITICAL,
                         details, "configuration")


class SignalError(VoiceConversionError):
    """Invalid signal-processing input or parameters"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.SIGNAL, ErrorSeverity.MEDIUM,
                         details, "dsp")


class UnvoicedUtteranceError(VoiceConversionError):
    """No voiced frame to build a log-F0 track from"""
    def __init__(self, message: str = "unvoiced utterance", details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.UNVOICED, ErrorSeverity.MEDIUM,
                         details, "dsp")


class EmptyUtteranceError(VoiceConversionError):
    """Every frame fell below the power threshold"""
    def __init__(self, message: str = "empty utterance", details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.EMPTY_UTTERANCE, ErrorSeverity.MEDIUM,
                         details, "dsp")


class ShapeError(VoiceConversionError):
    """Tensor or feature dimensions do not line up"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.SHAPE, ErrorSeverity.HIGH,
                         details, "autodiff")


class SpeakerError(VoiceConversionError):
    """Invalid speaker code, pivot or missing speaker statistics"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.SPEAKER, ErrorSeverity.HIGH,
                         details, "speakers")


class StageError(VoiceConversionError):
    """Operation called in the wrong training stage"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.STAGE, ErrorSeverity.HIGH,
                         details, "vocoder")


class AudioFormatError(VoiceConversionError):
    """Unsupported WAV layout or sample rate"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.AUDIO_FORMAT, ErrorSeverity.MEDIUM,
                         details, "audio_io")


class PersistenceError(VoiceConversionError):
    """Corrupt, truncated or mismatched feature / checkpoint file"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.PERSISTENCE, ErrorSeverity.HIGH,
                         details, "persistence")


class DataError(VoiceConversionError):
    """Empty or inconsistent data collections"""
    def __init__(self, message: str, details: Dict[str, Any] = None):
        super().__init__(message, ErrorCategory.DATA, ErrorSeverity.HIGH,
                         details, "data")


class ErrorHandler:
    """Collects errors that a job chooses to survive"""

    def __init__(self, logger: logging.Logger = None):
        self.logger = logger or logging.getLogger("cyclevc.errors")
        self.error_history: List[RecordedError] = []

    def handle_error(self, error: Exception, context: Dict[str, Any] = None) -> RecordedError:
        """Convert any exception to a RecordedError, store and log it"""
        context = context or {}
        if isinstance(error, VoiceConversionError):
            category = error.category
            severity = error.severity
            component = error.component
            details = error.details
        else:
            category = self._categorize_error(error)
            severity = ErrorSeverity.MEDIUM
            component = context.get("component", "unknown")
            details = {"error_type": type(error).__name__}

        recorded = RecordedError(
            error_id=f"VC_ERR_{uuid.uuid4().hex[:8].upper()}",
            timestamp=datetime.now(),
            category=category,
            severity=severity,
            message=str(error),
            component=component,
            details=details,
            context=context,
            traceback=traceback.format_exc(),
        )
        self.error_history.append(recorded)
        self._log_error(recorded)
        return recorded

    def _categorize_error(self, error: Exception) -> ErrorCategory:
        if isinstance(error, (OSError, EOFError)):
            return ErrorCategory.PERSISTENCE
        if isinstance(error, FloatingPointError):
            return ErrorCategory.SIGNAL
        return ErrorCategory.SYSTEM

    def _log_error(self, error: RecordedError) -> None:
        log_message = f"[{error.error_id}] {error.component}: {error.message}"
        if error.severity == ErrorSeverity.CRITICAL:
            self.logger.critical(log_message)
        elif error.severity == ErrorSeverity.HIGH:
            self.logger.error(log_message)
        elif error.severity == ErrorSeverity.MEDIUM:
            self.logger.warning(log_message)
        else:
            self.logger.info(log_message)
        if error.context:
            self.logger.debug(f"[{error.error_id}] Context: {error.context}")

    def get_error_summary(self) -> Dict[str, Any]:
        """Get summary of all errors encountered"""
        if not self.error_history:
            return {"total_errors": 0, "message": "No errors recorded"}

        category_counts: Dict[str, int] = {}
        severity_counts: Dict[str, int] = {}
        for error in self.error_history:
            category_counts[error.category.value] = category_counts.get(error.category.value, 0) + 1
            severity_counts[error.severity.value] = severity_counts.get(error.severity.value, 0) + 1

        return {
            "total_errors": len(self.error_history),
            "category_distribution": category_counts,
            "severity_distribution": severity_counts,
            "errors": [error.to_dict() for error in self.error_history],
        }


def error_line(error: Exception) -> str:
    """Single-line machine-readable rendering used by the CLI"""
    category = error.category.value if isinstance(error, VoiceConversionError) else "system"
    message = " ".join(str(error).split())
    return json.dumps({"error": category, "message": message}, sort_keys=True)
