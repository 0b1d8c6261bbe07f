"""
Tests for the error hierarchy, the ErrorHandler and the CLI error line
"""

import json
import logging

import pytest

from cyclevc.error_handling import (
    AudioFormatError,
    DataError,
    EmptyUtteranceError,
    ErrorCategory,
    ErrorHandler,
    ErrorSeverity,
    PersistenceError,
    SpeakerError,
    UnvoicedUtteranceError,
    VoiceConversionError,
    error_line,
)


class TestErrorHierarchy:

    @pytest.mark.parametrize("error_cls, category", [
        (AudioFormatError, ErrorCategory.AUDIO_FORMAT),
        (PersistenceError, ErrorCategory.PERSISTENCE),
        (SpeakerError, ErrorCategory.SPEAKER),
        (DataError, ErrorCategory.DATA),
    ])
    def test_category(self, error_cls, category):
        error = error_cls("boom")
        assert error.category == category
        assert isinstance(error, VoiceConversionError)
        assert isinstance(error, ValueError)

    def test_default_messages(self):
        assert str(UnvoicedUtteranceError()) == "unvoiced utterance"
        assert str(EmptyUtteranceError()) == "empty utterance"
        assert EmptyUtteranceError().category == ErrorCategory.EMPTY_UTTERANCE


class TestErrorHandler:

    @pytest.fixture
    def handler(self):
        return ErrorHandler(logging.getLogger("test.errors"))

    def test_records_library_errors(self, handler):
        """Known errors keep their own category"""
        recorded = handler.handle_error(EmptyUtteranceError(), {"utterance": "spk1/001"})

        assert recorded.category == ErrorCategory.EMPTY_UTTERANCE
        assert recorded.message == "empty utterance"
        assert recorded.context == {"utterance": "spk1/001"}
        assert recorded.error_id.startswith("VC_ERR_")

    def test_categorizes_foreign_errors(self, handler):
        recorded = handler.handle_error(OSError("disk gone"))

        assert recorded.category == ErrorCategory.PERSISTENCE
        assert recorded.severity == ErrorSeverity.MEDIUM

    def test_summary(self, handler):
        assert handler.get_error_summary()["total_errors"] == 0

        handler.handle_error(SpeakerError("unknown speaker"))
        handler.handle_error(SpeakerError("another"))
        handler.handle_error(RuntimeError("other"))
        summary = handler.get_error_summary()

        assert summary["total_errors"] == 3
        assert summary["category_distribution"] == {"speaker": 2, "system": 1}
        assert len(summary["errors"]) == 3


class TestErrorLine:

    def test_single_json_line(self):
        line = error_line(SpeakerError("unknown speaker id 'x'\nsecond line"))

        assert "\n" not in line
        assert json.loads(line) == {"error": "speaker", "message": "unknown speaker id 'x' second line"}

    def test_foreign_errors_are_system(self):
        assert json.loads(error_line(KeyError("k")))["error"] == "system"
