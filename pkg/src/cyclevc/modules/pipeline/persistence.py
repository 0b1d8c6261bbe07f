"""
Persistence - little-endian binary containers for features and checkpoints

Feature file (``.vcft``)::

    magic  b"VCFT"
    u32    version
    u32    frames
    u32    mcep_dim
    u32    aperiodicity bands   (channel layout: mcep, log_f0, uv, coded_ap)
    f64    frame shift in ms
    f64    frames * (mcep_dim + 2 + bands), frame-major
    u32    sample rate
    u32    waveform samples
    f64    waveform samples

Checkpoint file (``.vcck``)::

    magic  b"VCCK"
    u32    version
    str    kind              (u32 length + utf-8 bytes)
    str    config as YAML
    u64    step
    u32    array count, then per array:
           str name (prefixed p: parameter, o: optimizer, x: buffer)
           u32 ndim, u32 * ndim shape, f64 data
    str    RNG state as JSON
    str    metadata as JSON
    u32    CRC-32 of every preceding byte
"""

import json
import logging
import struct
import zlib
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import yaml

from ...error_handling import PersistenceError
from ..dsp import AcousticFrameSequence, Waveform
from .domain_entities import Checkpoint, CheckpointKind

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"VCFT"
CHECKPOINT_MAGIC = b"VCCK"
FEATURE_VERSION = 1
CHECKPOINT_VERSION = 1

_ARRAY_PREFIXES = {"parameters": "p:", "optimizer_state": "o:", "buffers": "x:"}

PathLike = Union[str, Path]


class _Reader:
    """Cursor over a byte string that raises PersistenceError on truncation"""

    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, count: int) -> bytes:
        end = self.offset + count
        if count < 0 or end > len(self.data):
            raise PersistenceError(f"{self.source}: truncated at byte {self.offset}",
                                   {"needed": count, "available": len(self.data) - self.offset})
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str):
        values = struct.unpack(fmt, self.take(struct.calcsize(fmt)))
        return values[0] if len(values) == 1 else values

    def string(self) -> str:
        length = self.unpack("<I")
        try:
            return self.take(length).decode("utf-8")
        except UnicodeDecodeError as e:
            raise PersistenceError(f"{self.source}: invalid text field: {e}") from e

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def done(self) -> None:
        if self.offset != len(self.data):
            raise PersistenceError(f"{self.source}: {len(self.data) - self.offset} trailing bytes")


def _string(value: str) -> bytes:
    encoded = value.encode("utf-8")
    return struct.pack("<I", len(encoded)) + encoded


def _floats(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def _read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise PersistenceError(f"cannot read {path}: {e}") from e


def _write_bytes(path: PathLike, payload: bytes) -> Path:
    target = Path(path)
    if not target.parent.exists():
        raise PersistenceError(f"directory does not exist: {target.parent}")
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(payload)
    tmp.replace(target)
    return target


def save_features(path: PathLike, features: AcousticFrameSequence, waveform: Waveform) -> Path:
    """Write features and their frame-aligned waveform"""
    header = FEATURE_MAGIC + struct.pack("<IIIId", FEATURE_VERSION, features.n_frames, features.spectral_dim,
                                         features.coded_ap.shape[1], features.frame_shift_ms)
    body = _floats(features.to_array())
    samples = waveform.samples
    tail = struct.pack("<II", waveform.sample_rate, samples.size) + _floats(samples)
    return _write_bytes(path, header + body + tail)


def load_features(path: PathLike) -> Tuple[AcousticFrameSequence, Waveform]:
    reader = _Reader(_read_bytes(path), str(path))
    if reader.take(4) != FEATURE_MAGIC:
        raise PersistenceError(f"{path} is not a feature file")
    version, frames, mcep_dim, bands, frame_shift = reader.unpack("<IIIId")
    if version != FEATURE_VERSION:
        raise PersistenceError(f"{path}: feature format version {version}, expected {FEATURE_VERSION}")
    channels = mcep_dim + 2 + bands
    data = reader.floats(frames * channels).reshape(frames, channels)
    sample_rate, n_samples = reader.unpack("<II")
    samples = reader.floats(n_samples)
    reader.done()
    return AcousticFrameSequence.from_array(data, mcep_dim, frame_shift), Waveform(samples, sample_rate)


def save_checkpoint(path: PathLike, checkpoint: Checkpoint) -> Path:
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        _string(checkpoint.kind.value),
        _string(yaml.safe_dump(checkpoint.config, sort_keys=True)),
        struct.pack("<Q", checkpoint.step),
    ]
    arrays = []
    for attr, prefix in _ARRAY_PREFIXES.items():
        for name, value in sorted(getattr(checkpoint, attr).items()):
            arrays.append((prefix + name, np.asarray(value, dtype=np.float64)))
    parts.append(struct.pack("<I", len(arrays)))
    for name, value in arrays:
        parts.append(_string(name))
        parts.append(struct.pack(f"<I{value.ndim}I", value.ndim, *value.shape))
        parts.append(_floats(value))
    parts.append(_string(json.dumps(checkpoint.rng_state, sort_keys=True)))
    parts.append(_string(json.dumps(checkpoint.metadata, sort_keys=True)))
    payload = b"".join(parts)
    target = _write_bytes(path, payload + struct.pack("<I", zlib.crc32(payload)))
    logger.debug(f"saved {checkpoint.kind.value} checkpoint at step {checkpoint.step} to {target}")
    return target


def load_checkpoint(path: PathLike, expected_kind: CheckpointKind = None) -> Checkpoint:
    """Parse and verify a whole checkpoint before returning it"""
    data = _read_bytes(path)
    if len(data) < 8 or data[:4] != CHECKPOINT_MAGIC:
        raise PersistenceError(f"{path} is not a checkpoint file")
    payload, trailer = data[:-4], data[-4:]
    if zlib.crc32(payload) != struct.unpack("<I", trailer)[0]:
        raise PersistenceError(f"{path}: checksum mismatch, file is corrupt or truncated")

    reader = _Reader(payload, str(path))
    reader.take(4)
    version = reader.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise PersistenceError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    kind_name = reader.string()
    try:
        kind = CheckpointKind(kind_name)
    except ValueError as e:
        raise PersistenceError(f"{path}: unknown checkpoint kind '{kind_name}'") from e
    if expected_kind is not None and kind != expected_kind:
        raise PersistenceError(f"{path} holds a {kind.value} checkpoint, expected {expected_kind.value}",
                               {"kind": kind.value, "expected": expected_kind.value})
    config = yaml.safe_load(reader.string()) or {}
    step = reader.unpack("<Q")

    groups: Dict[str, Dict[str, np.ndarray]] = {attr: {} for attr in _ARRAY_PREFIXES}
    for _ in range(reader.unpack("<I")):
        name = reader.string()
        ndim = reader.unpack("<I")
        shape = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64))
        value = reader.floats(count).reshape(shape)
        for attr, prefix in _ARRAY_PREFIXES.items():
            if name.startswith(prefix):
                groups[attr][name[len(prefix):]] = value
                break
        else:
            raise PersistenceError(f"{path}: array '{name}' has no known prefix")
    try:
        rng_state = json.loads(reader.string())
        metadata = json.loads(reader.string())
    except json.JSONDecodeError as e:
        raise PersistenceError(f"{path}: invalid JSON field: {e}") from e
    reader.done()

    return Checkpoint(kind=kind, config=config, step=step, rng_state=rng_state, metadata=metadata,
                      version=version, **groups)


def checkpoint_summary(checkpoint: Checkpoint) -> Dict[str, object]:
    """Kind, version, step, config and array shapes, for inspection"""
    return {
        "kind": checkpoint.kind.value,
        "version": checkpoint.version,
        "step": checkpoint.step,
        "config": checkpoint.config,
        "metadata": checkpoint.metadata,
        "arrays": {
            prefix + name: list(value.shape)
            for attr, prefix in _ARRAY_PREFIXES.items()
            for name, value in sorted(getattr(checkpoint, attr).items())
        },
    }
