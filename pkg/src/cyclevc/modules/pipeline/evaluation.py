"""
Objective evaluation - DTW-aligned mel-cepstral distortion, log-F0 RMSE and
U/V error rate between converted and reference utterances
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ...config import FeatureConfig
from ...error_handling import DataError, ShapeError
from ..dsp import AcousticFrameSequence, analyze_waveform, mcd, read_wav
from .audit_trail import IAuditTrail, NullAuditTrail
from .domain_entities import AccessPurpose, Split

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["pair", "converted", "reference", "frames", "mcd", "f0_rmse", "uv_error"]

PathLike = Union[str, Path]


@dataclass
class PairMetrics:
    frames: int
    mcd: float
    f0_rmse: float
    uv_error: float


def dtw_align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Warping path [K, 2] between mel-cepstral sequences a [N, D] and b [M, D].

    Local cost is the squared Euclidean distance over coefficients 1..;
    symmetric steps (diagonal weighted twice), diagonal preferred on ties.
    The path starts at (0, 0), ends at (N-1, M-1) and never moves backwards.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"cannot align {a.shape} with {b.shape}")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ShapeError("cannot align an empty sequence")
    diff = a[:, None, 1:] - b[None, :, 1:]
    cost = np.sum(diff * diff, axis=2)
    n, m = cost.shape

    acc = np.full((n, m), np.inf)
    # 0 diagonal, 1 from (i-1, j), 2 from (i, j-1)
    move = np.zeros((n, m), dtype=np.int8)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
        move[0, j] = 2
    for i in range(1, n):
        diagonal = np.full(m, np.inf)
        diagonal[1:] = acc[i - 1, :-1] + 2.0 * cost[i, 1:]
        vertical = acc[i - 1] + cost[i]
        row = np.where(diagonal <= vertical, diagonal, vertical)
        row_move = np.where(diagonal <= vertical, 0, 1).astype(np.int8)
        for j in range(m):
            if j > 0 and row[j - 1] + cost[i, j] < row[j]:
                row[j] = row[j - 1] + cost[i, j]
                row_move[j] = 2
        acc[i] = row
        move[i] = row_move

    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        step = move[i, j]
        if step == 0:
            i, j = i - 1, j - 1
        elif step == 1:
            i -= 1
        else:
            j -= 1
        path.append((i, j))
    return np.array(path[::-1], dtype=np.int64)


def evaluate_pair(converted: AcousticFrameSequence, reference: AcousticFrameSequence) -> PairMetrics:
    """Metrics over the DTW path; F0 RMSE uses frames voiced in both, NaN when there are none"""
    path = dtw_align(converted.mcep, reference.mcep)
    ci, ri = path[:, 0], path[:, 1]
    distortion = float(np.mean(mcd(converted.mcep[ci], reference.mcep[ri])))
    cuv, ruv = converted.uv[ci] > 0.5, reference.uv[ri] > 0.5
    both = cuv & ruv
    if np.any(both):
        error = converted.log_f0[ci][both] - reference.log_f0[ri][both]
        f0_rmse = float(np.sqrt(np.mean(error * error)))
    else:
        f0_rmse = float("nan")
    return PairMetrics(frames=int(path.shape[0]), mcd=distortion, f0_rmse=f0_rmse,
                       uv_error=float(np.mean(cuv != ruv)))


def read_pairs(path: PathLike) -> List[Tuple[Path, Path]]:
    """Whitespace-separated ``converted reference`` lines; relative paths resolve against the file"""
    pair_file = Path(path)
    if not pair_file.exists():
        raise DataError(f"pairing list not found: {path}")
    pairs = []
    for number, line in enumerate(pair_file.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise DataError(f"{path}:{number}: expected two paths, got {len(fields)} fields")
        pairs.append(tuple(p if Path(p).is_absolute() else pair_file.parent / p for p in map(Path, fields)))
    return pairs


def evaluate(pairs: Sequence[Tuple[PathLike, PathLike]], config: FeatureConfig, out_csv: Optional[PathLike] = None,
             f0_min: Optional[float] = None, f0_max: Optional[float] = None, max_workers: int = 1,
             audit: Optional[IAuditTrail] = None) -> pd.DataFrame:
    """Per-pair metrics plus a final ``mean`` row, in pairing order"""
    if not pairs:
        raise DataError("empty pairing list")
    audit = audit or NullAuditTrail()

    def analyze(path: PathLike) -> AcousticFrameSequence:
        wave = read_wav(path, expected_rate=config.sample_rate)
        return analyze_waveform(wave, config, f0_min=f0_min, f0_max=f0_max).features

    def score(pair: Tuple[PathLike, PathLike]) -> PairMetrics:
        return evaluate_pair(analyze(pair[0]), analyze(pair[1]))

    for converted, reference in pairs:
        audit.log_access(str(reference), "", Split.VALIDATION, AccessPurpose.EVALUATE)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(score, pairs))
    else:
        results = [score(pair) for pair in pairs]

    rows = [{"pair": n, "converted": str(c), "reference": str(r), **asdict(metrics)}
            for n, ((c, r), metrics) in enumerate(zip(pairs, results))]
    frame = pd.DataFrame(rows, columns=METRIC_COLUMNS)
    means = {"pair": "mean", "converted": "", "reference": "", "frames": int(frame["frames"].sum())}
    for column in ("mcd", "f0_rmse", "uv_error"):
        means[column] = float(frame[column].mean())
    frame = pd.concat([frame, pd.DataFrame([means], columns=METRIC_COLUMNS)], ignore_index=True)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_csv, index=False)
    logger.info(f"evaluated {len(results)} pairs: MCD {means['mcd']:.3f} dB, "
                f"log-F0 RMSE {means['f0_rmse']:.4f}, U/V error {means['uv_error']:.3f}")
    return frame
