# filename: parsers/matrix_parser.py
"""
Plain-text matrices and ground-truth bundles.

Text format: a header line `rows cols`, then one line per row with the
entries separated by whitespace. Blank lines and lines starting with '#'
are ignored.
"""
import json
from pathlib import Path
from typing import List

import numpy as np

from kernels.stochastic_matrix import GroundTruth, StochasticMatrix
from logger import get_logger
from state.models import WordDataset
from utils.errors import ConfigError, DataFileError, ShapeMismatchError

logger = get_logger(__name__)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        logger.error(f"Cannot read {path}: {e}")
        raise DataFileError(f"Cannot read file {path}: {e}") from e


def parse_matrix_text(text: str) -> np.ndarray:
    lines: List[str] = [line.strip() for line in text.splitlines()]
    lines = [line for line in lines if line and not line.startswith("#")]
    if not lines:
        raise ValueError("Matrix text is empty")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"Matrix header must be 'rows cols', got '{lines[0]}'")
    try:
        rows, cols = int(header[0]), int(header[1])
        values = [[float(x) for x in line.split()] for line in lines[1:]]
    except ValueError as e:
        raise ValueError(f"Malformed matrix text: {e}") from e
    if len(values) != rows or any(len(row) != cols for row in values):
        raise ShapeMismatchError(f"Header declares {rows} x {cols}, body has "
                                 f"{len(values)} row(s) of lengths {[len(r) for r in values]}")
    return np.array(values, dtype=float).reshape(rows, cols)


def format_matrix_text(matrix: np.ndarray) -> str:
    arr = np.asarray(matrix)
    lines = [f"{arr.shape[0]} {arr.shape[1]}"]
    for row in arr:
        lines.append(" ".join(repr(float(x)) if arr.dtype.kind == "f" else str(x) for x in row))
    return "\n".join(lines) + "\n"


def read_stochastic_matrix(path: str) -> StochasticMatrix:
    return StochasticMatrix.checked(parse_matrix_text(_read_text(path)))


def write_matrix(path: str, matrix: np.ndarray) -> None:
    Path(path).write_text(format_matrix_text(matrix), encoding="utf-8")


def read_dataset(path: str) -> WordDataset:
    """A count table in the matrix text format (symbols as rows, contexts as columns)."""
    counts = parse_matrix_text(_read_text(path))
    if np.any(counts != np.round(counts)):
        raise ValueError(f"Dataset {path} has non-integer counts")
    dataset = WordDataset(counts.astype(np.int64))
    logger.info(f"Dataset loaded from {path}: {dataset.M} x {dataset.N}, n={dataset.n}")
    return dataset


def write_dataset(path: str, dataset: WordDataset) -> None:
    write_matrix(path, dataset.counts)


def load_truth(path: str) -> GroundTruth:
    """GroundTruth from its JSON bundle {A0, B0, doc_dist, delta, seed}; invariants are checked."""
    text = _read_text(path)
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Cannot parse truth file {path}: {e}") from e
    try:
        return GroundTruth.from_dict(payload)
    except (KeyError, ValueError) as e:
        raise ConfigError(f"Invalid truth file {path}: {e}") from e


def save_truth(path: str, truth: GroundTruth) -> None:
    Path(path).write_text(json.dumps(truth.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
