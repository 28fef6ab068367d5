# filename: utils/result_writer.py
"""
Deterministic result files: JSON with sorted keys and normalized values, CSV
with '.' decimals and rationals as "p/q". Nothing written here carries a
timestamp; run times go to the ledger.
"""
import csv
import json
import math
import os
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, List, Sequence

import numpy as np

from logger import get_logger

logger = get_logger(__name__)


def _ensure_dir_exists(dir_path: str):
    if dir_path and not os.path.exists(dir_path):
        try:
            os.makedirs(dir_path, exist_ok=True)
            logger.debug(f"Created directory: {dir_path}")
        except OSError as e:
            logger.error(f"Could not create directory '{dir_path}': {e}")
            raise


def fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def float_str(value: float) -> str:
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; Fractions become "p/q", non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else float_str(value)
    return value


def dumps(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str, payload: Any) -> str:
    _ensure_dir_exists(os.path.dirname(path))
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps(payload))
    os.replace(tmp_path, path)
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Fraction):
        return fraction_str(value)
    if isinstance(value, (float, np.floating)):
        return float_str(float(value))
    if isinstance(value, Enum):
        return str(value.value)
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    _ensure_dir_exists(os.path.dirname(path))
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path


def write_dat(path: str, header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Whitespace-separated columns with a '#' header line, for gnuplot-style plotting."""
    _ensure_dir_exists(os.path.dirname(path))
    lines: List[str] = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join(_cell(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug(f"Wrote {path}")
    return path
