# filename: parsers/grid_parser.py
import re
from dataclasses import dataclass
from typing import Dict, List, Sequence

from logger import get_logger
from utils.errors import ConfigError

logger = get_logger(__name__)

RANGE_REGEX = re.compile(r"^(M|N|H0|H)=(\d+)(?:\.\.(\d+))?$")
H_FROM_H0_REGEX = re.compile(r"^H=H0\.\.(\d+)$")


@dataclass(frozen=True)
class GridSpec:
    M_values: List[int]
    N_values: List[int]
    H0_values: List[int]
    H_max: int


def _expand(name: str, low: int, high: int) -> List[int]:
    if high < low:
        raise ConfigError(f"Empty range for {name}: {low}..{high}")
    return list(range(low, high + 1))


def parse_grid(tokens: Sequence[str]) -> GridSpec:
    """
    Parses grid tokens such as `M=2..4 N=2..4 H0=1..2 H=H0..3`.

    Each of M, N and H0 is a single value or an inclusive range. H is given
    as `H=H0..K` (or `H=K`) and always starts at the row's H0.
    """
    ranges: Dict[str, List[int]] = {}
    H_max = None
    for token in tokens:
        token = token.strip()
        h_match = H_FROM_H0_REGEX.match(token)
        if h_match:
            H_max = int(h_match.group(1))
            continue
        match = RANGE_REGEX.match(token)
        if not match:
            raise ConfigError(f"Cannot parse grid token '{token}'; expected NAME=LOW..HIGH")
        name, low, high = match.group(1), int(match.group(2)), match.group(3)
        if name == "H":
            if high is not None:
                raise ConfigError(f"H must be written H=H0..{high} or H={low}, got '{token}'")
            H_max = low
            continue
        if name in ranges:
            raise ConfigError(f"Grid dimension {name} given twice")
        ranges[name] = _expand(name, low, int(high) if high is not None else low)

    missing = [name for name in ("M", "N", "H0") if name not in ranges]
    if missing:
        raise ConfigError(f"Grid is missing {', '.join(missing)}")
    if H_max is None:
        H_max = max(ranges["H0"])
    logger.debug(f"Grid: M={ranges['M']}, N={ranges['N']}, H0={ranges['H0']}, H up to {H_max}")
    return GridSpec(ranges["M"], ranges["N"], ranges["H0"], H_max)
