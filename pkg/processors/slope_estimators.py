# filename: processors/slope_estimators.py
"""RLCT estimates from free-energy curves and from replicated generalization errors."""
import math
from typing import Sequence, Tuple

import numpy as np
from scipy import stats

from config import CI_Z, MIN_REPLICATES
from logger import get_logger

logger = get_logger(__name__)


def estimate_rlct_free_energy(pairs: Sequence[Tuple[float, float]]) -> Tuple[float, float, float]:
    """
    Slope of F_n - n S_n against log n.

    Args:
        pairs: (n, F_n - n*S_n) values; several replicates may share an n.

    Returns:
        (lambda_hat, intercept, stderr of the slope)
    """
    if not pairs:
        raise ValueError("No (n, F_n - n S_n) pairs supplied")
    n = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.any(n < 1) or not np.all(np.isfinite(y)):
        raise ValueError("Sample sizes must be >= 1 and free-energy differences finite")
    distinct = np.unique(n)
    if distinct.size < 2:
        raise ValueError("Degenerate design: all sample sizes are equal")
    if distinct.size < 4:
        raise ValueError(f"Need at least 4 distinct sample sizes, got {distinct.size}")
    if distinct[-1] / distinct[0] < 100.0:
        raise ValueError(f"Sample sizes must span two decades, got {distinct[0]:g}..{distinct[-1]:g}")
    fit = stats.linregress(np.log(n), y)
    logger.info(f"Free energy: slope={fit.slope:.4f} +/- {fit.stderr:.4f} over {distinct.size} sample sizes")
    return float(fit.slope), float(fit.intercept), float(fit.stderr)


def estimate_rlct_gen_error(g_values: Sequence[float], n: int,
                            min_replicates: int = MIN_REPLICATES) -> Tuple[float, float]:
    """n * mean(G_n) with a normal-approximation 95% confidence half-width."""
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"Sample size n must be a positive integer, got {n!r}")
    g = np.asarray(list(g_values), dtype=float)
    if g.size == 0:
        raise ValueError("No generalization errors supplied")
    if g.size < min_replicates:
        raise ValueError(f"Need at least {min_replicates} replicates, got {g.size}")
    if not np.all(np.isfinite(g)):
        raise ValueError("Generalization errors must be finite; filter divergent replicates first")
    lambda_hat = n * float(g.mean())
    sem = float(stats.sem(g)) if g.size > 1 else 0.0
    halfwidth = CI_Z * n * (0.0 if math.isnan(sem) else sem)
    logger.info(f"Gen error: n*mean(G_n)={lambda_hat:.4f} +/- {halfwidth:.4f} from {g.size} replicates")
    return lambda_hat, halfwidth
