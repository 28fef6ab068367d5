# filename: processors/volume_estimator.py
"""
RLCT estimation by sublevel-set volume scaling.

For a nonnegative objective K and a prior sampler, V(t) = Pr[K < t] behaves like
c * t^lambda * (-log t)^(m-1) as t -> 0, where lambda is the RLCT and m the order
of the largest pole of the zeta function. One pool of prior draws is evaluated
once and counted against every threshold; the fit regresses log V(t) on
log t and log(-log t) over the thresholds with enough hits.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from config import (
    VOLUME_BATCH_SIZE, VOLUME_MIN_HITS, VOLUME_MIN_SAMPLES, VOLUME_MIN_USABLE_THRESHOLDS,
    VOLUME_NUM_SAMPLES, VOLUME_R2_WARNING, VOLUME_T_MAX, VOLUME_T_MIN, VOLUME_T_POINTS,
)
from kernels.divergences import kl_bernoulli_batch, kl_topic_batch, sq_error_batch
from kernels.stochastic_matrix import GroundTruth, random_stochastic_batch
from logger import get_logger
from state.models import ModelDims
from utils.errors import ConfigError, InsufficientResolutionError, NumericalGuardError, ShapeMismatchError
from utils.rng import spawn_generators

logger = get_logger(__name__)

Sampler = Callable[[np.random.Generator, int], Any]
Objective = Callable[[Any], np.ndarray]


def default_t_grid() -> np.ndarray:
    return np.geomspace(VOLUME_T_MAX, VOLUME_T_MIN, VOLUME_T_POINTS)


@dataclass
class VolumeScalingConfig:
    num_samples: int = VOLUME_NUM_SAMPLES
    t_grid: np.ndarray = field(default_factory=default_t_grid)
    include_log_term: bool = True
    seed: int = 0
    workers: int = 1
    min_hits: int = VOLUME_MIN_HITS
    batch_size: int = VOLUME_BATCH_SIZE

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.t_grid.ndim != 1 or self.t_grid.size < 2:
            raise ConfigError("t_grid needs at least two thresholds")
        if np.any(self.t_grid <= 0) or np.any(np.diff(self.t_grid) >= 0):
            raise ConfigError("t_grid must be positive and strictly decreasing toward 0")
        if self.t_grid[0] >= 1.0 and self.include_log_term:
            raise ConfigError("Thresholds must stay below 1 when the log(-log t) term is fitted")
        if self.num_samples < VOLUME_MIN_SAMPLES:
            raise ConfigError(f"num_samples must be >= {VOLUME_MIN_SAMPLES}, got {self.num_samples}")
        if self.workers < 1 or self.batch_size < 1 or self.min_hits < 1:
            raise ConfigError("workers, batch_size and min_hits must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "num_samples": self.num_samples,
            "t_grid": [float(t) for t in self.t_grid],
            "include_log_term": self.include_log_term,
            "seed": self.seed,
            "workers": self.workers,
            "min_hits": self.min_hits,
            "batch_size": self.batch_size,
        }


@dataclass
class RlctEstimate:
    lambda_hat: float
    multiplicity_hat: float
    stderr_lambda: float
    r_squared: float
    counts: List[int]
    t_grid: List[float]
    usable: List[bool]
    seed: int
    num_samples: int
    include_log_term: bool = True
    low_fit: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_hat": self.lambda_hat,
            "multiplicity_hat": self.multiplicity_hat,
            "stderr": self.stderr_lambda,
            "r_squared": self.r_squared,
            "t_grid": self.t_grid,
            "counts": self.counts,
            "usable": self.usable,
            "seed": self.seed,
            "num_samples": self.num_samples,
            "include_log_term": self.include_log_term,
            "low_fit": self.low_fit,
        }


@dataclass
class EquivalenceReport:
    lambda_F: float
    lambda_G: float
    stderr_F: float
    stderr_G: float
    consistent: bool
    estimate_F: RlctEstimate
    estimate_G: RlctEstimate


def _split_budget(total: int, workers: int) -> List[int]:
    base, extra = divmod(total, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def _count_worker(objectives: Sequence[Objective], sampler: Sampler, rng: np.random.Generator,
                  budget: int, t_grid: np.ndarray, batch_size: int) -> np.ndarray:
    counts = np.zeros((len(objectives), t_grid.size), dtype=np.int64)
    remaining = budget
    while remaining > 0:
        size = min(batch_size, remaining)
        params = sampler(rng, size)
        for row, objective in enumerate(objectives):
            values = np.asarray(objective(params), dtype=float)
            if values.shape != (size,):
                raise ShapeMismatchError(f"Objective returned shape {values.shape}, expected ({size},)")
            if np.any(values < 0):
                raise ValueError("Objective must be nonnegative on the sampled domain")
            finite = np.sort(values[np.isfinite(values)])
            counts[row] += np.searchsorted(finite, t_grid, side="left")
        remaining -= size
    return counts


def count_hits(objectives: Sequence[Objective], sampler: Sampler, config: VolumeScalingConfig) -> np.ndarray:
    """
    Hit counts #{K(theta) < t} per objective and threshold over one shared sample pool.

    Worker w draws with the w-th child of SeedSequence(config.seed) and gets an
    equal share of num_samples (the first num_samples % workers workers take one
    extra draw). Integer counts are summed, so the result depends only on
    (seed, workers).
    """
    budgets = _split_budget(config.num_samples, config.workers)
    rngs = spawn_generators(config.seed, config.workers)
    if config.workers == 1:
        return _count_worker(objectives, sampler, rngs[0], budgets[0], config.t_grid, config.batch_size)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = [
            pool.submit(_count_worker, objectives, sampler, rng, budget, config.t_grid, config.batch_size)
            for rng, budget in zip(rngs, budgets)
        ]
        return sum(f.result() for f in futures)


def fit_volume_curve(counts: np.ndarray, config: VolumeScalingConfig) -> RlctEstimate:
    """Least-squares fit of log V(t) = log c + lambda log t + (m-1) log(-log t)."""
    counts = np.asarray(counts, dtype=np.int64)
    t = config.t_grid
    usable = counts >= config.min_hits
    k = int(usable.sum())
    n_params = 3 if config.include_log_term else 2
    if k < max(VOLUME_MIN_USABLE_THRESHOLDS, n_params + 1):
        raise InsufficientResolutionError(
            f"Only {k} thresholds reach {config.min_hits} hits (counts={counts.tolist()}); "
            f"raise num_samples or move t_grid up"
        )
    log_t = np.log(t[usable])
    columns = [np.ones(k), log_t]
    if config.include_log_term:
        columns.append(np.log(-log_t))
    X = np.column_stack(columns)
    y = np.log(counts[usable] / config.num_samples)
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    dof = k - n_params
    sigma2 = rss / dof if dof > 0 else 0.0
    cov = sigma2 * np.linalg.pinv(X.T @ X)
    lambda_hat = float(coef[1])
    stderr = float(math.sqrt(max(cov[1, 1], 0.0)))
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    multiplicity = 1.0 + float(coef[2]) if config.include_log_term else 1.0
    if multiplicity < 1.0:
        logger.debug(f"Volume fit: multiplicity {multiplicity:.3f} < 1 clipped to 1")
        multiplicity = 1.0
    if lambda_hat <= 0:
        raise NumericalGuardError(f"Volume fit produced a nonpositive slope {lambda_hat:.4f}")
    low_fit = r_squared < VOLUME_R2_WARNING
    if low_fit:
        logger.warning(f"Volume fit: r^2={r_squared:.4f} below {VOLUME_R2_WARNING}; the leading pole may not dominate")
    return RlctEstimate(
        lambda_hat=lambda_hat,
        multiplicity_hat=multiplicity,
        stderr_lambda=stderr,
        r_squared=float(r_squared),
        counts=[int(c) for c in counts],
        t_grid=[float(x) for x in t],
        usable=[bool(u) for u in usable],
        seed=config.seed,
        num_samples=config.num_samples,
        include_log_term=config.include_log_term,
        low_fit=low_fit,
    )


def estimate_rlct_volume(objective: Objective, sampler: Sampler, config: VolumeScalingConfig) -> RlctEstimate:
    logger.info(f"Volume: {config.num_samples} draws over {config.t_grid.size} thresholds "
                f"(seed={config.seed}, workers={config.workers})")
    counts = count_hits([objective], sampler, config)[0]
    estimate = fit_volume_curve(counts, config)
    logger.info(f"Volume: lambda_hat={estimate.lambda_hat:.4f} +/- {estimate.stderr_lambda:.4f}, "
                f"m_hat={estimate.multiplicity_hat:.2f}, r^2={estimate.r_squared:.4f}")
    return estimate


def box_sampler(dim: int, low: float = -1.0, high: float = 1.0) -> Sampler:
    """Uniform prior on [low, high]^dim; draws are (size, dim) arrays."""
    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(low, high, size=(size, dim))
    return sample


def tent_box_sampler(dim: int, low: float = -1.0, high: float = 1.0) -> Sampler:
    """Equal mixture of the uniform and the symmetric triangular density: bounded and strictly positive."""
    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        uniform = rng.uniform(low, high, size=(size, dim))
        tent = rng.triangular(low, 0.5 * (low + high), high, size=(size, dim))
        pick = rng.random((size, dim)) < 0.5
        return np.where(pick, uniform, tent)
    return sample


def smf_prior_sampler(dims: ModelDims, delta: float = 0.0) -> Sampler:
    """Independent uniform columns for A (M x H) and B (H x N); draws are (A_batch, B_batch) tuples."""
    def sample(rng: np.random.Generator, size: int):
        A = random_stochastic_batch(dims.M, dims.H, delta, rng, size)
        B = random_stochastic_batch(dims.H, dims.N, delta, rng, size)
        return A, B
    return sample


SMF_OBJECTIVES = {
    "sq_error": sq_error_batch,
    "kl_topic": kl_topic_batch,
    "kl_bernoulli": kl_bernoulli_batch,
}


def smf_objective(name: str, truth: GroundTruth) -> Objective:
    try:
        kernel = SMF_OBJECTIVES[name]
    except KeyError:
        raise ConfigError(f"Unknown SMF objective '{name}'; choose from {sorted(SMF_OBJECTIVES)}") from None
    return lambda params: kernel(params[0], params[1], truth)


def estimate_rlct_smf(dims: ModelDims, truth: GroundTruth, config: VolumeScalingConfig,
                      objective: str = "sq_error") -> RlctEstimate:
    if (truth.M, truth.N, truth.H0) != (dims.M, dims.N, dims.H0):
        raise ConfigError(f"Truth is {truth.M} x {truth.N} with H0={truth.H0}, dims are {dims.label()}")
    logger.info(f"Volume: estimating RLCT of {objective} for {dims.label()}")
    return estimate_rlct_volume(smf_objective(objective, truth), smf_prior_sampler(dims), config)


def rlct_equivalence_check(objective_F: Objective, objective_G: Objective, sampler: Sampler,
                           config: VolumeScalingConfig) -> EquivalenceReport:
    """Estimates both RLCTs on one sample pool; consistent iff |lF - lG| <= 2 (seF + seG)."""
    counts = count_hits([objective_F, objective_G], sampler, config)
    est_F = fit_volume_curve(counts[0], config)
    est_G = fit_volume_curve(counts[1], config)
    tolerance = 2.0 * (est_F.stderr_lambda + est_G.stderr_lambda)
    consistent = abs(est_F.lambda_hat - est_G.lambda_hat) <= tolerance
    logger.info(f"Volume: equivalence lambda_F={est_F.lambda_hat:.4f}, lambda_G={est_G.lambda_hat:.4f}, "
                f"tolerance={tolerance:.4f} -> {'consistent' if consistent else 'inconsistent'}")
    return EquivalenceReport(
        lambda_F=est_F.lambda_hat, lambda_G=est_G.lambda_hat,
        stderr_F=est_F.stderr_lambda, stderr_G=est_G.stderr_lambda,
        consistent=consistent, estimate_F=est_F, estimate_G=est_G,
    )
