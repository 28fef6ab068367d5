# filename: processors/metropolis_sampler.py
"""Random-walk Metropolis over (A, B) for the matrix-valued Gaussian and Bernoulli SMF models."""
from typing import Optional, Tuple

import numpy as np

from config import (
    GIBBS_BURNIN_FRACTION, MH_ACCEPTANCE_RANGE, MH_PROPOSAL_SCALE, MH_STEPS, MIN_MH_STEPS, RHAT_WARNING,
)
from logger import get_logger
from processors.gibbs_sampler import split_rhat
from state.models import ObservationModel, PosteriorSummary
from utils.errors import ConfigError, ShapeMismatchError

logger = get_logger(__name__)

MAX_REFLECTIONS = 100
BERNOULLI_SUPPORT_DELTA = 1e-3


def reflect_into_simplex(y: np.ndarray) -> np.ndarray:
    """
    Folds free coordinates back into {y >= 0, sum(y) <= 1} along the last axis.

    Alternates the mirror images in the coordinate hyperplanes and in the face
    sum(y) = 1; each fold is an isometry, so a symmetric proposal stays symmetric.
    """
    y = np.array(y, dtype=float, copy=True)
    k = y.shape[-1]
    for _ in range(MAX_REFLECTIONS):
        y = np.abs(y)
        excess = y.sum(axis=-1, keepdims=True) - 1.0
        if np.all(excess <= 0.0):
            return y
        y = np.where(excess > 0.0, y - 2.0 * excess / k, y)
    return np.clip(y, 0.0, None) / np.maximum(1.0, y.sum(axis=-1, keepdims=True))


def _to_columns(free: np.ndarray, support_delta: float) -> np.ndarray:
    """(..., K-1) free coordinates to full simplex columns (..., K) with entries >= support_delta."""
    last = 1.0 - free.sum(axis=-1, keepdims=True)
    x = np.concatenate([free, last], axis=-1)
    K = x.shape[-1]
    if support_delta > 0.0:
        x = support_delta + (1.0 - K * support_delta) * x
    return x


def _factors(a_free: np.ndarray, b_free: np.ndarray, support_delta: float) -> Tuple[np.ndarray, np.ndarray]:
    A = _to_columns(a_free, support_delta).T  # (M, H)
    B = _to_columns(b_free, support_delta).T  # (H, N)
    return A, B


def _log_likelihood(C: np.ndarray, sums: np.ndarray, n: int, model: ObservationModel) -> float:
    if model is ObservationModel.GAUSSIAN:
        return float(np.sum(sums * C) - 0.5 * n * np.sum(C * C))
    if np.any((C <= 0.0) | (C >= 1.0)):
        return -np.inf
    return float(np.sum(sums * np.log(C) + (n - sums) * np.log1p(-C)))


def mh_posterior_smf(datasets: np.ndarray, model: ObservationModel, H: int,
                     steps: int = MH_STEPS,
                     proposal_scale: float = MH_PROPOSAL_SCALE,
                     rng: Optional[np.random.Generator] = None,
                     burnin: Optional[int] = None,
                     support_delta: Optional[float] = None) -> PosteriorSummary:
    """
    Posterior mean of AB under a uniform prior on the product of simplices.

    Args:
        datasets: (n, M, N) stack of observed matrices.
        model: Gaussian (unit noise) or Bernoulli (entrywise coins).
        support_delta: lower bound on every entry of A and B; Bernoulli
            defaults to a small positive margin so AB stays inside (0, 1).

    Returns:
        PosteriorSummary whose predictive is the posterior mean of AB, with
        the acceptance rate and split R-hat of the log-likelihood trace.
    """
    X = np.asarray(datasets, dtype=float)
    if X.ndim != 3 or X.shape[0] < 1:
        raise ShapeMismatchError(f"Need an (n, M, N) stack with n >= 1, got shape {X.shape}")
    if isinstance(H, bool) or not isinstance(H, int) or H < 1:
        raise ConfigError(f"H must be a positive integer, got {H!r}")
    if steps < MIN_MH_STEPS:
        raise ConfigError(f"Metropolis needs at least {MIN_MH_STEPS} steps, got {steps}")
    if proposal_scale <= 0:
        raise ConfigError(f"proposal_scale must be positive, got {proposal_scale}")
    if support_delta is None:
        support_delta = BERNOULLI_SUPPORT_DELTA if model is ObservationModel.BERNOULLI else 0.0
    if rng is None:
        rng = np.random.default_rng()
    if burnin is None:
        burnin = int(steps * GIBBS_BURNIN_FRACTION)
    n, M, N = X.shape
    sums = X.sum(axis=0)

    a_free = rng.dirichlet(np.ones(M), size=H)[:, :-1]          # (H, M-1)
    b_free = rng.dirichlet(np.ones(H), size=N)[:, :-1]          # (N, H-1)
    A, B = _factors(a_free, b_free, support_delta)
    loglik = _log_likelihood(A @ B, sums, n, model)

    accepted = 0
    mean_C = np.zeros((M, N))
    retained = 0
    trace = []
    for step in range(steps):
        a_prop = reflect_into_simplex(a_free + proposal_scale * rng.standard_normal(a_free.shape))
        b_prop = reflect_into_simplex(b_free + proposal_scale * rng.standard_normal(b_free.shape)) \
            if H > 1 else b_free
        A_prop, B_prop = _factors(a_prop, b_prop, support_delta)
        C_prop = A_prop @ B_prop
        loglik_prop = _log_likelihood(C_prop, sums, n, model)
        if np.log(rng.random()) < loglik_prop - loglik:
            a_free, b_free, loglik = a_prop, b_prop, loglik_prop
            A, B = A_prop, B_prop
            accepted += 1
        if step >= burnin:
            mean_C += A @ B
            retained += 1
            trace.append(loglik)

    rate = accepted / steps
    low, high = MH_ACCEPTANCE_RANGE
    if not low <= rate <= high:
        logger.warning(f"Metropolis acceptance rate {rate:.3f} outside [{low}, {high}] "
                       f"(H={H}, n={n}, scale={proposal_scale})")
    rhat = split_rhat(np.array(trace))
    if np.isfinite(rhat) and rhat > RHAT_WARNING:
        logger.warning(f"Metropolis chain for H={H}, n={n} may not have mixed: split R-hat={rhat:.3f}")
    predictive = mean_C / retained
    predictive /= predictive.sum(axis=0, keepdims=True)
    return PosteriorSummary(predictive, retained, {
        "acceptance_rate": rate, "split_rhat": rhat, "support_delta": support_delta,
    })
