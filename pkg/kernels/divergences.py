# filename: kernels/divergences.py
"""
Objective kernels on (A, B): the squared error Phi and the Kullback-Leibler
divergences of the topic, Gaussian, Bernoulli and Markov-chain models.

Scalar kernels take StochasticMatrix arguments; the *_batch variants take
stacks of shape (S, M, H) and (S, H, N) and are what the Monte-Carlo
estimator calls. A divergent KL (zero model mass on a supported outcome) is
returned as math.inf rather than raised.
"""
import math
from typing import Tuple

import numpy as np

from kernels.stochastic_matrix import GroundTruth, StochasticMatrix
from logger import get_logger
from utils.errors import DivergenceError, ShapeMismatchError

logger = get_logger(__name__)


def is_divergent(value: float) -> bool:
    return math.isinf(value)


def _check_shapes(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth) -> None:
    if A.cols != B.rows:
        raise ShapeMismatchError(f"A {A.shape} and B {B.shape} do not chain")
    if A.rows != truth.M or B.cols != truth.N:
        raise ShapeMismatchError(f"AB would be {A.rows} x {B.cols}, truth is {truth.M} x {truth.N}")


def _check_batch(A: np.ndarray, B: np.ndarray, truth: GroundTruth) -> None:
    if A.ndim != 3 or B.ndim != 3 or A.shape[0] != B.shape[0] or A.shape[2] != B.shape[1]:
        raise ShapeMismatchError(f"Batch shapes {A.shape} and {B.shape} do not chain")
    if A.shape[1] != truth.M or B.shape[2] != truth.N:
        raise ShapeMismatchError(f"Batch products are {A.shape[1]} x {B.shape[2]}, truth is {truth.M} x {truth.N}")


def sq_error(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth) -> float:
    """Phi(A, B) = ||AB - A0 B0||^2 (squared Frobenius norm)."""
    _check_shapes(A, B, truth)
    diff = A.entries @ B.entries - truth.product_matrix
    return float(np.sum(diff * diff))


def sq_error_batch(A: np.ndarray, B: np.ndarray, truth: GroundTruth) -> np.ndarray:
    _check_batch(A, B, truth)
    diff = np.matmul(A, B) - truth.product_matrix
    return np.einsum("sij,sij->s", diff, diff)


def kl_columns(C0: np.ndarray, C: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_j w_j sum_i C0_ij log(C0_ij / C_ij) over the trailing two axes; inf where divergent."""
    support = C0 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = np.where(support, np.log(np.where(support, C0, 1.0)) - np.log(C), 0.0)
        terms = np.where(support, C0 * log_ratio, 0.0)
    per_column = terms.sum(axis=-2)
    value = per_column @ weights
    divergent = np.any(support & (C <= 0), axis=(-2, -1))
    return np.where(divergent, np.inf, np.maximum(value, 0.0))


def kl_topic(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth, strict: bool = False) -> float:
    """
    KL(A, B) = sum_j q'(j) sum_i (A0B0)_ij log[(A0B0)_ij / (AB)_ij].

    A divergent value is +inf, or DivergenceError when strict is set.
    """
    _check_shapes(A, B, truth)
    value = float(kl_columns(truth.product_matrix, A.entries @ B.entries, truth.doc_dist))
    if is_divergent(value):
        if strict:
            raise DivergenceError("KL topic: model puts zero mass on an outcome the truth supports")
        logger.warning("KL topic: model puts zero mass on a supported outcome; reporting +inf")
    return value


def kl_topic_batch(A: np.ndarray, B: np.ndarray, truth: GroundTruth) -> np.ndarray:
    _check_batch(A, B, truth)
    return kl_columns(truth.product_matrix, np.matmul(A, B), truth.doc_dist)


def kl_gaussian_smf(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth) -> float:
    """Unit-variance Gaussian observation of the whole matrix: KL = Phi / 2."""
    return 0.5 * sq_error(A, B, truth)


def kl_bernoulli_pointwise(a: float, b: float) -> float:
    """a(log a - log b) + (1 - a)(log(1 - a) - log(1 - b)) for true mean a and model mean b."""
    if not (0.0 < a < 1.0) or not (0.0 < b < 1.0):
        raise ValueError(f"Bernoulli means must lie in (0, 1), got a={a}, b={b}")
    value = a * (math.log(a) - math.log(b)) + (1.0 - a) * (math.log1p(-a) - math.log1p(-b))
    return max(value, 0.0)


def bernoulli_kl_cells(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        value = a * (np.log(a) - np.log(b)) + (1.0 - a) * (np.log1p(-a) - np.log1p(-b))
    return np.maximum(value, 0.0)


def kl_bernoulli_matrix(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth) -> float:
    """Entrywise Bernoulli KL between means A0B0 and AB, summed over the M x N cells."""
    _check_shapes(A, B, truth)
    C0, C = truth.product_matrix, A.entries @ B.entries
    for name, arr in (("A0B0", C0), ("AB", C)):
        bad = np.argwhere((arr <= 0.0) | (arr >= 1.0))
        if bad.size:
            i, j = map(int, bad[0])
            raise ValueError(f"{name} entry ({i}, {j}) = {arr[i, j]!r} is not a Bernoulli mean in (0, 1)")
    return float(bernoulli_kl_cells(C0, C).sum())


def kl_bernoulli_batch(A: np.ndarray, B: np.ndarray, truth: GroundTruth) -> np.ndarray:
    """Batch Bernoulli KL; samples whose AB touches {0, 1} come back as +inf."""
    _check_batch(A, B, truth)
    C = np.matmul(A, B)
    boundary = np.any((C <= 0.0) | (C >= 1.0), axis=(1, 2))
    values = bernoulli_kl_cells(truth.product_matrix, np.clip(C, 1e-300, 1.0 - 1e-16)).sum(axis=(1, 2))
    return np.where(boundary, np.inf, values)


def _check_moment(X_moment: np.ndarray, N: int) -> np.ndarray:
    X = np.asarray(X_moment, dtype=float)
    if X.shape != (N, N):
        raise ShapeMismatchError(f"Second-moment matrix must be {N} x {N}, got {X.shape}")
    if not np.allclose(X, X.T, rtol=0.0, atol=1e-12):
        raise ValueError("Second-moment matrix must be symmetric")
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"Second-moment matrix is not positive definite: {e}") from e
    return X


def kl_markov(A: StochasticMatrix, B: StochasticMatrix, truth: GroundTruth, X_moment: np.ndarray) -> float:
    """(1/2) trace(D X D^T) with D = AB - A0B0: the KL of y = Cx + noise averaged over inputs x."""
    _check_shapes(A, B, truth)
    X = _check_moment(X_moment, truth.N)
    D = A.entries @ B.entries - truth.product_matrix
    return max(0.5 * float(np.trace(D @ X @ D.T)), 0.0)


def markov_sandwich_constants(X_moment: np.ndarray) -> Tuple[float, float]:
    """(c1, c2) = half the extreme eigenvalues of X: c1 * Phi <= kl_markov <= c2 * Phi."""
    X = _check_moment(X_moment, np.asarray(X_moment).shape[0])
    eig = np.linalg.eigvalsh(X)
    return 0.5 * float(eig[0]), 0.5 * float(eig[-1])


def markov_moment(inputs: np.ndarray) -> np.ndarray:
    """Empirical second moment (1/n) sum_l x_l x_l^T of an (n, N) input sample."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ShapeMismatchError(f"Inputs must be a non-empty (n, N) array, got {x.shape}")
    moment = x.T @ x / x.shape[0]
    return 0.5 * (moment + moment.T)


def sandwich_constants(kl_values: np.ndarray, phi_values: np.ndarray) -> Tuple[float, float]:
    """Smallest and largest finite ratio KL / Phi over points with Phi > 0."""
    kl = np.asarray(kl_values, dtype=float)
    phi = np.asarray(phi_values, dtype=float)
    mask = (phi > 0) & np.isfinite(kl)
    if not np.any(mask):
        raise ValueError("No point with Phi > 0 and finite KL to fit sandwich constants on")
    ratios = kl[mask] / phi[mask]
    return float(ratios.min()), float(ratios.max())
