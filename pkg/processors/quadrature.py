# filename: processors/quadrature.py
"""
Deterministic Bayes free energy F_n = -log Z_n of the topic model.

The parameter (A, B) is mapped from the unit cube by stick-breaking every
column, and Z_n is integrated with a tensor Gauss-Legendre rule whose depth is
doubled until F_n stabilizes. Only small parameter dimensions are feasible.
"""
from typing import Any, Dict, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp, roots_legendre

from bounds.rlct_bounds import param_dim
from config import (
    PRIOR_ALPHA, PRIOR_BETA, QUADRATURE_CHUNK, QUADRATURE_MAX_DIM, QUADRATURE_MAX_NODES,
    QUADRATURE_MIN_DEPTH, QUADRATURE_REL_TOL,
)
from logger import get_logger
from state.models import ModelDims, WordDataset
from utils.errors import ConfigError, NumericalGuardError

logger = get_logger(__name__)


def dirichlet_multinomial_free_energy(dataset: WordDataset, beta: float = PRIOR_BETA) -> float:
    """Closed-form F_n for H = 1: the pooled counts are Dirichlet-multinomial."""
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    c = dataset.word_totals.astype(float)
    M, n = dataset.M, dataset.n
    log_z = gammaln(M * beta) - gammaln(n + M * beta) + float(np.sum(gammaln(c + beta) - gammaln(beta)))
    return float(-log_z)


def _stick_break(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(..., K-1) cube points to (..., K) simplex points and the log-Jacobian of the map."""
    shape = u.shape[:-1]
    K = u.shape[-1] + 1
    x = np.empty(shape + (K,))
    remaining = np.ones(shape)
    log_jac = np.zeros(shape)
    for k in range(K - 1):
        log_jac += np.log(remaining)
        x[..., k] = remaining * u[..., k]
        remaining = remaining * (1.0 - u[..., k])
    x[..., K - 1] = remaining
    return x, log_jac


def _log_dirichlet(x: np.ndarray, conc: float) -> np.ndarray:
    K = x.shape[-1]
    norm = gammaln(K * conc) - K * gammaln(conc)
    if conc == 1.0:
        return np.full(x.shape[:-1], norm)
    return norm + (conc - 1.0) * np.sum(np.log(x), axis=-1)


def _log_integrand(points: np.ndarray, counts: np.ndarray, H: int, alpha: float, beta: float) -> np.ndarray:
    """log[prior(A, B) * likelihood * Jacobian] at (S, d) cube points."""
    M, N = counts.shape
    S = points.shape[0]
    a_dim = H * (M - 1)
    A_cols, jac_a = _stick_break(points[:, :a_dim].reshape(S, H, M - 1))      # (S, H, M)
    B_cols, jac_b = _stick_break(points[:, a_dim:].reshape(S, N, H - 1))      # (S, N, H)
    C = np.einsum("shm,snh->smn", A_cols, B_cols)
    with np.errstate(divide="ignore"):
        loglik = np.einsum("mn,smn->s", counts, np.log(C))
    log_prior = _log_dirichlet(A_cols, beta).sum(axis=1) + _log_dirichlet(B_cols, alpha).sum(axis=1)
    return loglik + log_prior + jac_a.sum(axis=1) + jac_b.sum(axis=1)


def _log_evidence(counts: np.ndarray, H: int, dim: int, depth: int, alpha: float, beta: float) -> float:
    nodes, weights = roots_legendre(depth)
    nodes = 0.5 * (nodes + 1.0)
    log_w = np.log(0.5 * weights)
    total = depth ** dim
    partial = []
    for start in range(0, total, QUADRATURE_CHUNK):
        flat = np.arange(start, min(start + QUADRATURE_CHUNK, total))
        idx = np.stack(np.unravel_index(flat, (depth,) * dim), axis=1)
        values = _log_integrand(nodes[idx], counts, H, alpha, beta) + log_w[idx].sum(axis=1)
        partial.append(logsumexp(values))
    return float(logsumexp(partial))


def marginal_likelihood_exact(dataset: WordDataset, H: int, alpha: float = PRIOR_ALPHA,
                              beta: float = PRIOR_BETA,
                              depth: int = QUADRATURE_MIN_DEPTH,
                              rel_tol: float = QUADRATURE_REL_TOL,
                              max_nodes: int = QUADRATURE_MAX_NODES) -> Tuple[float, Dict[str, Any]]:
    """
    F_n = -log integral prod_{ij} (AB)_ij^{c_ij} dprior(A, B).

    Returns:
        (F_n, diagnostics) with the final depth, node count and last relative change.

    Raises:
        ConfigError: bad H or a starting depth below QUADRATURE_MIN_DEPTH.
        NumericalGuardError: parameter dimension above the quadrature limit.
        Exhausting the node budget is not an error; diagnostics["converged"] is False.
    """
    if isinstance(H, bool) or not isinstance(H, int) or H < 1:
        raise ConfigError(f"H must be a positive integer, got {H!r}")
    if isinstance(depth, bool) or not isinstance(depth, int) or depth < QUADRATURE_MIN_DEPTH:
        raise ConfigError(f"Starting quadrature depth must be an integer >= {QUADRATURE_MIN_DEPTH}, got {depth!r}")
    M, N = dataset.M, dataset.N
    if H == 1:
        value = 0.0 if dataset.n == 0 else dirichlet_multinomial_free_energy(dataset, beta)
        return value, {"depth": 0, "nodes": 0, "rel_change": 0.0, "converged": True, "closed_form": True}
    dim = param_dim(ModelDims(M, N, H, 1))
    if dim > QUADRATURE_MAX_DIM:
        raise NumericalGuardError(f"Quadrature needs d <= {QUADRATURE_MAX_DIM}, got d={dim} for M={M}, N={N}, H={H}")
    if dataset.n == 0:
        return 0.0, {"depth": 0, "nodes": 0, "rel_change": 0.0, "converged": True}

    counts = dataset.counts.astype(float)
    previous = -_log_evidence(counts, H, dim, depth, alpha, beta)
    change = float("inf")
    while (2 * depth) ** dim <= max_nodes:
        depth *= 2
        current = -_log_evidence(counts, H, dim, depth, alpha, beta)
        change = abs(current - previous) / max(1.0, abs(current))
        logger.debug(f"Quadrature depth {depth}: F_n={current:.8f}, rel change {change:.2e}")
        previous = current
        if change < rel_tol:
            break
    converged = change < rel_tol
    if not converged:
        logger.warning(f"Quadrature stopped at the node budget ({depth}^{dim} nodes, n={dataset.n}) "
                       f"with relative change {change:.2e} > {rel_tol:g}")
    return previous, {"depth": depth, "nodes": depth ** dim, "rel_change": change, "converged": converged}
