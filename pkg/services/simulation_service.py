# filename: services/simulation_service.py
"""
Synthetic data, generalization errors and replicated Bayesian simulations.

Every replicate r of a run with master seed s draws from
SeedSequence(s).spawn(R)[r], so results do not depend on the thread count.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from config import CI_Z, MH_PROPOSAL_SCALE, MH_STEPS, PRIOR_ALPHA, PRIOR_BETA
from kernels.divergences import bernoulli_kl_cells, kl_columns
from kernels.stochastic_matrix import GroundTruth
from logger import get_logger
from processors.gibbs_sampler import SamplerConfig, collapsed_gibbs
from processors.metropolis_sampler import mh_posterior_smf
from processors.quadrature import marginal_likelihood_exact
from state.models import DocumentMode, ObservationModel, PosteriorSummary, WordDataset
from utils.errors import ConfigError, ShapeMismatchError
from utils.rng import spawn_seeds

logger = get_logger(__name__)

PredictiveFn = Callable[[WordDataset, np.random.Generator], PosteriorSummary]


def _check_sample_size(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"Sample size n must be a positive integer, got {n!r}")


# --- Data generation ---

def _draw_rows(columns: np.ndarray, choice: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """For each t, a row index drawn from column choice[t] of a column-stochastic matrix."""
    cdf = np.cumsum(columns, axis=0)[:, choice]          # (K, n)
    u = rng.random(choice.size)
    idx = np.sum(cdf <= u[None, :], axis=0)
    return np.minimum(idx, columns.shape[0] - 1)


def quota_counts(n: int, doc_dist: np.ndarray) -> np.ndarray:
    """n * q' rounded to integers summing to n by largest remainder (ties to the lower index)."""
    target = n * np.asarray(doc_dist, dtype=float)
    base = np.floor(target).astype(np.int64)
    remainder = n - int(base.sum())
    order = np.argsort(-(target - base), kind="stable")
    base[order[:remainder]] += 1
    return base


def generate_tokens(truth: GroundTruth, n: int, rng: np.random.Generator,
                    mode: DocumentMode = DocumentMode.SAMPLED) -> Tuple[np.ndarray, np.ndarray]:
    """(doc_index, word_index) of n events: j ~ q' (or quotas), k ~ column j of B0, i ~ column k of A0."""
    _check_sample_size(n)
    if mode is DocumentMode.QUOTA:
        doc_index = np.repeat(np.arange(truth.N), quota_counts(n, truth.doc_dist))
    else:
        doc_index = rng.choice(truth.N, size=n, p=truth.doc_dist)
    topics = _draw_rows(truth.B0.entries, doc_index, rng)
    words = _draw_rows(truth.A0.entries, topics, rng)
    return doc_index.astype(np.int64), words.astype(np.int64)


def generate_dataset(truth: GroundTruth, n: int, rng: np.random.Generator,
                     mode: DocumentMode = DocumentMode.SAMPLED) -> WordDataset:
    doc_index, word_index = generate_tokens(truth, n, rng, mode)
    return WordDataset.from_tokens(doc_index, word_index, truth.M, truth.N)


def generate_smf_dataset(truth: GroundTruth, n: int, model: ObservationModel, rng: np.random.Generator,
                         noise_scale: float = 1.0) -> np.ndarray:
    """n i.i.d. M x N observations of A0B0: Gaussian noise or entrywise coin flips."""
    _check_sample_size(n)
    C0 = truth.product_matrix
    shape = (n,) + C0.shape
    if model is ObservationModel.GAUSSIAN:
        return C0 + noise_scale * rng.standard_normal(shape)
    return (rng.random(shape) < C0).astype(float)


def generate_markov_regression(truth: GroundTruth, n: int, rng: np.random.Generator,
                               noise_scale: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Transition regression y = A0B0 x + noise with x the one-hot current state.

    States are drawn from q', so the input second moment is diag(q') in expectation.

    Returns:
        (inputs of shape (n, N), outputs of shape (n, M))
    """
    _check_sample_size(n)
    states = rng.choice(truth.N, size=n, p=truth.doc_dist)
    inputs = np.eye(truth.N)[states]
    outputs = inputs @ truth.product_matrix.T + noise_scale * rng.standard_normal((n, truth.M))
    return inputs, outputs


# --- Losses ---

def _check_predictive(truth: GroundTruth, summary: PosteriorSummary) -> None:
    if summary.predictive.shape != truth.product_matrix.shape:
        raise ShapeMismatchError(
            f"Predictive is {summary.predictive.shape}, truth is {truth.product_matrix.shape}")


def generalization_error(truth: GroundTruth, summary: PosteriorSummary) -> float:
    """sum_j q'(j) sum_i q(i|j) log(q(i|j) / p*(i|j)); +inf when the predictive misses supported mass."""
    _check_predictive(truth, summary)
    value = float(kl_columns(truth.product_matrix, summary.predictive, truth.doc_dist))
    if math.isinf(value):
        logger.warning("Predictive puts zero mass on a supported outcome; generalization error is +inf")
    return value


def empirical_entropy(truth: GroundTruth, dataset: WordDataset) -> float:
    """S_n = -(1/n) sum_ij counts_ij log q(i|j)."""
    if dataset.n == 0:
        raise ValueError("Empirical entropy of an empty dataset is undefined")
    if dataset.counts.shape != truth.product_matrix.shape:
        raise ShapeMismatchError(f"Counts are {dataset.counts.shape}, truth is {truth.product_matrix.shape}")
    return _mean_negative_log(dataset, truth.product_matrix)


def training_loss(dataset: WordDataset, summary: PosteriorSummary) -> float:
    """Mean negative log-likelihood per word under the predictive."""
    if dataset.n == 0:
        raise ValueError("Training loss of an empty dataset is undefined")
    return _mean_negative_log(dataset, summary.predictive)


def _mean_negative_log(dataset: WordDataset, table: np.ndarray) -> float:
    mask = dataset.counts > 0
    return float(-np.sum(dataset.counts[mask] * np.log(table[mask])) / dataset.n)


def smf_generalization_error(truth: GroundTruth, summary: PosteriorSummary, model: ObservationModel) -> float:
    """KL between the true and the plug-in predictive law of one observed matrix."""
    _check_predictive(truth, summary)
    C0, C = truth.product_matrix, summary.predictive
    if model is ObservationModel.GAUSSIAN:
        return 0.5 * float(np.sum((C0 - C) ** 2))
    if np.any(C >= 1.0):
        return math.inf
    return float(bernoulli_kl_cells(C0, C).sum())


def smf_empirical_entropy(truth: GroundTruth, datasets: np.ndarray, model: ObservationModel) -> float:
    """-(1/n) sum_l log q(X_l) of an (n, M, N) stack."""
    X = np.asarray(datasets, dtype=float)
    C0 = truth.product_matrix
    if model is ObservationModel.GAUSSIAN:
        sq = np.sum((X - C0) ** 2, axis=(1, 2))
        return float(np.mean(0.5 * sq) + 0.5 * C0.size * math.log(2 * math.pi))
    loglik = np.sum(X * np.log(C0) + (1.0 - X) * np.log1p(-C0), axis=(1, 2))
    return float(-np.mean(loglik))


# --- Replicates ---

@dataclass
class GenErrorSummary:
    n: int
    H: int
    mean: float
    ci_halfwidth: float
    per_replicate: List[Dict[str, Any]] = field(default_factory=list)
    divergent: int = 0
    failed: int = 0

    @property
    def used(self) -> int:
        return len(self.per_replicate) - self.divergent - self.failed

    @property
    def failure_fraction(self) -> float:
        total = len(self.per_replicate)
        return self.failed / total if total else 0.0

    @property
    def lambda_hat(self) -> float:
        return self.n * self.mean

    @property
    def lambda_ci_halfwidth(self) -> float:
        return self.n * self.ci_halfwidth

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n, "H": self.H, "mean": self.mean, "ci_halfwidth": self.ci_halfwidth,
            "lambda_hat": self.lambda_hat, "lambda_ci_halfwidth": self.lambda_ci_halfwidth,
            "used": self.used, "divergent": self.divergent, "failed": self.failed,
            "per_replicate": self.per_replicate,
        }


class ReplicateRunner:
    """
    Runs independent replicates on a thread pool.

    A replicate that raises is logged and recorded with status "failed"; the
    run goes on. Records come back ordered by replicate index.
    """
    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ConfigError(f"workers must be >= 1, got {workers}")
        self.workers = workers

    def run(self, task: Callable[[int, np.random.Generator], Dict[str, Any]],
            replicates: int, master_seed: int) -> List[Dict[str, Any]]:
        if replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {replicates}")
        seeds = spawn_seeds(master_seed, replicates)

        def one(index: int) -> Dict[str, Any]:
            try:
                record = task(index, np.random.default_rng(seeds[index]))
                record.setdefault("status", "ok")
            except Exception as e:
                logger.exception(f"Replicate {index} failed: {e}")
                record = {"status": "failed", "error": f"{type(e).__name__}: {e}"}
            record["replicate"] = index
            return record

        if self.workers == 1:
            return [one(r) for r in range(replicates)]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(one, range(replicates)))


def summarize_replicates(records: Sequence[Dict[str, Any]], n: int, H: int) -> GenErrorSummary:
    failed = sum(1 for r in records if r["status"] == "failed")
    divergent = 0
    finite = []
    for record in records:
        if record["status"] == "failed":
            continue
        if math.isinf(record["G_n"]):
            record["status"] = "divergent"
            divergent += 1
        else:
            finite.append(record["G_n"])
    if divergent:
        logger.warning(f"{divergent} of {len(records)} replicates diverged at n={n}, H={H}; excluded from the mean")
    g = np.array(finite, dtype=float)
    mean = float(g.mean()) if g.size else float("nan")
    sem = float(stats.sem(g)) if g.size > 1 else float("nan")
    return GenErrorSummary(n=n, H=H, mean=mean, ci_halfwidth=CI_Z * sem, per_replicate=list(records),
                           divergent=divergent, failed=failed)


def expected_gen_error(truth: GroundTruth, H: int, n: int, replicates: int,
                       sampler_config: Optional[SamplerConfig] = None,
                       seed: int = 0,
                       workers: int = 1,
                       mode: DocumentMode = DocumentMode.SAMPLED,
                       predictive_fn: Optional[PredictiveFn] = None) -> GenErrorSummary:
    """
    Mean generalization error over independent datasets of size n.

    predictive_fn replaces the Gibbs posterior, e.g. with an oracle predictive.
    """
    _check_sample_size(n)
    config = sampler_config or SamplerConfig()

    def task(index: int, rng: np.random.Generator) -> Dict[str, Any]:
        dataset = generate_dataset(truth, n, rng, mode)
        summary = predictive_fn(dataset, rng) if predictive_fn else collapsed_gibbs(dataset, H, config, rng)
        return {
            "G_n": generalization_error(truth, summary),
            "S_n": empirical_entropy(truth, dataset),
            "diagnostics": summary.diagnostics,
        }

    logger.info(f"Gen error: n={n}, H={H}, {replicates} replicates on {workers} worker(s)")
    records = ReplicateRunner(workers).run(task, replicates, seed)
    return summarize_replicates(records, n, H)


def expected_smf_gen_error(truth: GroundTruth, H: int, n: int, replicates: int, model: ObservationModel,
                           steps: int = MH_STEPS, proposal_scale: float = MH_PROPOSAL_SCALE,
                           seed: int = 0, workers: int = 1,
                           support_delta: Optional[float] = None) -> GenErrorSummary:
    _check_sample_size(n)

    def task(index: int, rng: np.random.Generator) -> Dict[str, Any]:
        data = generate_smf_dataset(truth, n, model, rng)
        summary = mh_posterior_smf(data, model, H, steps=steps, proposal_scale=proposal_scale,
                                   rng=rng, support_delta=support_delta)
        return {
            "G_n": smf_generalization_error(truth, summary, model),
            "S_n": smf_empirical_entropy(truth, data, model),
            "diagnostics": summary.diagnostics,
        }

    logger.info(f"SMF gen error ({model.value}): n={n}, H={H}, {replicates} replicates")
    records = ReplicateRunner(workers).run(task, replicates, seed)
    return summarize_replicates(records, n, H)


def free_energy_curve(truth: GroundTruth, H: int, n_grid: Sequence[int], replicates: int,
                      seed: int = 0, workers: int = 1,
                      alpha: float = PRIOR_ALPHA, beta: float = PRIOR_BETA) -> List[Dict[str, Any]]:
    """
    F_n - n S_n along nested prefixes of one event sequence per replicate.

    Returns one record per (replicate, n) with F_n, S_n, value and the
    quadrature diagnostics; failed replicates carry status "failed".
    """
    grid = [int(n) for n in n_grid]
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError(f"n_grid must be non-empty and strictly increasing, got {grid}")
    for n in grid:
        _check_sample_size(n)

    def task(index: int, rng: np.random.Generator) -> Dict[str, Any]:
        doc_index, word_index = generate_tokens(truth, grid[-1], rng)
        points = []
        for n in grid:
            dataset = WordDataset.from_tokens(doc_index[:n], word_index[:n], truth.M, truth.N)
            F_n, diagnostics = marginal_likelihood_exact(dataset, H, alpha=alpha, beta=beta)
            S_n = empirical_entropy(truth, dataset)
            points.append({"n": n, "F_n": F_n, "S_n": S_n, "value": F_n - n * S_n,
                           "converged": bool(diagnostics.get("converged", True))})
        return {"points": points}

    records = []
    for record in ReplicateRunner(workers).run(task, replicates, seed):
        if record["status"] == "failed":
            records.append(record)
            continue
        for point in record["points"]:
            records.append({"replicate": record["replicate"], "status": "ok", **point})
    return records


def free_energy_pairs(records: Sequence[Dict[str, Any]]) -> List[Tuple[float, float]]:
    return [(float(r["n"]), float(r["value"])) for r in records if r["status"] == "ok"]
