# filename: processors/gibbs_sampler.py
"""
Collapsed Gibbs sampling for the topic (LDA-form) model.

Documents are the N columns, the vocabulary is the M rows: a token (j, i) is
a word i emitted in context j. Topic-word distributions are the columns of A
(Dirichlet(beta) prior), document-topic distributions the columns of B
(Dirichlet(alpha) prior). The inner sweep is compiled with numba and consumes
uniforms pre-drawn from the caller's numpy Generator, so runs are reproducible
from the seed alone.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np
from numba import njit

from config import (
    GIBBS_BURNIN_FRACTION, GIBBS_SWEEPS, GIBBS_THIN, PRIOR_ALPHA, PRIOR_BETA, RHAT_WARNING,
)
from logger import get_logger
from state.models import PosteriorSummary, WordDataset
from utils.errors import ConfigError

logger = get_logger(__name__)


@dataclass
class SamplerConfig:
    sweeps: int = GIBBS_SWEEPS
    burnin: Optional[int] = None
    thin: int = GIBBS_THIN
    alpha: float = PRIOR_ALPHA
    beta: float = PRIOR_BETA
    check_consistency: bool = False

    def __post_init__(self):
        if self.burnin is None:
            self.burnin = int(self.sweeps * GIBBS_BURNIN_FRACTION)
        if self.sweeps < 1 or self.thin < 1:
            raise ConfigError(f"sweeps and thin must be >= 1, got {self.sweeps}, {self.thin}")
        if not 0 <= self.burnin < self.sweeps:
            raise ConfigError(f"Need 0 <= burnin < sweeps, got burnin={self.burnin}, sweeps={self.sweeps}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError(f"Dirichlet hyperparameters must be positive, got alpha={self.alpha}, beta={self.beta}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sweeps": self.sweeps, "burnin": self.burnin, "thin": self.thin,
            "alpha": self.alpha, "beta": self.beta,
        }


@dataclass
class GibbsState:
    """Topic assignment per token and the count tables derived from it."""
    assignments: np.ndarray       # (n,)
    count_doc_topic: np.ndarray   # (N, H)
    count_topic_word: np.ndarray  # (H, M)
    count_topic: np.ndarray       # (H,)
    alpha: float
    beta: float

    @classmethod
    def initial(cls, doc_index: np.ndarray, word_index: np.ndarray, M: int, N: int, H: int,
                alpha: float, beta: float, rng: np.random.Generator) -> "GibbsState":
        z = rng.integers(0, H, size=doc_index.size).astype(np.int64)
        state = cls(z, np.zeros((N, H), dtype=np.int64), np.zeros((H, M), dtype=np.int64),
                    np.zeros(H, dtype=np.int64), alpha, beta)
        state.count_doc_topic, state.count_topic_word, state.count_topic = \
            state.recount(doc_index, word_index)
        return state

    @property
    def H(self) -> int:
        return self.count_topic.shape[0]

    def recount(self, doc_index: np.ndarray, word_index: np.ndarray):
        N, H = self.count_doc_topic.shape
        M = self.count_topic_word.shape[1]
        ndk = np.bincount(doc_index * H + self.assignments, minlength=N * H).reshape(N, H)
        nkw = np.bincount(self.assignments * M + word_index, minlength=H * M).reshape(H, M)
        return ndk, nkw, nkw.sum(axis=1)

    def is_consistent(self, doc_index: np.ndarray, word_index: np.ndarray) -> bool:
        ndk, nkw, nk = self.recount(doc_index, word_index)
        return bool(np.array_equal(ndk, self.count_doc_topic) and np.array_equal(nkw, self.count_topic_word)
                    and np.array_equal(nk, self.count_topic))

    def predictive(self) -> np.ndarray:
        """sum_k theta_jk phi_ki as an M x N table; an empty document gets the uniform topic mix."""
        N, H = self.count_doc_topic.shape
        M = self.count_topic_word.shape[1]
        doc_len = self.count_doc_topic.sum(axis=1, keepdims=True)
        theta = (self.count_doc_topic + self.alpha) / (doc_len + H * self.alpha)            # (N, H)
        phi = (self.count_topic_word + self.beta) / (self.count_topic[:, None] + M * self.beta)  # (H, M)
        return phi.T @ theta.T


@njit(nogil=True, cache=True)
def _gibbs_sweep(doc_index, word_index, z, ndk, nkw, nk, alpha, beta, uniforms):
    H = nk.shape[0]
    M = nkw.shape[1]
    cumulative = np.empty(H)
    for t in range(doc_index.shape[0]):
        j = doc_index[t]
        i = word_index[t]
        k = z[t]
        ndk[j, k] -= 1
        nkw[k, i] -= 1
        nk[k] -= 1
        total = 0.0
        for h in range(H):
            total += (ndk[j, h] + alpha) * (nkw[h, i] + beta) / (nk[h] + M * beta)
            cumulative[h] = total
        u = uniforms[t] * total
        k = 0
        while k < H - 1 and cumulative[k] <= u:
            k += 1
        z[t] = k
        ndk[j, k] += 1
        nkw[k, i] += 1
        nk[k] += 1


def split_rhat(trace: np.ndarray) -> float:
    """Gelman-Rubin statistic of a single chain split into halves; nan for fewer than 4 draws."""
    x = np.asarray(trace, dtype=float)
    half = x.size // 2
    if half < 2:
        return float("nan")
    chains = np.stack([x[:half], x[x.size - half:]])
    within = chains.var(axis=1, ddof=1).mean()
    between = half * chains.mean(axis=1).var(ddof=1)
    if within <= 0:
        return 1.0 if between <= 0 else float("inf")
    var_plus = (half - 1) / half * within + between / half
    return float(np.sqrt(var_plus / within))


def one_topic_predictive(dataset: WordDataset, beta: float = PRIOR_BETA) -> np.ndarray:
    """H = 1: every context shares one topic, so p*(i | j) = (c_i + beta) / (n + M beta) with pooled counts."""
    pooled = dataset.word_totals.astype(float)
    column = (pooled + beta) / (dataset.n + dataset.M * beta)
    return np.repeat(column[:, None], dataset.N, axis=1)


def collapsed_gibbs(dataset: WordDataset, H: int, config: SamplerConfig,
                    rng: np.random.Generator) -> PosteriorSummary:
    """
    Rao-Blackwellized predictive averaged over the retained sweeps.

    Sweeps s >= burnin with (s - burnin) % thin == 0 are retained. The
    log-likelihood of the data under each retained predictive is tracked
    and summarized by split R-hat.
    """
    if isinstance(H, bool) or not isinstance(H, int) or H < 1:
        raise ConfigError(f"H must be a positive integer, got {H!r}")
    if dataset.n < 1:
        raise ValueError("Cannot sample a posterior from an empty dataset")
    if H == 1:
        return PosteriorSummary(one_topic_predictive(dataset, config.beta), 0, {"closed_form": True})

    doc_index, word_index = dataset.tokens()
    state = GibbsState.initial(doc_index, word_index, dataset.M, dataset.N, H, config.alpha, config.beta, rng)
    counts = dataset.counts
    predictive_sum = np.zeros((dataset.M, dataset.N))
    trace = []
    for sweep in range(config.sweeps):
        uniforms = rng.random(doc_index.size)
        _gibbs_sweep(doc_index, word_index, state.assignments, state.count_doc_topic,
                     state.count_topic_word, state.count_topic, config.alpha, config.beta, uniforms)
        if config.check_consistency and not state.is_consistent(doc_index, word_index):
            raise RuntimeError(f"Gibbs count tables out of sync with assignments after sweep {sweep}")
        if sweep >= config.burnin and (sweep - config.burnin) % config.thin == 0:
            pred = state.predictive()
            predictive_sum += pred
            trace.append(float(np.sum(counts * np.log(pred))))

    retained = len(trace)
    rhat = split_rhat(np.array(trace))
    if np.isfinite(rhat) and rhat > RHAT_WARNING:
        logger.warning(f"Gibbs chain for H={H}, n={dataset.n} may not have mixed: split R-hat={rhat:.3f}")
    predictive = predictive_sum / retained
    predictive /= predictive.sum(axis=0, keepdims=True)
    return PosteriorSummary(predictive, retained, {"split_rhat": rhat, "loglik_trace_mean": float(np.mean(trace))})
