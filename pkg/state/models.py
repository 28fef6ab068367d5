# filename: state/models.py
from dataclasses import dataclass, field, asdict
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config import PREDICTIVE_ROW_TOL
from utils.errors import InvalidDimsError, ShapeMismatchError


class ExactCase(Enum):
    """Special cases where the RLCT of SMF is known exactly."""
    ONE_TOPIC = "H=H0=1"
    TWO_TOPICS = "H=H0=2"
    TWO_OVER_ONE = "H=2,H0=1"


class ObservationModel(Enum):
    """Observation model of the matrix-valued SMF experiments."""
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class EstimationMethod(Enum):
    VOLUME = "volume"
    GEN_ERROR = "gen-error"
    FREE_ENERGY = "free-energy"


class DocumentMode(Enum):
    """How the context (document) of each word is chosen by the generator."""
    SAMPLED = "sampled"  # j ~ q' independently per word
    QUOTA = "quota"      # fixed per-context word counts n * q', largest remainder


class SweepState(Enum):
    """Defines the possible states of a sweep session."""
    INITIALIZING = 1
    RUNNING = 2
    FINISHED = 3
    PARTIAL = 4
    ERROR = 5


class PointStatus(Enum):
    """Processing status of one n point of a learning-curve sweep."""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"
    SKIPPED_EXISTING = "skipped_existing"


@dataclass(frozen=True)
class ModelDims:
    """
    The quadruple (M, N, H, H0).

    M is the row count of AB (the emitted alphabet, the length of every column
    of A), N the column count (the conditioning contexts), H the learner's inner
    dimension and H0 the true one.
    In topic-model terms N counts documents and M the vocabulary.
    """
    M: int
    N: int
    H: int
    H0: int

    def __post_init__(self):
        for name in ("M", "N", "H", "H0"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidDimsError(f"{name} must be an integer, got {value!r}")
        if self.M < 2 or self.N < 2:
            raise InvalidDimsError(f"Need M >= 2 and N >= 2, got M={self.M}, N={self.N}")
        if not (self.H >= self.H0 >= 1):
            raise InvalidDimsError(f"Need H >= H0 >= 1, got H={self.H}, H0={self.H0}")

    def label(self) -> str:
        return f"M{self.M}_N{self.N}_H{self.H}_H0{self.H0}"

    def with_topics(self, H: int, H0: Optional[int] = None) -> "ModelDims":
        return ModelDims(self.M, self.N, H, H if H0 is None else H0)

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


@dataclass(frozen=True)
class RlctBound:
    """Bound, optional exact value and dimension arithmetic for one ModelDims."""
    dims: ModelDims
    lambda_bar: Fraction
    d: int
    half_d: Fraction
    exact: Optional[Fraction] = None
    case: Optional[ExactCase] = None

    @property
    def gap(self) -> Fraction:
        return self.half_d - self.lambda_bar


@dataclass
class LearningCurveRecord:
    """One point of the Bayesian learning curve next to its bound and the regular reference."""
    n: int
    empirical: float          # n * mean(G_n)
    ci_halfwidth: float       # on the n * mean(G_n) scale
    bound: Fraction           # lambda_bar
    regular_reference: Fraction  # d / 2
    exact: Optional[Fraction] = None
    replicates_used: int = 0
    replicates_failed: int = 0
    replicates_divergent: int = 0
    config_hash: str = ""
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.exact is not None and self.exact > self.bound:
            raise ValueError(f"Exact RLCT {self.exact} exceeds bound {self.bound} at n={self.n}")


@dataclass(frozen=True, eq=False)
class WordDataset:
    """
    n observed (context, symbol) events as an M x N count table.

    counts[i][j] is the number of times symbol i was emitted in context
    (document) j, so the table has the orientation of AB; doc_totals are the
    column sums.
    """
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.ndim != 2:
            raise ShapeMismatchError(f"Count table must be 2-D, got shape {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("Count table has negative entries")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def M(self) -> int:
        return self.counts.shape[0]

    @property
    def N(self) -> int:
        return self.counts.shape[1]

    @property
    def doc_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def word_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def tokens(self) -> Tuple[np.ndarray, np.ndarray]:
        """(doc_index, word_index) arrays of length n, ordered by context then symbol."""
        flat = self.counts.T.ravel()  # context-major
        cells = np.repeat(np.arange(flat.size), flat)
        doc_index, word_index = np.divmod(cells, self.M)
        return doc_index.astype(np.int64), word_index.astype(np.int64)

    @classmethod
    def from_tokens(cls, doc_index: np.ndarray, word_index: np.ndarray, M: int, N: int) -> "WordDataset":
        cells = np.asarray(word_index, dtype=np.int64) * N + np.asarray(doc_index, dtype=np.int64)
        return cls(np.bincount(cells, minlength=M * N).reshape(M, N))


@dataclass
class PosteriorSummary:
    """Bayesian predictive p*(i | j) as an M x N table with unit column sums and positive entries."""
    predictive: np.ndarray
    n_samples: int
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        pred = np.asarray(self.predictive, dtype=float)
        if pred.ndim != 2:
            raise ShapeMismatchError(f"Predictive table must be 2-D, got shape {pred.shape}")
        if np.any(pred <= 0) or not np.all(np.isfinite(pred)):
            raise ValueError("Predictive table must be finite and strictly positive")
        sums = pred.sum(axis=0)
        if np.any(np.abs(sums - 1.0) > PREDICTIVE_ROW_TOL):
            raise ValueError(f"Predictive columns must sum to 1, got {sums.tolist()}")
        self.predictive = pred
