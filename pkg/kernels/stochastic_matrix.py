# filename: kernels/stochastic_matrix.py
"""
Column-stochastic parameter matrices and the ground truth (A0, B0, q').

Convention: every column of a stochastic matrix lies on a probability simplex,
so A is M x H, B is H x N and AB is M x N with stochastic columns. The truth
conditions on the column index: q(i | j) = (A0 B0)_{ij} and q' is a positive
vector over the N columns.
"""
import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from config import (
    COLUMN_SUM_TOL, DEFAULT_DELTA, MINIMALITY_COLUMN_DIST, MINIMALITY_RANK_TOL, TRUTH_MAX_DRAWS,
)
from logger import get_logger
from state.models import ModelDims
from utils.errors import ConfigError, ShapeMismatchError

logger = get_logger(__name__)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = "ok"
    column: Optional[int] = None
    entry: Optional[Tuple[int, int]] = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Immutable real matrix, entry(i, k) = a_{ik}. Construction does not validate; use `checked`."""
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=float, copy=True)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"Stochastic matrix must be 2-D, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @classmethod
    def checked(cls, entries) -> "StochasticMatrix":
        matrix = cls(entries)
        report = validate(matrix)
        if not report.ok:
            raise ValueError(f"Not a stochastic matrix: {report.message}")
        return matrix

    @classmethod
    def identity(cls, size: int) -> "StochasticMatrix":
        return cls(np.eye(size))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    def __matmul__(self, other: "StochasticMatrix") -> "StochasticMatrix":
        return product(self, other)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StochasticMatrix) and self.shape == other.shape \
            and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self) -> int:
        return hash((self.shape, self.entries.tobytes()))


def validate(S: StochasticMatrix, tol: float = COLUMN_SUM_TOL) -> ValidationReport:
    """Checks entries in [0, 1] and unit column sums; reports the first violation."""
    arr = S.entries
    if not np.all(np.isfinite(arr)):
        i, k = map(int, np.argwhere(~np.isfinite(arr))[0])
        return ValidationReport(False, f"non-finite entry at ({i}, {k})", column=k, entry=(i, k))
    bad = np.argwhere((arr < 0.0) | (arr > 1.0))
    if bad.size:
        i, k = map(int, bad[0])
        return ValidationReport(False, f"entry ({i}, {k}) = {arr[i, k]!r} outside [0, 1]", column=k, entry=(i, k))
    sums = arr.sum(axis=0)
    off = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if off.size:
        k = int(off[0])
        return ValidationReport(False, f"column {k} sums to {sums[k]!r}", column=k)
    return ValidationReport(True)


def product(A: StochasticMatrix, B: StochasticMatrix) -> StochasticMatrix:
    if A.cols != B.rows:
        raise ShapeMismatchError(f"Inner dimensions disagree: {A.shape} x {B.shape}")
    return StochasticMatrix(A.entries @ B.entries)


def _check_delta(rows: int, delta: float) -> None:
    if delta < 0 or (rows > 1 and delta * rows >= 1) or delta >= 1:
        raise ValueError(f"Infeasible interior margin delta={delta} for {rows} rows (need delta*rows < 1)")


def random_stochastic_batch(rows: int, cols: int, delta: float, rng: np.random.Generator,
                            size: int) -> np.ndarray:
    """
    `size` independent rows x cols matrices, each column uniform on {x >= delta, sum x = 1}.

    The truncated simplex is the image of the full simplex under x -> delta + (1 - rows*delta) x,
    so the affine map of a flat Dirichlet draw has exactly the law of resampling until
    every entry is >= delta.
    """
    _check_delta(rows, delta)
    draws = rng.dirichlet(np.ones(rows), size=(size, cols))  # (size, cols, rows)
    draws = np.swapaxes(draws, 1, 2)
    if delta > 0 and rows > 1:
        draws = delta + (1.0 - rows * delta) * draws
    return draws


def random_stochastic(rows: int, cols: int, delta: float, rng: np.random.Generator) -> StochasticMatrix:
    return StochasticMatrix(random_stochastic_batch(rows, cols, delta, rng, 1)[0])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """(A0, B0, q', delta). q' weights the N columns of A0 B0."""
    A0: StochasticMatrix
    B0: StochasticMatrix
    doc_dist: np.ndarray
    delta: float = DEFAULT_DELTA
    seed: Optional[int] = None
    product_matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.array(self.doc_dist, dtype=float, copy=True)
        q.setflags(write=False)
        object.__setattr__(self, "doc_dist", q)
        if self.A0.cols != self.B0.rows:
            raise ShapeMismatchError(f"A0 {self.A0.shape} and B0 {self.B0.shape} do not chain")
        C0 = self.A0.entries @ self.B0.entries
        C0.setflags(write=False)
        object.__setattr__(self, "product_matrix", C0)

    @property
    def M(self) -> int:
        return self.A0.rows

    @property
    def N(self) -> int:
        return self.B0.cols

    @property
    def H0(self) -> int:
        return self.A0.cols

    def conditional(self) -> np.ndarray:
        """q(i | j) as an M x N array (columns sum to 1)."""
        return self.product_matrix

    def check(self) -> None:
        """Raises ValueError naming the first violated invariant."""
        for name, matrix in (("A0", self.A0), ("B0", self.B0)):
            report = validate(matrix)
            if not report.ok:
                raise ValueError(f"{name}: {report.message}")
        if not 0.0 < self.delta < 0.5:
            raise ValueError(f"delta must lie in (0, 1/2), got {self.delta}")
        for name, matrix in (("A0", self.A0), ("B0", self.B0)):
            # a single-row factor (H0 = 1 for B0) is the constant all-ones row
            if matrix.rows == 1:
                continue
            arr = matrix.entries
            if np.any(arr < self.delta - COLUMN_SUM_TOL) or np.any(arr > 1.0 - self.delta + COLUMN_SUM_TOL):
                raise ValueError(f"{name} has entries outside [{self.delta}, {1 - self.delta}]")
        q = self.doc_dist
        if q.shape != (self.N,):
            raise ShapeMismatchError(f"doc_dist must have length N={self.N}, got shape {q.shape}")
        if np.any(q <= 0) or abs(q.sum() - 1.0) > 1e-10:
            raise ValueError("doc_dist must be strictly positive and sum to 1")
        ok, reason = is_minimal(self.A0, self.B0)
        if not ok:
            raise ValueError(f"(A0, B0) is not a minimal factorization: {reason}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A0": self.A0.entries.tolist(),
            "B0": self.B0.entries.tolist(),
            "doc_dist": self.doc_dist.tolist(),
            "delta": self.delta,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "GroundTruth":
        truth = cls(
            A0=StochasticMatrix(payload["A0"]),
            B0=StochasticMatrix(payload["B0"]),
            doc_dist=np.asarray(payload["doc_dist"], dtype=float),
            delta=float(payload.get("delta", DEFAULT_DELTA)),
            seed=payload.get("seed"),
        )
        truth.check()
        return truth

    @classmethod
    def sample(cls, dims: ModelDims, rng: np.random.Generator, delta: float = DEFAULT_DELTA,
               doc_dist: Optional[np.ndarray] = None, seed: Optional[int] = None) -> "GroundTruth":
        """Draws A0 from Sim(M, K0)^H0 and B0 from Sim(H0, K0)^N until the pair is minimal."""
        M, N, H0 = dims.M, dims.N, dims.H0
        if H0 > min(M, N):
            raise ConfigError(f"H0={H0} cannot be the rank of an {M} x {N} product")
        if doc_dist is None:
            doc_dist = np.full(N, 1.0 / N)
        for attempt in range(1, TRUTH_MAX_DRAWS + 1):
            A0 = random_stochastic(M, H0, delta, rng)
            B0 = random_stochastic(H0, N, delta, rng)
            ok, reason = is_minimal(A0, B0)
            if ok:
                truth = cls(A0=A0, B0=B0, doc_dist=doc_dist, delta=delta, seed=seed)
                truth.check()
                logger.debug(f"Truth sampled for {dims.label()} after {attempt} draw(s)")
                return truth
            logger.debug(f"Truth draw {attempt} rejected: {reason}")
        raise ConfigError(f"No minimal truth found for {dims.label()} with delta={delta} in {TRUTH_MAX_DRAWS} draws")


def is_minimal(A0: StochasticMatrix, B0: StochasticMatrix,
               rank_tol: float = MINIMALITY_RANK_TOL,
               min_column_distance: float = MINIMALITY_COLUMN_DIST) -> Tuple[bool, str]:
    """Heuristic minimality: rank(A0 B0) == H0 and no two columns of A0 (near-)coincide."""
    H0 = A0.cols
    rank = int(np.linalg.matrix_rank(A0.entries @ B0.entries, tol=rank_tol))
    if rank != H0:
        return False, f"numerical rank {rank} != H0={H0}"
    for k, l in itertools.combinations(range(H0), 2):
        dist = float(np.linalg.norm(A0.entries[:, k] - A0.entries[:, l]))
        if dist < min_column_distance:
            return False, f"columns {k} and {l} of A0 are {dist:.2e} apart"
    return True, "ok"
