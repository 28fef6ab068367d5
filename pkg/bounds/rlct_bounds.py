# filename: bounds/rlct_bounds.py
"""
Closed-form RLCT bounds for stochastic matrix factorization and the topic model.

All values are exact `Fraction`s; floats appear only where a logarithm of the
sample size is involved (free energy, model-selection scores).
"""
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from logger import get_logger
from state.models import ExactCase, ModelDims, RlctBound
from utils.errors import ConfigError

logger = get_logger(__name__)

HALF = Fraction(1, 2)


def param_dim(dims: ModelDims) -> int:
    """Essential dimension d = H(M+N) - H - N of S(M,H) x S(H,N)."""
    return dims.H * (dims.M + dims.N) - dims.H - dims.N


def rlct_upper_bound(dims: ModelDims) -> Fraction:
    M, N, H, H0 = dims.M, dims.N, dims.H, dims.H0
    return HALF * ((M - 1) + (H0 - 1) * (M + N - 3) + (H - H0) * min(M - 1, N))


def rlct_exact(dims: ModelDims) -> Optional[Tuple[Fraction, ExactCase]]:
    """
    Exact RLCT where it is known, otherwise None.

    The H=2, H0=1 branch is min{M-1, (M+N-2)/2}. The swapped case split
    (M-1 for M >= N, (M+N-2)/2 for M < N) exceeds the upper bound when
    M-1 > N, e.g. (4,2,2,1) would give 3 > 5/2; the volume-scaling estimate of
    (4,2,2,1) lands on 2.
    """
    M, N, H, H0 = dims.M, dims.N, dims.H, dims.H0
    if H == 1 and H0 == 1:
        return HALF * (M - 1), ExactCase.ONE_TOPIC
    if H == 2 and H0 == 2:
        return HALF * (2 * M + N - 4), ExactCase.TWO_TOPICS
    if H == 2 and H0 == 1:
        return HALF * (M - 1) + HALF * min(M - 1, N - 1), ExactCase.TWO_OVER_ONE
    return None


def rlct_exact_swapped_cases(dims: ModelDims) -> Optional[Fraction]:
    """The swapped H=2, H0=1 case split, kept so reports can show both readings."""
    if not (dims.H == 2 and dims.H0 == 1):
        return None
    if dims.M >= dims.N:
        return Fraction(dims.M - 1)
    return HALF * (dims.M + dims.N - 2)


def tightness_gap(dims: ModelDims) -> Fraction:
    return HALF * param_dim(dims) - rlct_upper_bound(dims)


def rrr_rlct_equal_rank(M: int, N: int, H: int) -> Fraction:
    """RLCT of reduced rank regression when learner and true rank are both H."""
    if min(M, N, H) < 1:
        raise ValueError(f"M, N, H must be >= 1, got ({M}, {N}, {H})")
    return HALF * H * (M + N - H)


def stochastic_degrees_of_freedom(dims: ModelDims) -> Fraction:
    """
    r = H(M+N) - 2*lambda, the effective parameter count implied by the RLCT.

    Uses the exact RLCT when known; otherwise lambda_bar, which makes r a lower
    bound. Reduced rank regression has r = H^2.
    """
    exact = rlct_exact(dims)
    lam = exact[0] if exact else rlct_upper_bound(dims)
    return dims.H * (dims.M + dims.N) - 2 * lam


def bound_summary(dims: ModelDims) -> RlctBound:
    d = param_dim(dims)
    exact = rlct_exact(dims)
    return RlctBound(
        dims=dims,
        lambda_bar=rlct_upper_bound(dims),
        d=d,
        half_d=HALF * d,
        exact=exact[0] if exact else None,
        case=exact[1] if exact else None,
    )


def _check_n(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValueError(f"Sample size n must be a positive integer, got {n!r}")


def gen_error_bound(dims: ModelDims, n: int) -> Fraction:
    """Leading-order bound E[G_n] <= lambda_bar / n."""
    _check_n(n)
    return rlct_upper_bound(dims) / n


def free_energy_upper(dims: ModelDims, n: float, S_n: float) -> float:
    """Leading terms n*S_n + lambda_bar*log n of the free-energy bound (n may be non-integer)."""
    if n < 1:
        raise ValueError(f"Sample size n must be >= 1, got {n!r}")
    return n * S_n + float(rlct_upper_bound(dims)) * math.log(n)


def bic_penalty(dims: ModelDims, n: int) -> float:
    _check_n(n)
    return 0.5 * param_dim(dims) * math.log(n)


def bound_grid(M_values: Iterable[int], N_values: Iterable[int], H0_values: Iterable[int],
               H_max: int) -> List[RlctBound]:
    """Bounds for every (M, N, H0, H) with H running from H0 to H_max, in lexicographic order."""
    rows: List[RlctBound] = []
    N_list, H0_list = list(N_values), list(H0_values)
    for M in M_values:
        for N in N_list:
            for H0 in H0_list:
                for H in range(H0, H_max + 1):
                    rows.append(bound_summary(ModelDims(M, N, H, H0)))
    return rows


@dataclass(frozen=True)
class SelectionRow:
    H: int
    fit: float            # mean negative log-likelihood per word
    penalty: Fraction     # lambda_bar(M, N, H, H)
    score: float          # n * fit + penalty * log n
    bic_score: float      # n * fit + d/2 * log n


@dataclass(frozen=True)
class SelectionResult:
    selected_H: int
    n: int
    table: List[SelectionRow]
    low_confidence: bool = False

    def scores(self) -> Dict[int, float]:
        return {row.H: row.score for row in self.table}

    @property
    def bic_selected_H(self) -> int:
        return min(self.table, key=lambda r: (r.bic_score, r.H)).H


def select_num_topics(per_H_fit: Sequence[Tuple[int, float]], n: int, H_range: Sequence[int],
                      M: int, N: int, low_confidence_n: int = 0) -> SelectionResult:
    """
    Picks H minimizing n*fit + lambda_bar(M, N, H, H0=H) * log n.

    H0 is unobservable at selection time, so the penalty assumes the candidate
    matches the truth. Ties go to the smaller H.
    """
    if not H_range:
        raise ConfigError("H_range must not be empty")
    _check_n(n)
    fits = dict(per_H_fit)
    log_n = math.log(n)
    table: List[SelectionRow] = []
    for H in sorted(set(H_range)):
        if H < 1:
            raise ConfigError(f"Candidate H must be >= 1, got {H}")
        if H not in fits:
            raise ConfigError(f"No fit term supplied for H={H}")
        fit = float(fits[H])
        if not math.isfinite(fit):
            raise ValueError(f"Fit term for H={H} is not finite: {fit}")
        dims = ModelDims(M, N, H, H)
        penalty = rlct_upper_bound(dims)
        table.append(SelectionRow(
            H=H, fit=fit, penalty=penalty,
            score=n * fit + float(penalty) * log_n,
            bic_score=n * fit + 0.5 * param_dim(dims) * log_n,
        ))
    best = min(table, key=lambda r: (r.score, r.H))
    low_confidence = n < low_confidence_n
    if low_confidence:
        logger.warning(f"Select: n={n} is below {low_confidence_n}; H={best.H} is reported without a claim.")
    logger.info(f"Select: chose H={best.H} among {[r.H for r in table]} at n={n}")
    return SelectionResult(selected_H=best.H, n=n, table=table, low_confidence=low_confidence)
