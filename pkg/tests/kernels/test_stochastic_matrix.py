# filename: tests/kernels/test_stochastic_matrix.py
import numpy as np
import pytest

from kernels.stochastic_matrix import (
    GroundTruth, StochasticMatrix, is_minimal, product, random_stochastic, random_stochastic_batch, validate,
)
from state.models import ModelDims
from utils.errors import ConfigError, ShapeMismatchError

EXAMPLE = [[.1, .1, .4, 0], [.5, .1, .4, 0], [.4, .8, .2, 1]]


@pytest.mark.parametrize("entries", [EXAMPLE, np.eye(1), np.eye(4)])
def test_validate_ok(entries):
    assert validate(StochasticMatrix(entries)).ok


def test_validate_reports_column():
    report = validate(StochasticMatrix([[0.5, 0.2], [0.5, 0.7]]))
    assert not report.ok
    assert report.column == 1
    assert "sums to" in report.message


@pytest.mark.parametrize("entries, entry", [
    ([[1.2, 0.5], [-0.2, 0.5]], (0, 0)),
    ([[0.5, np.nan], [0.5, 0.5]], (0, 1)),
])
def test_validate_reports_entry(entries, entry):
    report = validate(StochasticMatrix(entries))
    assert not report.ok
    assert report.entry == entry


def test_checked_raises():
    with pytest.raises(ValueError):
        StochasticMatrix.checked([[0.5, 0.2], [0.5, 0.7]])


def test_entries_are_read_only():
    S = StochasticMatrix(np.eye(2))
    with pytest.raises(ValueError):
        S.entries[0, 0] = 0.3


def test_product_of_random_matrices_is_stochastic(rng):
    A = random_stochastic(3, 2, 0.0, rng)
    B = random_stochastic(2, 4, 0.0, rng)
    C = product(A, B)
    assert C.shape == (3, 4)
    assert np.allclose(C.entries.sum(axis=0), 1.0, atol=1e-12, rtol=0)
    assert validate(C).ok
    assert (A @ B) == C


def test_product_identity():
    A = StochasticMatrix(EXAMPLE)
    assert product(A, StochasticMatrix.identity(4)) == A


def test_product_shape_mismatch(rng):
    with pytest.raises(ShapeMismatchError):
        product(random_stochastic(3, 2, 0.0, rng), random_stochastic(3, 2, 0.0, rng))


@pytest.mark.parametrize("rows, cols", [(2, 3), (5, 1), (1, 4)])
def test_random_stochastic_validates(rows, cols, rng):
    assert validate(random_stochastic(rows, cols, 0.0, rng)).ok


def test_random_stochastic_margin(rng):
    S = random_stochastic_batch(2, 50, 0.4, rng, 20)
    assert S.min() >= 0.4 - 1e-12
    assert S.max() <= 0.6 + 1e-12
    assert np.allclose(S.sum(axis=1), 1.0)


@pytest.mark.parametrize("rows, delta", [(2, 0.5), (4, 0.3), (3, -0.1)])
def test_random_stochastic_infeasible_margin(rows, delta, rng):
    with pytest.raises(ValueError):
        random_stochastic(rows, 2, delta, rng)


def test_random_stochastic_is_uniform_on_truncated_simplex(rng):
    # a uniform column on {x >= d, x1 + x2 = 1} has x1 ~ U[d, 1 - d]
    draws = random_stochastic_batch(2, 1, 0.1, rng, 40000)[:, 0, 0]
    assert draws.mean() == pytest.approx(0.5, abs=0.01)
    assert draws.var() == pytest.approx(0.8 ** 2 / 12, rel=0.05)


@pytest.mark.parametrize("quad", [(2, 2, 1, 1), (3, 3, 2, 2), (4, 3, 3, 3), (5, 5, 2, 2)])
def test_truth_sample_is_valid(quad, rng):
    dims = ModelDims(*quad)
    truth = GroundTruth.sample(dims, rng, delta=0.05)
    truth.check()
    assert truth.product_matrix.shape == (dims.M, dims.N)
    assert np.allclose(truth.conditional().sum(axis=0), 1.0)
    assert truth.H0 == dims.H0


def test_truth_rejects_rank_above_shape(rng):
    with pytest.raises(ConfigError):
        GroundTruth.sample(ModelDims(2, 3, 3, 3), rng)


def test_truth_round_trip(rng):
    truth = GroundTruth.sample(ModelDims(3, 4, 2, 2), rng, seed=11)
    again = GroundTruth.from_dict(truth.to_dict())
    assert again.A0 == truth.A0
    assert again.B0 == truth.B0
    assert again.seed == 11


def test_truth_check_rejects_entries_below_margin():
    A0 = StochasticMatrix([[0.01, 0.6], [0.99, 0.4]])
    B0 = StochasticMatrix([[0.5, 0.3], [0.5, 0.7]])
    truth = GroundTruth(A0, B0, doc_dist=[0.5, 0.5], delta=0.05)
    with pytest.raises(ValueError, match="outside"):
        truth.check()


def test_truth_check_rejects_bad_doc_dist():
    A0 = StochasticMatrix([[0.3], [0.7]])
    B0 = StochasticMatrix([[1.0, 1.0]])
    with pytest.raises(ValueError):
        GroundTruth(A0, B0, doc_dist=[0.0, 1.0]).check()


def test_is_minimal_detects_duplicate_columns():
    A0 = StochasticMatrix([[0.3, 0.3], [0.7, 0.7]])
    B0 = StochasticMatrix([[0.5, 0.2, 0.6], [0.5, 0.8, 0.4]])
    ok, reason = is_minimal(A0, B0)
    assert not ok
    assert "rank" in reason


def test_products_stay_stochastic_over_random_shapes(rng):
    for _ in range(1000):
        rows, inner, cols = rng.integers(1, 7, size=3)
        C = product(random_stochastic(int(rows), int(inner), 0.0, rng),
                    random_stochastic(int(inner), int(cols), 0.0, rng))
        assert C.shape == (rows, cols)
        assert validate(C).ok
