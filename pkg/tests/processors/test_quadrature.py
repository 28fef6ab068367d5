# filename: tests/processors/test_quadrature.py
import math

import numpy as np
import pytest
from scipy.special import gammaln

from processors.quadrature import dirichlet_multinomial_free_energy, marginal_likelihood_exact
from state.models import WordDataset
from utils.errors import ConfigError, NumericalGuardError

SMALL_BUDGET = dict(max_nodes=64 ** 4)


def single_token(M, N, i=0, j=0):
    counts = np.zeros((M, N), dtype=int)
    counts[i, j] = 1
    return WordDataset(counts)


@pytest.mark.parametrize("H", [1, 2])
def test_empty_dataset_has_zero_free_energy(H):
    F_n, diagnostics = marginal_likelihood_exact(WordDataset(np.zeros((2, 2), dtype=int)), H)
    assert F_n == 0.0
    assert diagnostics["converged"]


def test_one_topic_single_word_is_log_M():
    F_n, diagnostics = marginal_likelihood_exact(single_token(2, 2), 1)
    assert F_n == pytest.approx(math.log(2), rel=1e-12)
    assert diagnostics["closed_form"]


def test_one_topic_matches_beta_binomial():
    counts = np.array([[3, 2], [1, 4]])
    # pooled word counts (5, 5) under a flat Beta prior: Z = 5! 5! / 11!
    expected = -(2 * gammaln(6) - gammaln(12))
    assert dirichlet_multinomial_free_energy(WordDataset(counts), 1.0) == pytest.approx(expected, rel=1e-12)


def test_one_topic_ignores_dimension_guard():
    # d for M=N=8, H=1 is 7 but the closed form needs no grid
    counts = np.ones((8, 8), dtype=int)
    F_n, _ = marginal_likelihood_exact(WordDataset(counts), 1)
    assert math.isfinite(F_n) and F_n > 0


@pytest.mark.parametrize("i, j", [(0, 0), (1, 1), (0, 1)])
def test_two_topics_single_word_is_log_M(i, j):
    # E[(AB)_ij] = 1/M under flat column priors
    F_n, diagnostics = marginal_likelihood_exact(single_token(2, 2, i, j), 2, **SMALL_BUDGET)
    assert F_n == pytest.approx(math.log(2), abs=1e-10)
    assert diagnostics["converged"]


def test_two_topics_small_counts_converge():
    counts = np.array([[3, 1], [1, 3]])
    F_n, diagnostics = marginal_likelihood_exact(WordDataset(counts), 2, **SMALL_BUDGET)
    assert math.isfinite(F_n)
    assert diagnostics["converged"]
    assert diagnostics["nodes"] == diagnostics["depth"] ** 4
    assert diagnostics["rel_change"] < 1e-6


def test_node_budget_exhaustion_is_reported(captured_logs):
    counts = np.array([[3, 1], [1, 3]])
    _, diagnostics = marginal_likelihood_exact(WordDataset(counts), 2, max_nodes=32 ** 4)
    assert not diagnostics["converged"]
    assert "node budget" in captured_logs.text


@pytest.mark.parametrize("M, N, H", [(3, 2, 2), (2, 3, 2), (2, 2, 3)])
def test_refuses_large_dimension(M, N, H):
    with pytest.raises(NumericalGuardError):
        marginal_likelihood_exact(single_token(M, N), H)


@pytest.mark.parametrize("H", [0, 1.5])
def test_rejects_bad_H(H):
    with pytest.raises(ConfigError):
        marginal_likelihood_exact(single_token(2, 2), H)


@pytest.mark.parametrize("depth", [8, 31, 32.0])
def test_rejects_shallow_start_depth(depth):
    with pytest.raises(ConfigError, match="depth"):
        marginal_likelihood_exact(WordDataset(np.array([[3, 1], [1, 3]])), 2, depth=depth)
