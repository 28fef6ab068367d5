# filename: tests/processors/test_volume_estimator.py
import numpy as np
import pytest

from kernels.stochastic_matrix import GroundTruth
from processors.volume_estimator import (
    VolumeScalingConfig, box_sampler, count_hits, estimate_rlct_smf, estimate_rlct_volume, fit_volume_curve,
    rlct_equivalence_check, smf_objective, smf_prior_sampler, tent_box_sampler,
)
from state.models import ModelDims
from utils.errors import ConfigError, InsufficientResolutionError


def small_config(**overrides):
    params = dict(num_samples=200_000, t_grid=np.geomspace(1e-2, 1e-5, 12), include_log_term=False, seed=7)
    params.update(overrides)
    return VolumeScalingConfig(**params)


def square(theta):
    return theta[:, 0] ** 2


def disk(theta):
    return theta[:, 0] ** 2 + theta[:, 1] ** 2


def product_of_squares(theta):
    return theta[:, 0] ** 2 * theta[:, 1] ** 2


@pytest.mark.parametrize("objective, dim, expected", [
    (square, 1, 0.5),
    (disk, 2, 1.0),
])
def test_volume_recovers_regular_rlct(objective, dim, expected):
    estimate = estimate_rlct_volume(objective, box_sampler(dim), small_config(num_samples=1_000_000))
    assert estimate.lambda_hat == pytest.approx(expected, abs=0.05)
    assert estimate.multiplicity_hat == 1.0
    assert estimate.r_squared > 0.99


@pytest.mark.slow
def test_volume_recovers_singular_rlct_and_multiplicity():
    # V(t) = sqrt(t) (1 - log(t) / 2); small thresholds shrink the part the fit cannot model
    config = VolumeScalingConfig(num_samples=2_000_000, t_grid=np.geomspace(1e-4, 1e-10, 24), seed=3, workers=4)
    estimate = estimate_rlct_volume(product_of_squares, box_sampler(2), config)
    assert estimate.lambda_hat == pytest.approx(0.5, abs=0.05)
    assert 1.5 <= estimate.multiplicity_hat <= 2.5


def test_counts_are_deterministic_for_seed_and_workers():
    config = small_config(num_samples=20_000, workers=2, batch_size=3_000)
    first = count_hits([square], box_sampler(1), config)
    second = count_hits([square], box_sampler(1), config)
    assert np.array_equal(first, second)
    assert first.shape == (1, 12)
    # counts fall as the threshold shrinks
    assert np.all(np.diff(first[0]) <= 0)


def test_insufficient_resolution():
    config = VolumeScalingConfig(num_samples=10_000, t_grid=np.geomspace(1e-8, 1e-12, 5), seed=1)
    with pytest.raises(InsufficientResolutionError):
        estimate_rlct_volume(disk, box_sampler(2), config)


def test_fit_needs_enough_usable_thresholds():
    config = small_config()
    counts = np.zeros(12, dtype=np.int64)
    counts[:3] = 1000
    with pytest.raises(InsufficientResolutionError):
        fit_volume_curve(counts, config)


@pytest.mark.parametrize("overrides", [
    {"t_grid": [1e-3]},
    {"t_grid": [1e-4, 1e-3]},
    {"t_grid": [2.0, 1e-3]},
    {"num_samples": 100},
    {"workers": 0},
])
def test_config_validation(overrides):
    with pytest.raises(ConfigError):
        small_config(include_log_term=True, **overrides)


def test_equivalence_consistent_for_scaled_objective():
    report = rlct_equivalence_check(square, lambda theta: 2.0 * theta[:, 0] ** 2, box_sampler(1), small_config())
    assert report.consistent
    assert report.lambda_F == pytest.approx(report.lambda_G, abs=0.05)


def test_equivalence_inconsistent_for_different_orders():
    report = rlct_equivalence_check(square, disk, box_sampler(2), small_config())
    assert not report.consistent


def quartic(theta):
    return theta[:, 0] ** 4


def disk_plus_diagonal(theta):
    return disk(theta) + (theta[:, 0] + theta[:, 1]) ** 2


@pytest.mark.parametrize("objective, dim, expected", [
    (square, 1, 0.5),
    (disk, 2, 1.0),
])
def test_rlct_does_not_depend_on_prior_shape(objective, dim, expected):
    config = small_config(num_samples=1_000_000)
    uniform = estimate_rlct_volume(objective, box_sampler(dim), config)
    tent = estimate_rlct_volume(objective, tent_box_sampler(dim), config)
    assert tent.lambda_hat == pytest.approx(expected, abs=0.05)
    assert tent.lambda_hat == pytest.approx(uniform.lambda_hat, abs=0.05)


def test_tent_prior_stays_in_box():
    draws = tent_box_sampler(3)(np.random.default_rng(0), 10_000)
    assert draws.shape == (10_000, 3)
    assert draws.min() >= -1.0 and draws.max() <= 1.0


def test_adding_generator_square_keeps_rlct():
    report = rlct_equivalence_check(disk, disk_plus_diagonal, box_sampler(2), small_config(num_samples=1_000_000))
    assert report.consistent
    assert report.lambda_F == pytest.approx(1.0, abs=0.05)
    assert report.lambda_G == pytest.approx(1.0, abs=0.05)


def test_monotone_transform_keeps_rlct():
    report = rlct_equivalence_check(disk, lambda theta: disk(theta) + disk(theta) ** 2, box_sampler(2),
                                    small_config(num_samples=1_000_000))
    assert report.consistent


def test_smaller_objective_has_smaller_rlct():
    # theta^4 <= theta^2 on the box
    report = rlct_equivalence_check(quartic, square, box_sampler(1), small_config())
    assert report.lambda_F <= report.lambda_G + 2.0 * (report.stderr_F + report.stderr_G)
    assert report.lambda_F == pytest.approx(0.25, abs=0.05)
    assert not report.consistent

def test_smf_volume_for_one_topic(rng):
    dims = ModelDims(2, 2, 1, 1)
    truth = GroundTruth.sample(dims, rng, delta=0.2)
    estimate = estimate_rlct_smf(dims, truth, small_config(num_samples=100_000))
    assert estimate.lambda_hat == pytest.approx(0.5, abs=0.05)
    assert estimate.to_dict()["num_samples"] == 100_000


def test_smf_objective_rejects_unknown_name(rng):
    truth = GroundTruth.sample(ModelDims(2, 2, 1, 1), rng)
    with pytest.raises(ConfigError):
        smf_objective("hellinger", truth)


def test_smf_rejects_mismatched_truth(rng):
    truth = GroundTruth.sample(ModelDims(3, 3, 1, 1), rng)
    with pytest.raises(ConfigError):
        estimate_rlct_smf(ModelDims(2, 2, 1, 1), truth, small_config())


@pytest.mark.slow
@pytest.mark.parametrize("quad, expected, tolerance", [
    ((2, 2, 1, 1), 0.5, 0.10),
    ((2, 2, 2, 2), 1.0, 0.15),
    ((3, 3, 2, 2), 2.5, 0.25),
    ((4, 2, 2, 1), 2.0, 0.25),
])
def test_smf_volume_matches_exact_values(quad, expected, tolerance):
    dims = ModelDims(*quad)
    truth = GroundTruth.sample(dims, np.random.default_rng(101))
    estimate = estimate_rlct_smf(dims, truth, VolumeScalingConfig(num_samples=10_000_000, seed=5, workers=4))
    assert estimate.lambda_hat == pytest.approx(expected, abs=tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("quad", [(2, 2, 1, 1), (2, 2, 2, 2)])
def test_topic_kl_and_squared_error_share_rlct(quad):
    dims = ModelDims(*quad)
    truth = GroundTruth.sample(dims, np.random.default_rng(202))
    config = VolumeScalingConfig(num_samples=4_000_000, seed=6, workers=4)
    report = rlct_equivalence_check(smf_objective("kl_topic", truth), smf_objective("sq_error", truth),
                                    smf_prior_sampler(dims), config)
    assert report.consistent
