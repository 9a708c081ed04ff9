import math

import numpy as np
import pytest

from spalp.gmm import (
    COV_FLOOR,
    GaussianMixture,
    ModelTooLargeError,
    fit_em,
    log_likelihood,
    sample_component,
    select_and_fit,
)

LOG_2PI = 1.83787706640934548356
# log(0.5 * N(0; 0, 1) + 0.5 * N(0; 10, 1)) at 30 digits
TWO_BUMP_LL = -1.61208571376461805120


def two_blobs(n, seed=0, centers=((0.0, 0.0), (10.0, 10.0))):
    rng = np.random.default_rng(seed)
    half = n // 2
    return np.vstack([rng.normal(centers[0], 1.0, (half, 2)), rng.normal(centers[1], 1.0, (n - half, 2))])


def standard(dim=2):
    return GaussianMixture(np.ones(1), np.zeros((1, dim)), np.eye(dim)[None])


class TestLogLikelihood:
    def test_density_at_mean(self):
        assert log_likelihood(standard(), [[0.0, 0.0]]) == pytest.approx(-LOG_2PI, abs=1e-12)

    def test_additive_over_points(self):
        one = log_likelihood(standard(), [[0.3, -1.2]])
        assert log_likelihood(standard(), [[0.3, -1.2], [0.3, -1.2]]) == pytest.approx(2 * one, rel=1e-14)

    def test_far_component_negligible(self):
        mix = GaussianMixture([0.5, 0.5], [[0.0], [10.0]], [[[1.0]], [[1.0]]])
        assert log_likelihood(mix, [[0.0]]) == pytest.approx(TWO_BUMP_LL, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            log_likelihood(standard(2), [[0.0, 0.0, 0.0]])


class TestFitEM:
    def test_single_component_is_sample_mean(self):
        mix = fit_em([(0, 0), (1, 1)], 1)
        np.testing.assert_allclose(mix.means[0], [0.5, 0.5])
        assert mix.weights[0] == pytest.approx(1.0)

    def test_recovers_separated_blobs(self):
        mix = fit_em(two_blobs(200), 2, seed=3)
        order = np.argsort(mix.means[:, 0])
        np.testing.assert_allclose(mix.means[order], [[0, 0], [10, 10]], atol=0.5)
        np.testing.assert_allclose(mix.weights[order], [0.5, 0.5], atol=0.1)

    def test_degenerate_data_hits_floor(self):
        mix = fit_em([(0.0, 0.0)] * 10, 1)
        np.testing.assert_allclose(mix.covariances[0], COV_FLOOR * np.eye(2), atol=1e-15)

    def test_too_many_components(self):
        with pytest.raises(ModelTooLargeError):
            fit_em([(0, 0), (1, 1)], 3)

    def test_ragged_data(self):
        with pytest.raises(ValueError):
            fit_em([(0, 0), (1, 1, 1)], 1)

    @pytest.mark.parametrize("seed", range(6))
    def test_sound_on_random_problems(self, seed):
        rng = np.random.default_rng(seed)
        dim, k = int(rng.integers(1, 5)), int(rng.integers(1, 7))
        n = int(rng.integers(max(k, 5), 300))
        data = rng.normal(size=(n, dim)) * rng.uniform(0.01, 3, dim) + rng.integers(0, 3, (n, 1))
        mix = fit_em(data, k, seed=seed)
        assert np.diff(mix.trace).min(initial=0.0) >= -1e-9
        assert mix.weights.sum() == pytest.approx(1.0, abs=1e-9)
        for cov in mix.covariances:
            np.linalg.cholesky(cov)
            assert np.linalg.eigvalsh(cov).min() >= COV_FLOOR * (1 - 1e-9)
        assert mix.trace[-1] == pytest.approx(log_likelihood(mix, data), rel=1e-9, abs=1e-7)

    def test_heavily_duplicated_data_stays_monotone(self):
        # toy-env style: most ALPs are exactly zero and positions repeat
        rng = np.random.default_rng(1)
        pos = rng.integers(0, 4, (250, 2)) / 4.0
        alp = np.where(rng.random(250) < 0.9, 0.0, rng.random(250) * 0.02)
        mix = fit_em(np.column_stack([pos, alp]), 8, seed=2)
        assert np.diff(mix.trace).min() >= -1e-9

    def test_deterministic(self):
        data = two_blobs(100, seed=5)
        a, b = fit_em(data, 3, seed=11), fit_em(data, 3, seed=11)
        assert a.trace == b.trace
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.covariances, b.covariances)

    def test_permutation_invariant_given_init(self):
        data = two_blobs(120, seed=9)
        init = data[[0, 70, 119]]
        perm = np.random.default_rng(0).permutation(len(data))
        a = fit_em(data, 3, init_means=init)
        b = fit_em(data[perm], 3, init_means=init)
        assert abs(a.aic(data) - b.aic(data)) < 1e-6


class TestSelectAndFit:
    def test_single_gaussian(self):
        data = np.random.default_rng(4).normal(size=(300, 2))
        mix = select_and_fit(data, 1, 3, seed=0)
        ll_one = fit_em(data, 1).trace[-1]
        assert log_likelihood(mix, data) >= ll_one - 1e-6
        assert mix.aic(data) <= 2 * fit_em(data, 1).n_parameters - 2 * ll_one + 1e-6

    def test_two_gaussians_select_two(self):
        assert select_and_fit(two_blobs(300, seed=2), 1, 5, seed=0).k == 2

    def test_range_truncated_to_data_size(self):
        mix = select_and_fit([(0.0, 0.0), (1.0, 1.0)], 1, 5)
        assert mix.k in (1, 2)

    def test_parameter_count(self):
        mix = fit_em(two_blobs(50), 2)
        assert mix.n_parameters == 1 + 2 * 2 + 2 * 3

    def test_errors(self):
        with pytest.raises(ValueError):
            select_and_fit(np.empty((0, 2)), 1, 2)
        with pytest.raises(ValueError):
            select_and_fit([(0, 0)], 3, 2)


class TestSampleComponent:
    def test_tight_component(self):
        mix = GaussianMixture([1.0], [[1.0, 1.0]], [COV_FLOOR * np.eye(2)])
        rng = np.random.default_rng(0)
        draws = np.array([sample_component(mix, 0, rng) for _ in range(1000)])
        assert np.abs(draws - 1.0).max() < 0.01
        sigma = math.sqrt(COV_FLOOR)
        assert np.all(np.abs(draws.mean(axis=0) - 1.0) < 3 * sigma / math.sqrt(1000))

    def test_same_seed_same_sample(self):
        mix = fit_em(two_blobs(40), 2)
        a = sample_component(mix, 1, np.random.default_rng(7))
        b = sample_component(mix, 1, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_moments_match(self):
        cov = np.array([[2.0, 0.6], [0.6, 0.5]])
        mix = GaussianMixture([1.0], [[3.0, -1.0]], [cov])
        rng = np.random.default_rng(1)
        draws = np.array([sample_component(mix, 0, rng) for _ in range(10000)])
        se = np.sqrt(np.diag(cov) / 10000)
        assert np.all(np.abs(draws.mean(axis=0) - [3.0, -1.0]) < 4 * se)
        np.testing.assert_allclose(np.cov(draws.T), cov, atol=0.08)

    def test_bad_index(self):
        with pytest.raises(ValueError):
            sample_component(standard(), 1, np.random.default_rng())
