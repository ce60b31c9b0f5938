import math

import numpy as np
import pytest
from scipy import stats

from diffusion import green_cdf
from fracops import FractionalOrders, GridSpec
from stochastic import (
    BLOCK_SIZE,
    FbmParams,
    StableParams,
    TrajectoryEnsemble,
    estimate_indices,
    fbm_covariance,
    fbm_paths,
    fractional_moments,
    hurst_from_eta,
    ks_distance,
    levy_flight_ensemble,
    sample_stable,
)


def test_params_validation():
    with pytest.raises(ValueError):
        StableParams(2.5)
    with pytest.raises(ValueError):
        StableParams(1.5, gamma_scale=0.0)
    with pytest.raises(ValueError):
        FbmParams(hurst=1.0, n_steps=10)
    with pytest.raises(ValueError):
        FbmParams(hurst=0.5, n_steps=0)
    assert StableParams(1.5, gamma_scale=8.0).sigma == pytest.approx(4.0)


def test_hurst_from_eta():
    assert hurst_from_eta(0.6) == pytest.approx(0.3)
    assert FbmParams.from_eta(1.0, 16).hurst == 0.5
    with pytest.raises(ValueError):
        hurst_from_eta(0.0)


def test_gaussian_case_variance():
    draws = sample_stable(StableParams(2.0, gamma_scale=0.5), 1_000_000, seed=11)
    assert 0.995 <= np.var(draws) <= 1.005


def test_cauchy_case_median():
    gamma = 0.8
    draws = sample_stable(StableParams(1.0, gamma_scale=gamma), 1_000_000, seed=12)
    assert np.median(np.abs(draws)) == pytest.approx(gamma, rel=0.01)


def test_characteristic_function():
    n = 200_000
    params = StableParams(1.5, gamma_scale=0.7)
    draws = sample_stable(params, n, seed=13)
    for k in (0.3, 1.0, 2.0):
        empirical = np.mean(np.cos(k * draws))
        assert empirical == pytest.approx(math.exp(-0.7 * k ** 1.5), abs=3 / math.sqrt(n))


@pytest.mark.parametrize("mu, seed", [(1.0, 21), (1.5, 23), (2.0, 25)])
def test_sums_are_self_similar(mu, seed):
    params = StableParams(mu)
    steps = 16
    flights = levy_flight_ensemble(params, 100_000, steps, dt=1.0, seed=seed)
    rescaled = flights.positions[:, -1] / steps ** (1 / mu)
    single = sample_stable(params, 100_000, seed=seed + 1)
    assert stats.ks_2samp(rescaled, single).pvalue > 0.01


def test_sampling_is_deterministic():
    params = StableParams(1.7)
    first = sample_stable(params, BLOCK_SIZE + 100, seed=5)
    assert np.array_equal(first, sample_stable(params, BLOCK_SIZE + 100, seed=5))
    assert np.array_equal(first[:BLOCK_SIZE], sample_stable(params, BLOCK_SIZE, seed=5))
    assert not np.array_equal(first, sample_stable(params, BLOCK_SIZE + 100, seed=6))


def test_sampling_rejects_bad_seed():
    with pytest.raises(ValueError):
        sample_stable(StableParams(1.5), 10, seed=-1)
    with pytest.raises(ValueError):
        sample_stable(StableParams(1.5), 0, seed=1)


def test_flights_match_diffusion_green_function():
    params = StableParams(1.5)
    flights = levy_flight_ensemble(params, 1_000_000, 1, dt=1.0, seed=31)
    grid = GridSpec.centered(2 ** 14, 400.0)
    cdf = green_cdf(FractionalOrders(1.0, 1.5), 1.0, grid, 1.0)
    assert ks_distance(flights.positions[:, 1], cdf) <= 0.01


def test_flight_ensemble_shape():
    flights = levy_flight_ensemble(StableParams(1.5), 10, 5, dt=0.5, seed=1)
    assert flights.positions.shape == (10, 6)
    assert np.all(flights.positions[:, 0] == 0)
    assert flights.times[-1] == 2.5
    assert flights.kind == "levy"


def test_ensemble_validation():
    with pytest.raises(ValueError):
        TrajectoryEnsemble(2, np.arange(3.0), np.ones((2, 3)), 0, "levy")
    with pytest.raises(ValueError):
        TrajectoryEnsemble(2, np.arange(3.0), np.zeros((2, 3)), 0, "brownian")


def test_brownian_increments_are_uncorrelated():
    paths = fbm_paths(FbmParams(0.5, 256), 4000, seed=41)
    increments = np.diff(paths.positions, axis=1)
    lagged = np.mean(increments[:, 1:] * increments[:, :-1])
    assert lagged == pytest.approx(0.0, abs=0.01)
    assert np.mean(increments ** 2) == pytest.approx(1.0, rel=0.01)


def test_fbm_second_moment_slope():
    paths = fbm_paths(FbmParams(0.3, 512, dt=0.1), 10_000, seed=42)
    moments = np.mean(paths.positions[:, 1:] ** 2, axis=0)
    slope = np.polyfit(np.log(paths.times[1:]), np.log(moments), 1)[0]
    assert slope == pytest.approx(0.6, abs=0.05)


@pytest.mark.parametrize("method", ["circulant", "cholesky"])
def test_fbm_covariance(method):
    n = 20_000
    params = FbmParams(0.7, 16)
    paths = fbm_paths(params, n, seed=43, method=method)
    expected = fbm_covariance(0.7, paths.times[1:])
    empirical = paths.positions[:, 1:].T @ paths.positions[:, 1:] / n
    assert empirical.shape == (16, 16)
    tolerance = 5 * np.sqrt(2 * np.outer(np.diag(expected), np.diag(expected)) / n)
    assert np.all(np.abs(empirical - expected) <= tolerance)


def test_fbm_rejects_unknown_method():
    with pytest.raises(ValueError):
        fbm_paths(FbmParams(0.5, 8), 10, seed=1, method="hosking")


def test_estimate_levy_index():
    flights = levy_flight_ensemble(StableParams(1.5), 20_000, 500, dt=1.0, seed=51)
    estimate, halfwidth = estimate_indices(flights)
    assert 1.45 <= estimate <= 1.55
    assert halfwidth > 0


def test_fractional_moment_growth():
    flights = levy_flight_ensemble(StableParams(1.5), 20_000, 500, dt=1.0, seed=52)
    times = flights.times[1:]
    moments = fractional_moments(flights, 0.75)[1:]
    slope = np.polyfit(np.log(times), np.log(moments), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_estimate_hurst_index():
    paths = fbm_paths(FbmParams(0.5, 512), 2000, seed=53)
    estimate, halfwidth = estimate_indices(paths)
    assert 0.475 <= estimate <= 0.525
    assert halfwidth >= 0


def test_estimate_rejects_degenerate_ensembles():
    frozen = TrajectoryEnsemble(100, np.arange(20.0), np.zeros((100, 20)), 0, "fbm")
    with pytest.raises(ValueError):
        estimate_indices(frozen)
    short = fbm_paths(FbmParams(0.5, 5), 200, seed=1)
    with pytest.raises(ValueError):
        estimate_indices(short)
    few = fbm_paths(FbmParams(0.5, 64), 20, seed=1)
    with pytest.raises(ValueError):
        estimate_indices(few)


def test_fractional_moments_reject_bad_order():
    flights = levy_flight_ensemble(StableParams(1.5), 10, 5, dt=1.0, seed=1)
    with pytest.raises(ValueError):
        fractional_moments(flights, 0.0)


def test_ks_distance_of_exact_law():
    draws = sample_stable(StableParams(2.0), 50_000, seed=61)
    assert ks_distance(draws, stats.norm(scale=math.sqrt(2)).cdf) < 0.01
