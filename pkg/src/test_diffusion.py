import logging
import math

import numpy as np
import pytest
from scipy import stats

from diffusion import (
    DiffusionProblem,
    classify_regime,
    fractional_msd,
    green_cdf,
    green_density,
    mode_factors,
    moment_exponent,
    solve_l1_stepping,
    solve_mode_exact,
)
from fracops import ComplexField, FractionalOrders, GridSpec, mittag_leffler, riesz_multiplier

E_HALF_MINUS_ONE = 0.42758357615580705


def cosine_problem(eta, mu, gamma=1.0, n=16):
    """Single mode k = 1 on [0, 2 pi)"""
    grid = GridSpec(n, 2 * np.pi)
    initial = ComplexField.from_function(grid, np.cos)
    return DiffusionProblem(FractionalOrders(eta, mu), gamma, grid, initial)


def mode_one_factor(solution, index=-1):
    return solution.snapshots[index].spectrum()[1] / solution.problem.initial.spectrum()[1]


def point_mass_problem(eta, mu, n=512, length=20.0, gamma=1.0):
    grid = GridSpec.centered(n, length)
    return DiffusionProblem(FractionalOrders(eta, mu), gamma, grid, ComplexField.delta(grid, 0.0))


def test_problem_validation():
    grid = GridSpec(16, 1.0)
    initial = ComplexField(grid, np.ones(16))
    with pytest.raises(ValueError):
        DiffusionProblem(FractionalOrders(1, 2), 0.0, grid, initial)
    with pytest.raises(ValueError):
        DiffusionProblem(FractionalOrders(1, 2), 1.0, GridSpec(16, 2.0), initial)


def test_heat_mode_decays_exponentially():
    solution = solve_mode_exact(cosine_problem(1.0, 2.0), [1.0])
    assert mode_one_factor(solution) == pytest.approx(math.exp(-1.0), rel=1e-14)
    expected = math.exp(-1.0) * solution.problem.initial.values
    assert np.max(np.abs(solution.snapshots[0].values - expected)) < 1e-14


def test_time_zero_is_identity():
    problem = cosine_problem(0.3, 0.8)
    solution = solve_mode_exact(problem, [0.0, 0.5])
    assert solution.snapshots[0] is problem.initial


def test_fractional_mode_factor():
    solution = solve_mode_exact(cosine_problem(0.5, 1.5), [1.0])
    assert mode_one_factor(solution).real == pytest.approx(E_HALF_MINUS_ONE, rel=1e-10)


def test_mode_exact_rejects_unsorted_times():
    with pytest.raises(ValueError):
        solve_mode_exact(cosine_problem(1, 2), [1.0, 0.5])
    with pytest.raises(ValueError):
        solve_mode_exact(cosine_problem(1, 2), [-1.0])


def test_backward_euler_step():
    solution = solve_l1_stepping(cosine_problem(1.0, 2.0), dt=1.0, steps=1)
    assert mode_one_factor(solution).real == pytest.approx(0.5, rel=1e-14)


def test_zero_steps_returns_initial():
    problem = cosine_problem(0.5, 2.0)
    solution = solve_l1_stepping(problem, dt=0.1, steps=0)
    assert list(solution.times) == [0.0]
    assert solution.snapshots[0] is problem.initial


@pytest.mark.parametrize("dt", [0.0, -0.1, float("inf")])
def test_l1_rejects_bad_step(dt):
    with pytest.raises(ValueError):
        solve_l1_stepping(cosine_problem(0.5, 2.0), dt=dt, steps=10)


def test_l1_uniform_matches_mittag_leffler():
    solution = solve_l1_stepping(cosine_problem(0.5, 2.0), dt=1e-3, steps=1000)
    assert solution.times[-1] == pytest.approx(1.0)
    assert abs(mode_one_factor(solution) - E_HALF_MINUS_ONE) <= 1e-3 * E_HALF_MINUS_ONE


@pytest.mark.parametrize("eta", [0.4, 0.7])
def test_l1_graded_matches_mittag_leffler(eta):
    solution = solve_l1_stepping(cosine_problem(eta, 2.0, n=4), dt=1e-3, steps=1000, grading=(2 - eta) / eta)
    exact = mittag_leffler(eta, -1.0).real
    assert solution.times[-1] == pytest.approx(1.0)
    assert abs(mode_one_factor(solution) - exact) <= 1e-3 * exact


@pytest.mark.parametrize("eta", [0.4, 0.7, 1.0])
def test_l1_convergence_order(eta):
    exact = mittag_leffler(eta, -1.0).real
    grading = (2 - eta) / eta
    errors = []
    for steps in (100, 200, 400):
        solution = solve_l1_stepping(cosine_problem(eta, 2.0, n=4), dt=1.0 / steps, steps=steps, grading=grading)
        errors.append(abs(mode_one_factor(solution) - exact))
    order = math.log2(errors[-2] / errors[-1])
    assert abs(order - (2 - eta)) <= 0.3


@pytest.mark.parametrize("solver", ["mode", "l1"])
def test_mass_is_conserved(solver):
    grid = GridSpec(64, 10.0)
    rng = np.random.default_rng(3)
    problem = DiffusionProblem(FractionalOrders(0.6, 1.2), 0.7, grid, ComplexField(grid, rng.random(64)))
    if solver == "mode":
        solution = solve_mode_exact(problem, [0.1, 1.0, 10.0])
    else:
        solution = solve_l1_stepping(problem, dt=0.05, steps=50)
    mass = problem.initial.spectrum()[0]
    for snapshot in solution.snapshots:
        assert abs(snapshot.spectrum()[0] - mass) <= 1e-12 * abs(mass)


def test_gaussian_limit_stays_nonnegative():
    solution = solve_mode_exact(point_mass_problem(1.0, 2.0), [0.05, 0.5, 1.0])
    for snapshot in solution.snapshots:
        density = snapshot.real
        assert density.min() >= -1e-10 * density.max()


@pytest.mark.parametrize("mu", [0.5, 1.0, 1.5])
def test_levy_kernel_stays_nonnegative(mu):
    grid = GridSpec.centered(4096, 20.0)
    for t in (1.0, 2.0):
        density = green_density(FractionalOrders(1.0, mu), 1.0, grid, t)
        assert density.min() >= -1e-6 * density.max()


def test_gaussian_limit_matches_heat_kernel():
    problem = point_mass_problem(1.0, 2.0)
    density = solve_mode_exact(problem, [1.0]).snapshots[0].real
    x = problem.grid.points
    images = np.arange(-3, 4)[:, None] * problem.grid.length
    kernel = np.sum(np.exp(-((x[None, :] - images) ** 2) / 4.0), axis=0) / math.sqrt(4 * math.pi)
    assert np.max(np.abs(density - kernel)) <= 1e-6 * kernel.max()


@pytest.mark.parametrize("eta, mu", [(1.0, 2.0), (0.5, 2.0), (1.0, 0.7), (0.3, 1.5)])
def test_mode_factors_do_not_grow(eta, mu):
    grid = GridSpec(32, 2 * np.pi)
    orders = FractionalOrders(eta, mu)
    eigenvalues = riesz_multiplier(grid, orders).eigenvalues
    previous = np.ones(grid.n)
    for t in np.geomspace(1e-3, 1e2, 15):
        current = np.abs(mode_factors(orders, 1.0, eigenvalues, t))
        assert np.all(current <= previous + 1e-14)
        previous = current


def test_second_moment_of_gaussian():
    solution = solve_mode_exact(point_mass_problem(1.0, 2.0), [0.0, 0.01])
    moments = fractional_msd(solution, 2.0)
    assert moments[0] < 1e-20
    assert moments[1] == pytest.approx(0.02, rel=0.02)


def test_levy_moment_slope():
    times = np.geomspace(0.01, 0.1, 6)
    solution = solve_mode_exact(point_mass_problem(1.0, 1.5, n=8192, length=100.0), times)
    moments = fractional_msd(solution, 1.0)
    slope = np.polyfit(np.log(times), np.log(moments), 1)[0]
    assert slope == pytest.approx(1 / 1.5, abs=0.05)


def test_moment_order_is_validated():
    solution = solve_mode_exact(point_mass_problem(1.0, 1.5, n=64), [0.1])
    with pytest.raises(ValueError):
        fractional_msd(solution, 1.5)
    gaussian = solve_mode_exact(point_mass_problem(1.0, 2.0, n=64), [0.1])
    with pytest.raises(ValueError):
        fractional_msd(gaussian, 2.5)
    assert fractional_msd(gaussian, 2.0)[0] > 0


def test_wraparound_is_reported(caplog):
    solution = solve_mode_exact(point_mass_problem(1.0, 2.0, n=64, length=10.0), [10.0])
    with caplog.at_level(logging.WARNING):
        fractional_msd(solution, 2.0)
    assert "wraparound" in caplog.text


def test_green_cdf_is_gaussian_at_mu_two():
    grid = GridSpec.centered(1024, 40.0)
    cdf = green_cdf(FractionalOrders(1.0, 2.0), 1.0, grid, 1.0)
    x = np.array([-3.0, -1.0, 0.0, 0.5, 2.0])
    assert cdf(x) == pytest.approx(stats.norm.cdf(x, scale=math.sqrt(2.0)), abs=1e-4)
    assert cdf(np.array([-100.0, 100.0])) == pytest.approx([0.0, 1.0])


def test_green_density_has_unit_mass():
    grid = GridSpec.centered(256, 20.0)
    density = green_density(FractionalOrders(0.7, 1.2), 0.5, grid, 0.3)
    assert np.sum(density) * grid.spacing == pytest.approx(1.0, rel=1e-12)


def test_regimes():
    assert classify_regime(FractionalOrders(1, 2)) == "normal"
    assert classify_regime(FractionalOrders(1, 1.5)) == "superdiffusion"
    assert classify_regime(FractionalOrders(0.5, 2)) == "subdiffusion"
    assert classify_regime(FractionalOrders(0.5, 1.5)) == "mixed"
    assert moment_exponent(FractionalOrders(0.6, 2), 2.0) == pytest.approx(0.6)
