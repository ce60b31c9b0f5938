import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.interpolate import PchipInterpolator

from fracops import (
    ComplexField,
    FractionalOrders,
    GridSpec,
    caputo_l1_weights,
    mittag_leffler_array,
    riesz_multiplier,
)

logger = logging.getLogger(__name__)

# Moments are trusted only while this much mass stays within L/4 of the centroid
MASS_CONFINEMENT = 0.99


@dataclass(frozen=True, eq=False)
class DiffusionProblem:
    """Fractional diffusion on a periodic grid: d^eta s/dt^eta + gamma (-Delta)^{mu/2} s = 0"""

    orders: FractionalOrders
    gamma: float
    grid: GridSpec
    initial: ComplexField

    def __post_init__(self):
        if not self.gamma > 0 or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.initial.grid != self.grid:
            raise ValueError("initial field lives on a different grid")


@dataclass(frozen=True, eq=False)
class DiffusionSolution:
    times: np.ndarray
    snapshots: Tuple[ComplexField, ...]
    problem: DiffusionProblem

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("times must be a non-empty 1-D array")
        if times[0] < 0 or np.any(np.diff(times) <= 0):
            raise ValueError("times must be nonnegative and strictly increasing")
        if len(self.snapshots) != times.size:
            raise ValueError(f"{len(self.snapshots)} snapshots for {times.size} times")
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", tuple(self.snapshots))


def mode_factors(orders: FractionalOrders, gamma: float, eigenvalues: np.ndarray, t: float) -> np.ndarray:
    """Relaxation factors E_eta(-gamma * lambda * t^eta) per mode"""
    return mittag_leffler_array(orders.eta, -gamma * eigenvalues * t ** orders.eta)


def _check_times(times: Sequence[float]) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(times)) or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be finite, nonnegative and strictly increasing")
    return times


def solve_mode_exact(problem: DiffusionProblem, times: Sequence[float]) -> DiffusionSolution:
    """Evolve every Fourier mode with its exact Mittag-Leffler factor"""
    times = _check_times(times)
    grid = problem.grid
    eigenvalues = riesz_multiplier(grid, problem.orders).eigenvalues
    spectrum = problem.initial.spectrum()
    logger.info(
        f"Mode-exact solve: eta={problem.orders.eta}, mu={problem.orders.mu}, "
        f"gamma={problem.gamma}, n={grid.n}, {times.size} times up to t={times[-1]}"
    )

    snapshots = []
    for t in times:
        if t == 0:
            snapshots.append(problem.initial)
            continue
        factors = mode_factors(problem.orders, problem.gamma, eigenvalues, t)
        snapshots.append(ComplexField.from_spectrum(grid, factors * spectrum))
    return DiffusionSolution(times, tuple(snapshots), problem)


def solve_l1_stepping(
    problem: DiffusionProblem, dt: float, steps: int, grading: float = 1.0
) -> DiffusionSolution:
    """Caputo L1 time stepping with the Laplacian term treated implicitly per mode.

    The horizon is dt * steps. With grading r > 1 the nodes are
    t_m = horizon * (m / steps)^r and the nonuniform L1 weights are used.
    """
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    if int(steps) != steps or steps < 0:
        raise ValueError(f"steps must be a nonnegative integer, got {steps}")
    if not grading >= 1:
        raise ValueError(f"grading must be >= 1, got {grading}")
    steps = int(steps)
    if steps == 0:
        return DiffusionSolution(np.array([0.0]), (problem.initial,), problem)

    eta = problem.orders.eta
    grid = problem.grid
    eigenvalues = riesz_multiplier(grid, problem.orders).eigenvalues
    stiffness = special.gamma(2 - eta) * problem.gamma * eigenvalues
    logger.info(
        f"L1 stepping: eta={eta}, mu={problem.orders.mu}, gamma={problem.gamma}, "
        f"n={grid.n}, steps={steps}, horizon={dt * steps}, grading={grading}"
    )

    history = np.empty((steps + 1, grid.n), dtype=complex)
    history[0] = problem.initial.spectrum()

    if grading == 1:
        times = dt * np.arange(steps + 1)
        weights = caputo_l1_weights(eta, steps)
        drops = weights[:-1] - weights[1:]
        diagonal = weights[0] + dt ** eta * stiffness
        for m in range(1, steps + 1):
            rhs = weights[m - 1] * history[0]
            if m >= 2:
                rhs = rhs + drops[: m - 1] @ history[m - 1 : 0 : -1]
            history[m] = rhs / diagonal
    else:
        times = dt * steps * (np.arange(steps + 1) / steps) ** grading
        tau = np.diff(times)
        power = 1.0 - eta
        for m in range(1, steps + 1):
            if eta == 1:
                coefficients = np.zeros(m)
                coefficients[-1] = 1.0 / tau[m - 1]
            else:
                t_m = times[m]
                coefficients = ((t_m - times[:m]) ** power - (t_m - times[1 : m + 1]) ** power) / tau[:m]
            rhs = coefficients[-1] * history[m - 1]
            if m >= 2:
                rhs = rhs - coefficients[:-1] @ (history[1:m] - history[: m - 1])
            history[m] = rhs / (coefficients[-1] + stiffness)

    snapshots = [problem.initial]
    snapshots.extend(ComplexField.from_spectrum(grid, history[m]) for m in range(1, steps + 1))
    return DiffusionSolution(times, tuple(snapshots), problem)


def centroid(field: ComplexField) -> float:
    """Circular mean position of a density on the periodic grid"""
    grid = field.grid
    angles = 2 * np.pi * (grid.points - grid.origin) / grid.length
    resultant = np.sum(field.real * np.exp(1j * angles))
    angle = float(np.angle(resultant)) % (2 * np.pi)
    return grid.origin + angle * grid.length / (2 * np.pi)


def minimal_image(grid: GridSpec, x0: float) -> np.ndarray:
    return (grid.points - x0 + grid.length / 2) % grid.length - grid.length / 2


def fractional_msd(solution: DiffusionSolution, delta: Optional[float] = None) -> np.ndarray:
    """Fractional moment <|x - x0|^delta>(t) of each snapshot taken as a density"""
    mu = solution.problem.orders.mu
    if delta is None:
        delta = 0.9 * mu
    if mu < 2 and not 0 < delta < mu:
        raise ValueError(f"delta must lie in (0, mu={mu}) for Levy regimes, got {delta}")
    if mu == 2 and not 0 < delta <= 2:
        raise ValueError(f"delta must lie in (0, 2], got {delta}")

    grid = solution.problem.grid
    h = grid.spacing
    x0 = centroid(solution.problem.initial)
    distance = minimal_image(grid, x0)
    inner = np.abs(distance) <= grid.length / 4

    moments = np.empty(solution.times.size)
    for i, (t, snapshot) in enumerate(zip(solution.times, solution.snapshots)):
        density = snapshot.real
        total = np.sum(density) * h
        if not total > 0:
            raise ValueError(f"snapshot at t={t} carries no positive mass")
        density = density / total
        confined = np.sum(density[inner]) * h
        if confined < MASS_CONFINEMENT:
            logger.warning(
                f"Only {confined:.4f} of the mass lies within L/4 of x0 at t={t}; "
                f"wraparound contaminates the moment"
            )
        moments[i] = np.sum(np.abs(distance) ** delta * density) * h
    return moments


def green_density(
    orders: FractionalOrders, gamma: float, grid: GridSpec, t: float, center: float = 0.0
) -> np.ndarray:
    """Density at time t evolved from a point mass at center"""
    problem = DiffusionProblem(orders, gamma, grid, ComplexField.delta(grid, center))
    return solve_mode_exact(problem, [t]).snapshots[0].real


def green_cdf(
    orders: FractionalOrders, gamma: float, grid: GridSpec, t: float, center: float = 0.0
) -> Callable[[np.ndarray], np.ndarray]:
    """Monotone cubic interpolant of the cumulative Green's function"""
    density = np.clip(green_density(orders, gamma, grid, t, center), 0.0, None)
    h = grid.spacing
    edges = np.concatenate([[grid.origin - h / 2], grid.points + h / 2])
    cumulative = np.concatenate([[0.0], np.cumsum(density) * h])
    cumulative /= cumulative[-1]
    interpolant = PchipInterpolator(edges, cumulative)

    def cdf(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.clip(interpolant(np.clip(x, edges[0], edges[-1])), 0.0, 1.0)

    return cdf


def classify_regime(orders: FractionalOrders) -> str:
    if orders.eta == 1 and orders.mu == 2:
        return "normal"
    if orders.eta == 1:
        return "superdiffusion"
    if orders.mu == 2:
        return "subdiffusion"
    return "mixed"


def moment_exponent(orders: FractionalOrders, delta: float) -> float:
    """Growth exponent of <|x|^delta>, delta * eta / mu"""
    return delta * orders.eta / orders.mu
