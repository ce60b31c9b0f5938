import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import linalg, stats

logger = logging.getLogger(__name__)

# Paths (or draws) per independently seeded generator stream
BLOCK_SIZE = 4096
MIN_PATHS = 100
MIN_TIME_POINTS = 8
MIN_DECADES = 2.0
ESTIMATE_POINTS = 24
EMBEDDING_TOLERANCE = 1e-10


@dataclass(frozen=True)
class StableParams:
    """Symmetric stable law with characteristic function exp(-gamma_scale |k|^mu)"""

    mu_stability: float
    gamma_scale: float = 1.0

    def __post_init__(self):
        if not 0 < self.mu_stability <= 2:
            raise ValueError(f"stability index must lie in (0, 2], got {self.mu_stability}")
        if not self.gamma_scale > 0 or not math.isfinite(self.gamma_scale):
            raise ValueError(f"gamma_scale must be positive, got {self.gamma_scale}")

    @property
    def sigma(self) -> float:
        return self.gamma_scale ** (1.0 / self.mu_stability)


def hurst_from_eta(eta: float) -> float:
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return eta / 2


@dataclass(frozen=True)
class FbmParams:
    hurst: float
    n_steps: int
    dt: float = 1.0

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise ValueError(f"hurst must lie in (0, 1), got {self.hurst}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps}")
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_eta(cls, eta: float, n_steps: int, dt: float = 1.0) -> "FbmParams":
        return cls(hurst=hurst_from_eta(eta), n_steps=n_steps, dt=dt)


@dataclass(frozen=True, eq=False)
class TrajectoryEnsemble:
    n_paths: int
    times: np.ndarray
    positions: np.ndarray
    seed: int
    kind: str
    params: Optional[Union[StableParams, FbmParams]] = None

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        positions = np.asarray(self.positions, dtype=float)
        if positions.shape != (self.n_paths, times.size):
            raise ValueError(f"positions shape {positions.shape} != ({self.n_paths}, {times.size})")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(positions[:, 0] != 0):
            raise ValueError("all paths must start at the origin")
        if self.kind not in ("levy", "fbm"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "positions", positions)


def _check_seed(seed: int) -> int:
    if int(seed) != seed or not 0 <= seed < 2 ** 64:
        raise ValueError(f"seed must be a 64-bit nonnegative integer, got {seed}")
    return int(seed)


def _check_count(name: str, value: int) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one block of draws, fixed by (seed, block)"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _blocks(total: int):
    for block, start in enumerate(range(0, total, BLOCK_SIZE)):
        yield block, start, min(start + BLOCK_SIZE, total)


def _standard_stable(rng: np.random.Generator, alpha: float, shape) -> np.ndarray:
    """Chambers-Mallows-Stuck draws with characteristic function exp(-|k|^alpha)"""
    v = rng.uniform(-np.pi / 2, np.pi / 2, size=shape)
    w = rng.standard_exponential(size=shape)
    if alpha == 1:
        return np.tan(v)
    return np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha) * (np.cos(v - alpha * v) / w) ** ((1.0 - alpha) / alpha)


def sample_stable(params: StableParams, n: int, seed: int) -> np.ndarray:
    n = _check_count("n", n)
    seed = _check_seed(seed)
    draws = np.empty(n)
    for block, start, stop in _blocks(n):
        rng = block_generator(seed, block)
        draws[start:stop] = _standard_stable(rng, params.mu_stability, stop - start)
    return params.sigma * draws


def levy_flight_ensemble(params: StableParams, n_paths: int, n_steps: int, dt: float, seed: int) -> TrajectoryEnsemble:
    """Cumulative sums of stable increments with per-step scale gamma * dt"""
    n_paths = _check_count("n_paths", n_paths)
    n_steps = _check_count("n_steps", n_steps)
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    seed = _check_seed(seed)
    step_scale = (params.gamma_scale * dt) ** (1.0 / params.mu_stability)
    logger.info(
        f"Levy flights: mu={params.mu_stability}, gamma={params.gamma_scale}, "
        f"{n_paths} paths x {n_steps} steps, dt={dt}, seed={seed}"
    )

    positions = np.zeros((n_paths, n_steps + 1))
    for block, start, stop in _blocks(n_paths):
        rng = block_generator(seed, block)
        increments = step_scale * _standard_stable(rng, params.mu_stability, (stop - start, n_steps))
        positions[start:stop, 1:] = np.cumsum(increments, axis=1)
    times = dt * np.arange(n_steps + 1)
    return TrajectoryEnsemble(n_paths, times, positions, seed, "levy", params)


def fgn_autocovariance(hurst: float, lags: np.ndarray) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise"""
    lags = np.abs(np.asarray(lags, dtype=float))
    two_h = 2 * hurst
    return 0.5 * (np.abs(lags + 1) ** two_h - 2 * lags ** two_h + np.abs(lags - 1) ** two_h)


def fbm_covariance(hurst: float, times: np.ndarray) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    two_h = 2 * hurst
    return 0.5 * (t[:, None] ** two_h + t[None, :] ** two_h - np.abs(t[:, None] - t[None, :]) ** two_h)


def circulant_eigenvalues(hurst: float, n_steps: int) -> np.ndarray:
    """Eigenvalues of the 2n circulant embedding of the fGn covariance"""
    first_row = fgn_autocovariance(hurst, np.concatenate([np.arange(n_steps + 1), np.arange(n_steps - 1, 0, -1)]))
    return np.fft.fft(first_row).real


def fbm_paths(params: FbmParams, n_paths: int, seed: int, method: str = "circulant") -> TrajectoryEnsemble:
    """Exact-covariance fBm by circulant embedding, with Cholesky as fallback"""
    n_paths = _check_count("n_paths", n_paths)
    seed = _check_seed(seed)
    if method not in ("circulant", "cholesky"):
        raise ValueError(f"unknown fBm method {method!r}")
    n = params.n_steps
    times = params.dt * np.arange(n + 1)

    eigenvalues = None
    if method == "circulant":
        eigenvalues = circulant_eigenvalues(params.hurst, n)
        if eigenvalues.min() < -EMBEDDING_TOLERANCE * eigenvalues.max():
            logger.warning(
                f"Circulant embedding is not nonnegative (min eigenvalue {eigenvalues.min():.3e}) "
                f"for H={params.hurst}, n={n}; falling back to Cholesky"
            )
            eigenvalues = None
        else:
            eigenvalues = np.clip(eigenvalues, 0.0, None)
    logger.info(
        f"fBm paths: H={params.hurst}, {n_paths} paths x {n} steps, dt={params.dt}, "
        f"method={'circulant' if eigenvalues is not None else 'cholesky'}, seed={seed}"
    )

    positions = np.zeros((n_paths, n + 1))
    if eigenvalues is not None:
        amplitude = np.sqrt(eigenvalues / (2 * n))
        scale = params.dt ** params.hurst
        for block, start, stop in _blocks(n_paths):
            rng = block_generator(seed, block)
            count = stop - start
            normals = rng.standard_normal((count, 2 * n)) + 1j * rng.standard_normal((count, 2 * n))
            noise = np.fft.fft(amplitude * normals, axis=1).real[:, :n]
            positions[start:stop, 1:] = np.cumsum(scale * noise, axis=1)
    else:
        factor = linalg.cholesky(fbm_covariance(params.hurst, times[1:]), lower=True)
        for block, start, stop in _blocks(n_paths):
            rng = block_generator(seed, block)
            positions[start:stop, 1:] = rng.standard_normal((stop - start, n)) @ factor.T
    return TrajectoryEnsemble(n_paths, times, positions, seed, "fbm", params)


def fractional_moments(ensemble: TrajectoryEnsemble, delta: float) -> np.ndarray:
    """Ensemble average <|x|^delta> at every time"""
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    return np.mean(np.abs(ensemble.positions) ** delta, axis=0)


def _estimate_times(ensemble: TrajectoryEnsemble) -> np.ndarray:
    positive = np.flatnonzero(ensemble.times > 0)
    if positive.size < MIN_TIME_POINTS:
        raise ValueError(f"need at least {MIN_TIME_POINTS} positive time points, got {positive.size}")
    if ensemble.n_paths < MIN_PATHS:
        raise ValueError(f"need at least {MIN_PATHS} paths, got {ensemble.n_paths}")
    decades = math.log10(ensemble.times[positive[-1]] / ensemble.times[positive[0]])
    if decades < MIN_DECADES:
        logger.warning(f"Ensemble spans only {decades:.2f} decades of time; index estimate is loose")
    picks = np.unique(np.round(np.geomspace(1, positive.size, ESTIMATE_POINTS)).astype(int) - 1)
    return positive[picks]


def _loglog_slope(times: np.ndarray, moments: np.ndarray) -> Tuple[float, float]:
    if np.any(moments <= 0) or not np.all(np.isfinite(moments)):
        raise ValueError("ensemble has zero variance at some time; cannot estimate indices")
    fit = stats.linregress(np.log(times), np.log(moments))
    halfwidth = stats.t.ppf(0.975, times.size - 2) * fit.stderr
    return float(fit.slope), float(halfwidth)


def estimate_indices(ensemble: TrajectoryEnsemble, mu_prior: float = 1.0) -> Tuple[float, float]:
    """Estimate mu (Levy flights) or H (fBm) with the 95% regression half-width"""
    indices = _estimate_times(ensemble)
    times = ensemble.times[indices]
    positions = ensemble.positions[:, indices]

    if ensemble.kind == "fbm":
        slope, halfwidth = _loglog_slope(times, np.mean(positions ** 2, axis=0))
        return slope / 2, halfwidth / 2

    if not 0 < mu_prior <= 2:
        raise ValueError(f"mu_prior must lie in (0, 2], got {mu_prior}")
    estimate = mu_prior
    for _ in range(2):
        delta = 0.5 * estimate
        slope, halfwidth = _loglog_slope(times, np.mean(np.abs(positions) ** delta, axis=0))
        if not slope > 0:
            raise ValueError(f"fractional moments do not grow (slope {slope})")
        estimate = delta / slope
    logger.debug(f"Levy index estimate {estimate} at delta={delta}")
    return estimate, delta / slope ** 2 * halfwidth


def ks_distance(samples: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF of samples and cdf"""
    return float(stats.kstest(np.asarray(samples, dtype=float), cdf).statistic)
