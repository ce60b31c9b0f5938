import cmath
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate, special

logger = logging.getLogger(__name__)

# Mittag-Leffler evaluation
ML_SERIES_RADIUS = 5.0
ML_TOLERANCE = 1e-10
ML_MAX_SERIES_GROWTH = 700.0
ML_MAX_SERIES_TERMS = 20000
ML_SERIES_CUTOFF = 1e-22
ML_RAY_DECAY = 60.0
ML_RAY_ANGLES = (math.pi, 7 * math.pi / 8, 3 * math.pi / 4, 5 * math.pi / 8)

# Imaginary round-off below this fraction of the peak is dropped for real input
REAL_CUTOFF = 1e-12


class AccuracyLossError(ArithmeticError):
    """Raised when a numerical result cannot be certified to its tolerance"""


@dataclass(frozen=True)
class FractionalOrders:
    """Time-fractional order eta and space-fractional order mu"""

    eta: float
    mu: float

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if not 0 < self.mu <= 2:
            raise ValueError(f"mu must lie in (0, 2], got {self.mu}")

    @property
    def is_classical(self) -> bool:
        return self.eta == 1 and self.mu == 2


@dataclass(frozen=True)
class GridSpec:
    """Periodic 1-D grid of n points on [origin, origin + length)"""

    n: int
    length: float
    origin: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or (int(self.n) & (int(self.n) - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        if not self.length > 0 or not math.isfinite(self.length):
            raise ValueError(f"length must be positive, got {self.length}")
        if not math.isfinite(self.origin):
            raise ValueError(f"origin must be finite, got {self.origin}")
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def centered(cls, n: int, length: float) -> "GridSpec":
        return cls(n=n, length=length, origin=-length / 2)

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @property
    def points(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(self.n)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Signed lattice k_j = 2*pi*j/length, j in [-n/2, n/2), in FFT order"""
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Sampled field on a GridSpec; the value array is read-only.

    Transform convention: forward is numpy.fft.fft (no scaling), inverse is
    numpy.fft.ifft (scaled by 1/n).
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n,):
            raise ValueError(f"field has shape {values.shape}, grid expects ({self.grid.n},)")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains NaN or Inf entries")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, func: Callable[[np.ndarray], np.ndarray]) -> "ComplexField":
        return cls(grid, func(grid.points))

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum: np.ndarray) -> "ComplexField":
        return cls(grid, np.fft.ifft(spectrum))

    @classmethod
    def delta(cls, grid: GridSpec, position: Optional[float] = None) -> "ComplexField":
        """Discrete point mass: 1/spacing at the node nearest to position"""
        if position is None:
            position = grid.origin + grid.length / 2
        index = int(round((position - grid.origin) / grid.spacing)) % grid.n
        values = np.zeros(grid.n, dtype=complex)
        values[index] = 1.0 / grid.spacing
        return cls(grid, values)

    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.values)

    def norm(self) -> float:
        """Discrete L2 norm sqrt(sum |v|^2 * spacing)"""
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.spacing))

    def mass(self) -> complex:
        return complex(np.sum(self.values) * self.grid.spacing)

    @property
    def real(self) -> np.ndarray:
        return self.values.real


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    wavenumbers: np.ndarray
    eigenvalues: np.ndarray


def riesz_multiplier(grid: GridSpec, orders: FractionalOrders) -> ModeSpectrum:
    """Fourier symbol |k|^mu of the Riesz fractional Laplacian on the grid lattice"""
    k = grid.wavenumbers
    eigenvalues = np.abs(k) ** orders.mu
    eigenvalues[k == 0] = 0.0
    k.flags.writeable = False
    eigenvalues.flags.writeable = False
    return ModeSpectrum(wavenumbers=k, eigenvalues=eigenvalues)


def apply_fractional_laplacian(field: ComplexField, orders: FractionalOrders) -> ComplexField:
    """Apply (-Delta)^{mu/2} spectrally"""
    multiplier = riesz_multiplier(field.grid, orders).eigenvalues
    result = np.fft.ifft(multiplier * field.spectrum())
    if not np.any(field.values.imag):
        peak = np.max(np.abs(result))
        if np.max(np.abs(result.imag)) <= REAL_CUTOFF * peak or peak == 0:
            result = result.real.astype(complex)
    return ComplexField(field.grid, result)


def finite_difference_laplacian(field: ComplexField) -> ComplexField:
    """Second-order periodic stencil for -Delta"""
    v = field.values
    h = field.grid.spacing
    return ComplexField(field.grid, -(np.roll(v, -1) - 2 * v + np.roll(v, 1)) / h ** 2)


def caputo_l1_weights(eta: float, steps: int) -> np.ndarray:
    """L1 weights b_j = (j+1)^(1-eta) - j^(1-eta), j = 0..steps-1"""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if int(steps) != steps or steps < 1:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    if eta == 1:
        weights = np.zeros(int(steps))
        weights[0] = 1.0
        return weights
    j = np.arange(int(steps), dtype=float)
    power = 1.0 - eta
    return (j + 1) ** power - j ** power


def mittag_leffler(eta: float, z: complex) -> complex:
    """Mittag-Leffler function E_eta(z) = sum z^n / Gamma(eta*n + 1).

    Arguments with |z| <= ML_SERIES_RADIUS are summed as a power series (in
    extended precision when the terms grow); larger arguments are integrated
    along a Hankel contour made of two rays, plus the residue of the pole
    z^(1/eta) when it lies to the right of the rays. Raises AccuracyLossError
    when the quadrature error estimate exceeds ML_TOLERANCE relative.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    z = complex(z)
    if not cmath.isfinite(z):
        raise ValueError(f"z must be finite, got {z}")
    if z == 0:
        return 1 + 0j
    if eta == 1:
        try:
            return cmath.exp(z)
        except OverflowError:
            raise AccuracyLossError(f"exp({z}) overflows")
    if abs(z) <= ML_SERIES_RADIUS and abs(z) ** (1.0 / eta) <= ML_MAX_SERIES_GROWTH:
        return _mittag_leffler_series(eta, z)
    return _mittag_leffler_contour(eta, z)


def mittag_leffler_array(eta: float, z: np.ndarray) -> np.ndarray:
    """Elementwise E_eta over an array, evaluating each distinct argument once"""
    z = np.asarray(z, dtype=complex)
    if eta == 1:
        with np.errstate(over="raise"):
            try:
                return np.exp(z)
            except FloatingPointError:
                raise AccuracyLossError("exp overflows for some arguments")
    unique, inverse = np.unique(z.ravel(), return_inverse=True)
    values = np.array([mittag_leffler(eta, value) for value in unique], dtype=complex)
    return values[inverse].reshape(z.shape)


def _mittag_leffler_series(eta: float, z: complex) -> complex:
    growth = abs(z) ** (1.0 / eta)
    if growth <= 2.0:
        return _series_double(eta, z)
    # the largest term is about exp(growth); carry that many extra digits
    digits = 25 + int(math.ceil(growth / math.log(10)))
    with mpmath.workdps(digits):
        zz = mpmath.mpc(z.real, z.imag)
        order = mpmath.mpf(eta)
        total = mpmath.mpc(0)
        power = mpmath.mpc(1)
        previous = mpmath.inf
        for n in range(ML_MAX_SERIES_TERMS):
            term = power * mpmath.rgamma(order * n + 1)
            total += term
            size = abs(term)
            if size < ML_SERIES_CUTOFF and size < previous:
                return complex(total)
            previous = size
            power *= zz
    raise AccuracyLossError(f"series for E_{eta}({z}) did not converge in {ML_MAX_SERIES_TERMS} terms")


def _series_double(eta: float, z: complex) -> complex:
    log_radius = math.log(abs(z))
    count = 64
    while True:
        n = np.arange(count)
        log_sizes = n * log_radius - special.gammaln(eta * n + 1)
        if log_sizes[-1] < -46 and log_sizes[-1] < log_sizes[-2]:
            if z.imag == 0:
                signs = (-1.0) ** n if z.real < 0 else np.ones(count)
                return complex(np.sum(signs * np.exp(log_sizes)))
            return complex(np.sum(np.exp(log_sizes + 1j * n * cmath.phase(z))))
        count *= 2
        if count > ML_MAX_SERIES_TERMS:
            raise AccuracyLossError(f"series for E_{eta}({z}) did not converge")


def _ray_angle(eta: float, phase: float) -> float:
    # keep the pole direction eta*theta away from |arg z|
    for theta in ML_RAY_ANGLES:
        if abs(phase - eta * theta) >= eta * math.pi / 16:
            return theta
    return ML_RAY_ANGLES[-1]


def _mittag_leffler_contour(eta: float, z: complex) -> complex:
    phase = abs(cmath.phase(z))
    theta = _ray_angle(eta, phase)

    residue = 0j
    if phase < eta * theta:
        try:
            residue = cmath.exp(z ** (1.0 / eta)) / eta
        except OverflowError:
            raise AccuracyLossError(f"E_{eta}({z}) overflows")

    upper = np.exp(1j * theta)
    lower = np.exp(-1j * theta)
    upper_eta = np.exp(1j * eta * theta)
    lower_eta = np.exp(-1j * eta * theta)

    def integrand(u: float) -> complex:
        s = u ** (1.0 / eta)
        g_upper = np.exp(s * upper) * upper_eta / (u * upper_eta - z)
        g_lower = np.exp(s * lower) * lower_eta / (u * lower_eta - z)
        return -1j * (g_upper - g_lower) / (2 * np.pi * eta)

    limit = (ML_RAY_DECAY / abs(math.cos(theta))) ** eta
    points = [abs(z)] if abs(z) < limit else None
    options = dict(points=points, limit=500, epsabs=0.0, epsrel=1e-13, full_output=1)

    real_part = integrate.quad(lambda u: integrand(u).real, 0.0, limit, **options)
    value, error = real_part[0], real_part[1]
    if z.imag != 0:
        imag_part = integrate.quad(lambda u: integrand(u).imag, 0.0, limit, **options)
        result = residue + complex(value, imag_part[0])
        error += imag_part[1]
    else:
        result = residue + value
    if not cmath.isfinite(result) or error > ML_TOLERANCE * abs(result):
        raise AccuracyLossError(
            f"E_{eta}({z}) could not be certified: estimate {result}, error {error:.3e}"
        )
    return complex(result)
