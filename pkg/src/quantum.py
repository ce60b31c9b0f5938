import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from fracops import (
    AccuracyLossError,
    ComplexField,
    FractionalOrders,
    GridSpec,
    mittag_leffler_array,
    riesz_multiplier,
)

logger = logging.getLogger(__name__)

POTENTIAL_KINDS = ("cosine", "square", "barrier", "well")
BAND_TOLERANCE = 1e-8
PERIOD_MATCH = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    """Mass, Planck constant and the fractional constants D_mu and h_eta"""

    mass: float
    hbar: float
    d_mu: float
    h_eta: float = 1.0

    def __post_init__(self):
        for name in ("mass", "hbar", "d_mu", "h_eta"):
            value = getattr(self, name)
            if not value > 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be positive, got {value}")

    @classmethod
    def classical(cls, mass: float = 1.0, hbar: float = 1.0, h_eta: Optional[float] = None) -> "PhysicalConstants":
        """D_mu = 1/(2m), so that mu = 2 gives p = hbar*k and E = p^2/2m"""
        return cls(mass=mass, hbar=hbar, d_mu=1.0 / (2 * mass), h_eta=hbar if h_eta is None else h_eta)

    def h_mu(self, mu: float) -> float:
        """Scaled Planck constant sqrt(2 m D_mu hbar^mu)"""
        return math.sqrt(2 * self.mass * self.d_mu * self.hbar ** mu)

    def kinetic_coefficient(self, mu: float) -> float:
        """D_mu hbar^mu, equal to h_mu^2 / 2m"""
        return self.d_mu * self.hbar ** mu


@dataclass(frozen=True)
class QuantumNumbers:
    k: float
    p: float
    nu: float
    energy: float

    @classmethod
    def from_wavenumber(
        cls, k: float, constants: PhysicalConstants, orders: FractionalOrders
    ) -> "QuantumNumbers":
        energy = float(dispersion_energy(k, constants, orders))
        return cls(
            k=float(k),
            p=float(momentum_from_wavenumber(k, constants, orders)),
            nu=float(frequency_from_energy(energy, constants, orders.eta)),
            energy=energy,
        )


@dataclass(frozen=True)
class PotentialSpec:
    """Periodic potential anchored at x = 0, even in x.

    cosine: V0 cos(2 pi x / a); square: V0 on half of each cell;
    barrier/well: +V0 / -V0 on a fraction feature_width of each cell.
    """

    kind: str
    amplitude: float
    period: float
    feature_width: float = 0.5

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"Unknown potential kind {self.kind!r}, expected one of {POTENTIAL_KINDS}")
        if not math.isfinite(self.amplitude):
            raise ValueError(f"amplitude must be finite, got {self.amplitude}")
        if not self.period > 0 or not math.isfinite(self.period):
            raise ValueError(f"period must be positive, got {self.period}")
        if self.kind in ("barrier", "well") and not 0 < self.feature_width < 1:
            raise ValueError(f"feature_width must lie in (0, 1), got {self.feature_width}")

    @property
    def width(self) -> float:
        return 0.5 if self.kind == "square" else self.feature_width

    @property
    def signed_amplitude(self) -> float:
        return -self.amplitude if self.kind == "well" else self.amplitude

    def fourier_coefficient(self, m: int) -> float:
        """Coefficient of exp(2 pi i m x / a) in the Fourier series of V"""
        if self.kind == "cosine":
            return self.amplitude / 2 if abs(m) == 1 else 0.0
        if m == 0:
            return self.signed_amplitude * self.width
        return self.signed_amplitude * math.sin(math.pi * m * self.width) / (math.pi * m)

    def check_grid(self, grid: GridSpec) -> None:
        cells = grid.length / self.period
        if abs(cells - round(cells)) > PERIOD_MATCH * max(cells, 1.0) or round(cells) < 1:
            raise ValueError(f"period {self.period} does not divide the grid length {grid.length}")

    def sample(self, grid: GridSpec) -> np.ndarray:
        self.check_grid(grid)
        x = grid.points
        if self.kind == "cosine":
            return self.amplitude * np.cos(2 * np.pi * x / self.period)
        offset = (x + self.period / 2) % self.period - self.period / 2
        inside = np.abs(offset) < self.width * self.period / 2
        return np.where(inside, self.signed_amplitude, 0.0)


@dataclass(frozen=True, eq=False)
class BandStructure:
    q_values: np.ndarray
    bands: np.ndarray
    orders: FractionalOrders
    potential: Optional[PotentialSpec] = None
    constants: Optional[PhysicalConstants] = None
    n_plane_waves: int = 0

    def __post_init__(self):
        bands = np.array(self.bands, dtype=float)
        q_values = np.array(self.q_values, dtype=float)
        if bands.ndim != 2 or bands.shape[0] != q_values.size:
            raise ValueError(f"bands shape {bands.shape} does not match {q_values.size} q values")
        if np.any(np.diff(bands, axis=1) < 0):
            raise ValueError("bands must be sorted ascending at every q")
        object.__setattr__(self, "bands", bands)
        object.__setattr__(self, "q_values", q_values)

    @property
    def n_bands(self) -> int:
        return self.bands.shape[1]


def kinetic_energy(p, constants: PhysicalConstants, orders: FractionalOrders):
    """E_k = D_mu |p|^mu"""
    return constants.d_mu * np.abs(p) ** orders.mu


def quadratic_kinetic_energy(p, constants: PhysicalConstants):
    """E_k = p^2 / 2m"""
    return np.square(p) / (2 * constants.mass)


def dispersion_energy(k, constants: PhysicalConstants, orders: FractionalOrders):
    """E = D_mu hbar^mu |k|^mu"""
    return constants.kinetic_coefficient(orders.mu) * np.abs(k) ** orders.mu


def momentum_from_wavenumber(k, constants: PhysicalConstants, orders: FractionalOrders, even: bool = False):
    """p = h_mu |k|^{mu/2}, extended to k < 0 as an odd function unless even is set"""
    magnitude = constants.h_mu(orders.mu) * np.abs(k) ** (orders.mu / 2)
    return magnitude if even else np.sign(k) * magnitude


def planck_energy(nu, constants: PhysicalConstants, eta: float):
    """E = h_eta nu^eta"""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    if np.any(np.asarray(nu) < 0):
        raise ValueError(f"frequency must be nonnegative, got {nu}")
    return constants.h_eta * np.asarray(nu, dtype=float) ** eta


def frequency_from_energy(energy, constants: PhysicalConstants, eta: float):
    if np.any(np.asarray(energy) < 0):
        raise ValueError(f"energy must be nonnegative, got {energy}")
    return (np.asarray(energy, dtype=float) / constants.h_eta) ** (1.0 / eta)


def corrected_momentum_energy_check(
    energy: float, constants: PhysicalConstants, orders: FractionalOrders
) -> Tuple[float, float]:
    """Compare kappa = E^{1/mu} with the momentum p = h_mu k^{mu/2} of the same energy"""
    if not energy > 0:
        raise ValueError(f"energy must be positive, got {energy}")
    mu = orders.mu
    kappa = energy ** (1.0 / mu)
    k = (energy / constants.kinetic_coefficient(mu)) ** (1.0 / mu)
    p = constants.h_mu(mu) * k ** (mu / 2)
    return kappa, p


def _check_steps(steps: int) -> int:
    if int(steps) != steps or steps < 0:
        raise ValueError(f"steps must be a nonnegative integer, got {steps}")
    return int(steps)


def split_step_evolve(
    psi: ComplexField,
    potential: Optional[PotentialSpec],
    constants: PhysicalConstants,
    orders: FractionalOrders,
    dt: float,
    steps: int,
) -> ComplexField:
    """Strang splitting for i hbar dpsi/dt = D_mu hbar^mu (-Delta)^{mu/2} psi + V psi"""
    if orders.eta != 1:
        raise ValueError(f"split-step evolution needs eta = 1, got {orders.eta}; use evolve_free_fractional")
    if not dt > 0 or not math.isfinite(dt):
        raise ValueError(f"dt must be positive, got {dt}")
    steps = _check_steps(steps)
    if steps == 0:
        return psi

    grid = psi.grid
    hbar = constants.hbar
    eigenvalues = riesz_multiplier(grid, orders).eigenvalues
    kinetic_phase = np.exp(-1j * constants.kinetic_coefficient(orders.mu) * eigenvalues * dt / hbar)
    if potential is None:
        half_phase = np.ones(grid.n, dtype=complex)
    else:
        half_phase = np.exp(-1j * potential.sample(grid) * dt / (2 * hbar))
    logger.info(f"Split-step evolution: mu={orders.mu}, n={grid.n}, dt={dt}, steps={steps}")

    values = np.array(psi.values)
    for step in range(steps):
        values = half_phase * values
        values = np.fft.ifft(kinetic_phase * np.fft.fft(values))
        values = half_phase * values
        if (step + 1) % 1000 == 0:
            logger.debug(f"step {step + 1}/{steps}")
    return ComplexField(grid, values)


def evolve_free_fractional(
    psi: ComplexField, constants: PhysicalConstants, orders: FractionalOrders, t: float
) -> ComplexField:
    """Mode-exact V = 0 evolution under the time-fractional Schrodinger equation.

    Each mode is multiplied by E_eta(-(A_k / h_eta) exp(i pi eta / 2) t^eta) with
    A_k = D_mu hbar^mu |k|^mu. At eta = 1 this is the phase exp(-i A_k t / h_eta).
    For eta < 1 every factor stays within the unit disk and decays like
    h_eta / (Gamma(1 - eta) A_k t^eta), so the norm never exceeds its initial
    value; it need not fall monotonically when eta > 2/3, where a damped
    oscillating term beats against the algebraic tail.
    """
    if not t >= 0 or not math.isfinite(t):
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0:
        return psi
    eta = orders.eta
    energies = constants.kinetic_coefficient(orders.mu) * riesz_multiplier(psi.grid, orders).eigenvalues
    arguments = -(energies / constants.h_eta) * np.exp(1j * np.pi * eta / 2) * t ** eta
    factors = mittag_leffler_array(eta, arguments)
    return ComplexField.from_spectrum(psi.grid, factors * psi.spectrum())


def hamiltonian_matrix(
    grid: GridSpec, potential: Optional[PotentialSpec], constants: PhysicalConstants, orders: FractionalOrders
) -> np.ndarray:
    """Dense real-space Hamiltonian of the spectral discretization"""
    eigenvalues = riesz_multiplier(grid, orders).eigenvalues
    kinetic = constants.kinetic_coefficient(orders.mu) * eigenvalues
    identity = np.eye(grid.n)
    matrix = np.fft.ifft(kinetic[:, None] * np.fft.fft(identity, axis=0), axis=0)
    if potential is not None:
        matrix = matrix + np.diag(potential.sample(grid))
    return matrix


def _reciprocal_indices(n_plane_waves: int) -> np.ndarray:
    if int(n_plane_waves) != n_plane_waves or n_plane_waves < 1 or n_plane_waves % 2 == 0:
        raise ValueError(f"n_plane_waves must be a positive odd integer, got {n_plane_waves}")
    half = int(n_plane_waves) // 2
    return np.arange(-half, half + 1)


def _check_q_values(q_values: Sequence[float], period: float) -> np.ndarray:
    q_values = np.asarray(q_values, dtype=float)
    if q_values.ndim != 1 or q_values.size == 0:
        raise ValueError("q_values must be a non-empty 1-D sequence")
    edge = math.pi / period
    if np.any(np.abs(q_values) > edge * (1 + 1e-12)):
        raise ValueError(f"q_values must lie in the first Brillouin zone [-{edge}, {edge}]")
    return q_values


def _diagonalize(
    potential: PotentialSpec,
    constants: PhysicalConstants,
    orders: FractionalOrders,
    n_bands: int,
    n_plane_waves: int,
    q_values: np.ndarray,
) -> np.ndarray:
    indices = _reciprocal_indices(n_plane_waves)
    reciprocal = 2 * np.pi * indices / potential.period
    column = np.array([potential.fourier_coefficient(m) for m in range(len(indices))])
    coupling = linalg.toeplitz(column)
    coefficient = constants.kinetic_coefficient(orders.mu)

    bands = np.empty((q_values.size, n_bands))
    for i, q in enumerate(q_values):
        matrix = coupling + np.diag(coefficient * np.abs(q + reciprocal) ** orders.mu)
        bands[i] = linalg.eigh(matrix, eigvals_only=True, subset_by_index=[0, n_bands - 1])
    return bands


def band_structure(
    potential: PotentialSpec,
    constants: PhysicalConstants,
    orders: FractionalOrders,
    n_bands: int,
    n_plane_waves: int,
    q_values: Sequence[float],
    check_convergence: bool = False,
) -> BandStructure:
    """Lowest Bloch bands from the plane-wave Hamiltonian.

    H_{GG'} = D_mu hbar^mu |q+G|^mu delta_{GG'} + V(G-G') with analytic
    potential coefficients. With check_convergence the calculation is repeated
    with roughly twice the plane waves and AccuracyLossError is raised if any
    band moves by more than BAND_TOLERANCE relative.
    """
    if int(n_bands) != n_bands or n_bands < 1:
        raise ValueError(f"n_bands must be a positive integer, got {n_bands}")
    n_bands = int(n_bands)
    if n_plane_waves < 2 * n_bands + 5:
        raise ValueError(f"n_plane_waves={n_plane_waves} is below the margin 2*n_bands+5={2 * n_bands + 5}")
    q_values = _check_q_values(q_values, potential.period)
    logger.info(
        f"Band structure: {potential.kind} V0={potential.amplitude}, mu={orders.mu}, "
        f"{n_bands} bands, {n_plane_waves} plane waves, {q_values.size} q points"
    )
    bands = _diagonalize(potential, constants, orders, n_bands, n_plane_waves, q_values)

    if check_convergence:
        refined = _diagonalize(potential, constants, orders, n_bands, 2 * n_plane_waves + 1, q_values)
        scale = constants.kinetic_coefficient(orders.mu) * (2 * np.pi / potential.period) ** orders.mu
        shift = np.max(np.abs(bands - refined) / np.maximum(np.abs(refined), scale))
        if shift > BAND_TOLERANCE:
            logger.warning(f"Band truncation shift {shift:.3e} with {n_plane_waves} plane waves")
            raise AccuracyLossError(
                f"bands not converged: doubling plane waves shifts them by {shift:.3e} relative"
            )
        logger.debug(f"Band truncation shift {shift:.3e}")

    return BandStructure(q_values, bands, orders, potential, constants, int(n_plane_waves))


def free_bands(
    constants: PhysicalConstants, orders: FractionalOrders, period: float, n_bands: int, q_values: Sequence[float]
) -> np.ndarray:
    """Folded free dispersion D_mu hbar^mu |q+G|^mu, lowest n_bands per q"""
    q_values = _check_q_values(q_values, period)
    reciprocal = 2 * np.pi * np.arange(-n_bands, n_bands + 1) / period
    energies = dispersion_energy(q_values[:, None] + reciprocal[None, :], constants, orders)
    return np.sort(energies, axis=1)[:, :n_bands]


def gap_at_zone_edge(structure: BandStructure, n: int = 0) -> float:
    """E_{n+1} - E_n at the q point closest to the zone edge"""
    if not 0 <= n < structure.n_bands - 1:
        raise ValueError(f"gap above band {n} needs at least {n + 2} bands")
    edge = int(np.argmax(np.abs(structure.q_values)))
    return float(structure.bands[edge, n + 1] - structure.bands[edge, n])


def bandwidth(structure: BandStructure, n: int = 0) -> float:
    if not 0 <= n < structure.n_bands:
        raise ValueError(f"band {n} not present")
    band = structure.bands[:, n]
    return float(band.max() - band.min())
