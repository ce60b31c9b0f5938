import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import special, stats

from fracops import FractionalOrders
from quantum import PhysicalConstants, dispersion_energy
from stochastic import block_generator

logger = logging.getLogger(__name__)

STATISTICS = ("bose", "fermi")


@dataclass(frozen=True)
class EnsembleParams:
    beta: float
    chemical_potential: float = 0.0

    def __post_init__(self):
        if not self.beta > 0 or not math.isfinite(self.beta):
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not math.isfinite(self.chemical_potential):
            raise ValueError(f"chemical_potential must be finite, got {self.chemical_potential}")


def energy_distribution(params: EnsembleParams, orders: FractionalOrders):
    """Gamma(1/mu, 1/beta) law of the energy E = c|k|^mu under Boltzmann weights.

    The 1-D density of states of E = c|k|^mu is proportional to E^{1/mu - 1},
    so the Boltzmann density g(E) exp(-beta E) / Z is a gamma law.
    """
    return stats.gamma(a=1.0 / orders.mu, scale=1.0 / params.beta)


def mb_energy_pdf(energy, params: EnsembleParams, orders: FractionalOrders):
    """Density of E = h_mu |k|^mu under the Boltzmann weight; for mu > 1 it diverges at E = 0"""
    energies = np.asarray(energy)
    if np.any(energies < 0):
        raise ValueError(f"energy must be nonnegative, got {energy}")
    if orders.mu > 1 and np.any(energies == 0):
        raise ValueError(f"energy density is unbounded at E = 0 for mu = {orders.mu} > 1")
    return energy_distribution(params, orders).pdf(energy)


def mean_energy(params: EnsembleParams, orders: FractionalOrders) -> float:
    return 1.0 / (orders.mu * params.beta)


def occupancy(energy, params: EnsembleParams, statistics: str):
    """Bose-Einstein or Fermi-Dirac mean occupancy 1/(exp(beta(E - mu_c)) -/+ 1)"""
    if statistics not in STATISTICS:
        raise ValueError(f"statistics must be one of {STATISTICS}, got {statistics!r}")
    x = params.beta * (np.asarray(energy, dtype=float) - params.chemical_potential)
    if statistics == "fermi":
        return special.expit(-x)
    if np.any(x <= 0):
        raise ValueError(
            f"Bose occupancy needs energy above the chemical potential {params.chemical_potential}"
        )
    return 1.0 / np.expm1(x)


def occupancy_at_wavenumber(
    k, params: EnsembleParams, constants: PhysicalConstants, orders: FractionalOrders, statistics: str
):
    """Occupancy of the state with fractional dispersion energy D_mu hbar^mu |k|^mu"""
    return occupancy(dispersion_energy(k, constants, orders), params, statistics)


def sample_boltzmann_wavenumbers(
    n: int, params: EnsembleParams, constants: PhysicalConstants, orders: FractionalOrders, seed: int
) -> np.ndarray:
    """Wavenumbers drawn with density proportional to exp(-beta D_mu hbar^mu |k|^mu)"""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    coefficient = params.beta * constants.kinetic_coefficient(orders.mu)
    law = stats.gennorm(beta=orders.mu, scale=coefficient ** (-1.0 / orders.mu))
    return law.rvs(size=int(n), random_state=block_generator(seed, 0))


def tabulate(
    energies: np.ndarray,
    params: EnsembleParams,
    orders: FractionalOrders,
    statistics: Optional[str] = None,
) -> pd.DataFrame:
    """Energy PDF (and optionally an occupancy column) on an energy grid"""
    energies = np.asarray(energies, dtype=float)
    table = pd.DataFrame({"energy": energies, "pdf": mb_energy_pdf(energies, params, orders)})
    if statistics is not None:
        table[statistics] = occupancy(energies, params, statistics)
    logger.debug(f"Tabulated {len(table)} energies for mu={orders.mu}, beta={params.beta}")
    return table
