"""
Canonical populations over the truncated product basis.

Weights are P_n = exp(-beta E_n) / Z with Z summed over the truncated basis
(not the analytic geometric series), so every dissipation route works on the
same state space. beta = inf is an explicit ground-state projector.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from fockspace import ProductBasis

NORMALIZATION_TOLERANCE = 1e-12
RESONANCE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class ThermalEnsemble:
    beta: float
    weights: np.ndarray = field(repr=False)
    log_partition: float  # log Z; -inf at T = 0

    @property
    def is_zero_temperature(self) -> bool:
        return math.isinf(self.beta)

    @property
    def temperature(self) -> float:
        return 0.0 if self.is_zero_temperature else 1.0 / self.beta

    def expectation(self, diagonal: np.ndarray) -> float:
        """Thermal average of an observable diagonal in the product basis."""
        diagonal = np.asarray(diagonal, dtype=float)
        if diagonal.shape != self.weights.shape:
            raise ValueError(f"Observable has shape {diagonal.shape}, ensemble has {self.weights.shape}")
        return float(np.sum(self.weights * diagonal))


def _check_beta(beta: float) -> float:
    try:
        beta = float(beta)
    except (TypeError, ValueError):
        raise ValueError(f"beta must be a number, got {beta!r}")
    if math.isnan(beta) or beta <= 0:
        raise ValueError(f"beta must be > 0 or +inf (negative temperature is out of scope), got {beta}")
    return beta


def make_ensemble(basis: ProductBasis, beta: float) -> ThermalEnsemble:
    """
    Boltzmann weights over `basis` at inverse temperature `beta`.

    Finite beta uses a log-sum-exp normalisation so beta*E well beyond the
    exp() overflow range is handled; beta = inf splits weight equally over the
    (possibly degenerate) ground manifold.
    """
    beta = _check_beta(beta)
    energies = basis.energies
    if math.isinf(beta):
        ground = float(np.min(energies))
        manifold = energies <= ground + NORMALIZATION_TOLERANCE * max(1.0, abs(ground))
        weights = manifold.astype(float) / float(np.count_nonzero(manifold))
        log_partition = -math.inf
    else:
        log_boltzmann = -beta * energies
        log_partition = float(logsumexp(log_boltzmann))
        weights = np.exp(log_boltzmann - log_partition)
    weights.flags.writeable = False
    return ThermalEnsemble(beta, weights, log_partition)


def mean_occupancy(ensemble: ThermalEnsemble, basis: ProductBasis, which: int) -> float:
    """<n_which> over the truncated product ensemble."""
    return ensemble.expectation(basis.occupations(which))


def _require_resonant(basis: ProductBasis) -> None:
    w1, w2 = basis.spec1.omega, basis.spec2.omega
    if not math.isclose(w1, w2, rel_tol=RESONANCE_RTOL, abs_tol=0.0):
        raise ValueError(f"pair weight factor is defined for equal frequencies, got omega1={w1}, omega2={w2}")


def pair_weight_factor(ensemble: ThermalEnsemble, basis: ProductBasis) -> float:
    """<(n1+1) n2 + n1 (n2+1)>, the thermal weight of the rotating-wave matrix elements squared."""
    _require_resonant(basis)
    n1 = basis.occupations(1).astype(float)
    n2 = basis.occupations(2).astype(float)
    return ensemble.expectation((n1 + 1.0) * n2 + n1 * (n2 + 1.0))


def mean_occupancy_closed_form(beta: float, omega: float) -> float:
    """x / (1 - x) with x = exp(-beta omega), the untruncated Bose occupancy."""
    beta = _check_beta(beta)
    if math.isinf(beta):
        return 0.0
    return 1.0 / math.expm1(beta * omega)


def pair_weight_closed_form(beta: float, omega: float) -> float:
    """2 x / (1 - x)^2 = 1 / (2 sinh^2(beta omega / 2))."""
    beta = _check_beta(beta)
    if math.isinf(beta):
        return 0.0
    half = 0.5 * beta * omega
    if half > 350.0:
        return 2.0 * math.exp(-2.0 * half) / (1.0 - math.exp(-2.0 * half)) ** 2
    return 1.0 / (2.0 * math.sinh(half) ** 2)


def occupancy_tail(beta: float, omega: float, n_max: int) -> float:
    """Boltzmann ratio x^(n_max+1) of the first level cut off by the truncation."""
    beta = _check_beta(beta)
    if math.isinf(beta):
        return 0.0
    return math.exp(-beta * omega * (n_max + 1))


def n_max_for_tail(beta: float, omega: float, tolerance: float = 1e-10) -> int:
    """Smallest truncation whose occupancy tail is below `tolerance` (at least 1)."""
    beta = _check_beta(beta)
    if not 0 < tolerance < 1:
        raise ValueError(f"tail tolerance must be in (0, 1), got {tolerance}")
    if math.isinf(beta):
        return 1
    n_max = max(1, math.ceil(-math.log(tolerance) / (beta * omega)) - 1)
    while occupancy_tail(beta, omega, n_max) >= tolerance:
        n_max += 1
    return n_max
