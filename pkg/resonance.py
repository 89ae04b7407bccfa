"""
Dissipation of the rotating-wave coupled pair near resonance.

For the ramp drive q(t) = gamma t exp(-eta t) the small-eta limit of the
spectral sum collapses onto a nascent delta function of the detuning,

    dE = pi beta gamma^2 / (8 eta sinh^2(beta w / 2)) * delta_eta(w1 - w2),
    delta_eta(w) = (2 eta / pi) w^2 / (eta^2 + w^2)^2,

which carries unit weight. At exact resonance every coupled pair is
degenerate and the dissipation vanishes; the physics lives in the
detuning-integrated weight, which grows as 1/eta.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, TypedDict

import numpy as np
from scipy.integrate import quad, trapezoid

from drive import ramp_exp
from errors import ConvergenceError
from fockspace import OscillatorSpec, build_basis, rwa_coupling_sparse
from print_utils import create_print_if_verbose
from spectral import DissipationResult, coupling_support, delta_e_on_support
from thermal import make_ensemble, n_max_for_tail, occupancy_tail

NORMALIZATION_TOLERANCE = 1e-9
DEFAULT_TAIL_TOLERANCE = 1e-10
DEFAULT_SPAN = 10.0       # detuning window half-width, in units of eta
DEFAULT_POINTS = 401


@dataclass(frozen=True)
class ResonanceConfig:
    omega1: float
    omega2: float
    beta: float
    gamma: float
    eta: float

    def __post_init__(self) -> None:
        for name in ("omega1", "omega2", "eta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive number, got {value}")
        if math.isnan(self.beta) or self.beta <= 0:
            raise ValueError(f"beta must be > 0 or +inf, got {self.beta}")
        if not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite, got {self.gamma}")

    @property
    def detuning(self) -> float:
        return self.omega2 - self.omega1

    def with_detuning(self, detuning: float) -> "ResonanceConfig":
        return ResonanceConfig(self.omega1, self.omega1 + detuning, self.beta, self.gamma, self.eta)

    def with_eta(self, eta: float) -> "ResonanceConfig":
        return ResonanceConfig(self.omega1, self.omega2, self.beta, self.gamma, eta)


class DetuningRow(TypedDict):
    detuning: float
    delta_e_spectral: float
    delta_e_closed_form: float
    rel_gap: float


class EtaRow(TypedDict):
    eta: float
    delta_e: float
    eta_delta_e: float
    closed_form: float


def regularized_delta(omega, eta: float):
    """(2 eta / pi) w^2 / (eta^2 + w^2)^2; scalar in, float out."""
    w = np.asarray(omega, dtype=float)
    result = (2.0 * eta / math.pi) * w ** 2 / (eta ** 2 + w ** 2) ** 2
    return float(result) if np.ndim(result) == 0 else result


def kernel_normalization(eta: float) -> float:
    """Integral of the regularized delta over the real line by adaptive quadrature (in units of eta)."""
    integrand = lambda x: eta * regularized_delta(eta * x, eta)
    total = 0.0
    for lo, hi in ((-np.inf, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, np.inf)):
        value, _ = quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)
        total += value
    return total


def window_mass(span: float) -> float:
    """Weight of the regularized delta inside |w| <= span * eta (independent of eta)."""
    return (2.0 / math.pi) * (math.atan(span) - span / (1.0 + span ** 2))


def closed_form_weight(beta: float, gamma: float, eta: float, omega: float) -> float:
    """
    pi beta gamma^2 / (8 eta sinh^2(beta w / 2)), the coefficient of the delta function.

    Written as pi beta gamma^2 exp(-beta w) / (2 eta (1 - exp(-beta w))^2) so
    large beta underflows cleanly to 0.
    """
    if math.isinf(beta):
        return 0.0
    x = beta * omega
    return math.pi * beta * gamma ** 2 * math.exp(-x) / (2.0 * eta * math.expm1(-x) ** 2)


def _mean_frequency(config: ResonanceConfig) -> float:
    # the weight is symmetric in the two modes; at resonance this is omega1
    return math.sqrt(config.omega1 * config.omega2)


def delta_e_closed_form(config: ResonanceConfig) -> DissipationResult:
    """Closed-form dissipation with the delta function replaced by delta_eta(w1 - w2)."""
    weight = closed_form_weight(config.beta, config.gamma, config.eta, _mean_frequency(config))
    kernel = regularized_delta(config.omega1 - config.omega2, config.eta)
    meta = {
        "omega1": config.omega1,
        "omega2": config.omega2,
        "beta": config.beta,
        "gamma": config.gamma,
        "eta": config.eta,
        "weight": weight,
        "kernel": kernel,
    }
    return DissipationResult(weight * kernel + 0.0, "closed_form", meta, abs(weight * kernel))


def integrated_closed_form(config: ResonanceConfig, span: float = DEFAULT_SPAN) -> float:
    """Closed-form weight times the kernel mass inside |detuning| <= span * eta."""
    return closed_form_weight(config.beta, config.gamma, config.eta, config.omega1) * window_mass(span)


def truncation_for(config: ResonanceConfig, span: float, tail_tolerance: float) -> int:
    lowest = config.omega1 - span * config.eta
    if lowest <= 0:
        raise ValueError(f"detuning window reaches non-positive omega2 ({lowest}); reduce span or eta")
    return n_max_for_tail(config.beta, min(config.omega1, lowest), tail_tolerance)


def detuning_grid(eta: float, span: float = DEFAULT_SPAN, points: int = DEFAULT_POINTS) -> np.ndarray:
    if points < 3 or points % 2 == 0:
        raise ValueError(f"detuning_points must be an odd number >= 3 (zero detuning on the grid), got {points}")
    return np.linspace(-span * eta, span * eta, points)


def spectral_lineshape(
    config: ResonanceConfig,
    detunings: Sequence[float],
    n_max: Optional[int] = None,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
) -> List[DissipationResult]:
    """
    Spectral-route dissipation of the rotating-wave pair (ramp drive) at each
    detuning w2 - w1. The coupling is built once; only the energies change.
    """
    detunings = np.asarray(detunings, dtype=float)
    span = float(np.max(np.abs(detunings))) / config.eta if detunings.size else 0.0
    if n_max is None:
        n_max = truncation_for(config, span, tail_tolerance)
    tail = occupancy_tail(config.beta, config.omega1 - span * config.eta, n_max)
    if tail >= tail_tolerance:
        raise ConvergenceError(
            f"n_max={n_max} leaves an occupancy tail {tail:.3e} above {tail_tolerance:g}",
            {"n_max": n_max, "tail": tail, "tail_tolerance": tail_tolerance},
        )
    signal = ramp_exp(config.gamma, config.eta)
    basis = build_basis(OscillatorSpec(config.omega1), OscillatorSpec(config.omega1), n_max)
    support = coupling_support(rwa_coupling_sparse(basis))
    results = []
    for detuning in detunings:
        point = basis.with_frequencies(config.omega1, config.omega1 + detuning)
        result = delta_e_on_support(support, signal, make_ensemble(point, config.beta), point)
        result.meta.update({"detuning": float(detuning), "tail": tail})
        results.append(result)
    return results


def compare_routes_near_resonance(
    config: ResonanceConfig,
    span: float = DEFAULT_SPAN,
    points: int = DEFAULT_POINTS,
    n_max: Optional[int] = None,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    verbose: bool = False,
) -> dict:
    """
    Sweep the detuning over [-span eta, span eta] around config.omega1.

    Returns:
        dict with "rows" (List[DetuningRow]), "integrated_spectral" (trapezoid
        over the sweep), "integrated_closed_form" (weight times window mass),
        "total_weight", "integrated_gap" and "n_max"
    """
    print_if_verbose = create_print_if_verbose(verbose)
    normalization = kernel_normalization(config.eta)
    if abs(normalization - 1.0) > NORMALIZATION_TOLERANCE:
        raise ConvergenceError(f"regularized delta integrates to {normalization!r} for eta={config.eta}")
    detunings = detuning_grid(config.eta, span, points)
    spectral = spectral_lineshape(config, detunings, n_max, tail_tolerance)
    rows: List[DetuningRow] = []
    for detuning, result in zip(detunings, spectral):
        closed = delta_e_closed_form(config.with_detuning(float(detuning)))
        rows.append(
            {
                "detuning": float(detuning),
                "delta_e_spectral": result.delta_e,
                "delta_e_closed_form": closed.delta_e,
                "rel_gap": result.relative_gap(closed),
            }
        )
    integrated = float(trapezoid([r["delta_e_spectral"] for r in rows], detunings))
    expected = integrated_closed_form(config, span)
    gap = abs(integrated - expected) / expected if expected > 0 else abs(integrated)
    print_if_verbose(
        f"detuning sweep beta={config.beta} eta={config.eta}: integrated {integrated:.10e}, "
        f"closed form {expected:.10e}, gap {gap:.3e}"
    )
    return {
        "rows": rows,
        "integrated_spectral": integrated,
        "integrated_closed_form": expected,
        "total_weight": closed_form_weight(config.beta, config.gamma, config.eta, config.omega1),
        "integrated_gap": gap,
        "kernel_normalization": normalization,
        "n_max": spectral[0].meta["n_max"],
    }


def eta_scaling_study(
    config: ResonanceConfig,
    etas: Sequence[float],
    span: float = DEFAULT_SPAN,
    points: int = DEFAULT_POINTS,
    tail_tolerance: float = DEFAULT_TAIL_TOLERANCE,
    verbose: bool = False,
) -> List[EtaRow]:
    """
    Detuning-integrated dissipation for each eta (window scaled with eta).

    eta * dE converges as eta decreases; at T = 0 every row is exactly zero.
    """
    etas = [float(e) for e in etas]
    if not etas:
        raise ValueError("eta list must be nonempty")
    if any(later >= earlier for earlier, later in zip(etas, etas[1:])):
        raise ValueError(f"eta list must be strictly decreasing, got {etas}")
    rows: List[EtaRow] = []
    for eta in etas:
        comparison = compare_routes_near_resonance(
            config.with_eta(eta), span, points, tail_tolerance=tail_tolerance, verbose=verbose
        )
        delta_e = comparison["integrated_spectral"]
        rows.append(
            {
                "eta": eta,
                "delta_e": delta_e,
                "eta_delta_e": eta * delta_e,
                "closed_form": comparison["integrated_closed_form"],
            }
        )
    return rows
