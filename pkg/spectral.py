"""
Dissipation from first-order transition amplitudes.

Starting from thermal equilibrium with uncorrelated phases between
eigenstates, the first-order amplitudes

    b_nm = (i / hbar) A_nm q_hat(-w_nm),   B_nm = |b_nm|^2

give the second-order energy change

    dE = 1/2 sum_nm (E_n - E_m)(P_m - P_n) B_nm  >= 0.

Every summand is nonnegative (both factors change sign together).
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple, Union

import numpy as np
from scipy import sparse

from drive import DriveSignal, describe, fourier, power_kernel
from errors import ConvergenceError
from fockspace import HermitianOperator, ProductBasis
from thermal import ThermalEnsemble

ROUTES = ("spectral", "kubo_time", "kubo_freq", "propagator", "closed_form")
FORM_AGREEMENT_RTOL = 1e-10
POSITIVITY_RTOL = 1e-10
DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    b_matrix: np.ndarray = field(repr=False)
    B_matrix: np.ndarray = field(repr=False)


@dataclass
class DissipationResult:
    delta_e: float
    route: str
    meta: Dict[str, Any] = field(default_factory=dict)
    scale: float = 0.0  # sum_nm |E_n - E_m| P_m B_nm, the positivity reference

    def __post_init__(self) -> None:
        if self.route not in ROUTES:
            raise ValueError(f"Invalid route '{self.route}'. Must be one of {list(ROUTES)}")
        self.delta_e = float(self.delta_e)

    def is_positive(self) -> bool:
        return self.delta_e >= -POSITIVITY_RTOL * self.scale

    def check_positive(self) -> "DissipationResult":
        if not self.is_positive():
            raise ConvergenceError(
                f"{self.route} route produced negative dissipation {self.delta_e:.6e} (scale {self.scale:.3e})",
                {"delta_e": self.delta_e, "scale": self.scale},
            )
        return self

    def relative_gap(self, reference: "DissipationResult", floor: float = 1e-300) -> float:
        """|dE - dE_ref| / max(|dE_ref|, floor); 0 when both vanish."""
        diff = abs(self.delta_e - reference.delta_e)
        if diff == 0.0:
            return 0.0
        return diff / max(abs(reference.delta_e), floor)


def degeneracy_threshold(basis: ProductBasis) -> float:
    """Energy differences at or below this are treated as exact degeneracies."""
    return DEGENERACY_RTOL * max(1.0, float(np.max(np.abs(basis.energies))))


def amplitudes(A: HermitianOperator, signal: DriveSignal, basis: ProductBasis) -> TransitionKernel:
    """
    First-order amplitudes b_nm and probabilities B_nm for the drive `signal`.

    q_hat is evaluated only where A_nm is nonzero; b vanishes elsewhere.
    """
    A.check_dimension(basis)
    rows, cols = np.nonzero(A.entries)
    omega = basis.energies[rows] - basis.energies[cols]
    b_support = 1j * A.entries[rows, cols] * np.asarray(fourier(signal, -omega), dtype=complex)

    b_matrix = np.zeros((basis.dim, basis.dim), dtype=complex)
    B_matrix = np.zeros((basis.dim, basis.dim), dtype=float)
    b_matrix[rows, cols] = b_support
    B_matrix[rows, cols] = np.abs(b_support) ** 2
    b_matrix.flags.writeable = False
    B_matrix.flags.writeable = False
    return TransitionKernel(b_matrix, B_matrix)


@dataclass(frozen=True, eq=False)
class CouplingSupport:
    """Nonzero entries A_nm of a coupling operator, in row-major order."""

    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def coupling_support(A: Union[HermitianOperator, sparse.spmatrix]) -> CouplingSupport:
    if sparse.issparse(A):
        coo = sparse.csr_matrix(A).tocoo()
        order = np.lexsort((coo.col, coo.row))
        rows, cols = coo.row[order].astype(int), coo.col[order].astype(int)
        return CouplingSupport(rows, cols, coo.data[order].astype(complex))
    rows, cols = np.nonzero(A.entries)
    return CouplingSupport(rows, cols, A.entries[rows, cols])


def _check_shapes(ensemble: ThermalEnsemble, basis: ProductBasis) -> None:
    if ensemble.weights.shape != (basis.dim,):
        raise ValueError("ensemble and basis dimensions do not agree")


def _nondegenerate(
    rows: np.ndarray, cols: np.ndarray, B: np.ndarray, basis: ProductBasis
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    delta = basis.energies[rows] - basis.energies[cols]
    keep = (np.abs(delta) > degeneracy_threshold(basis)) & (B > 0)
    return rows[keep], cols[keep], delta[keep], B[keep]


def pair_terms(
    kernel: TransitionKernel, ensemble: ThermalEnsemble, basis: ProductBasis
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Nondegenerate pairs (n, m) with B_nm > 0.

    Returns:
        rows, cols, delta = E_n - E_m, summand 1/2 delta (P_m - P_n) B_nm
    """
    if kernel.B_matrix.shape != (basis.dim, basis.dim):
        raise ValueError("kernel and basis dimensions do not agree")
    _check_shapes(ensemble, basis)
    rows, cols = np.nonzero(kernel.B_matrix)
    rows, cols, delta, B = _nondegenerate(rows, cols, kernel.B_matrix[rows, cols], basis)
    weights = ensemble.weights
    summand = 0.5 * delta * (weights[cols] - weights[rows]) * B
    return rows, cols, delta, summand


def delta_e_spectral(kernel: TransitionKernel, ensemble: ThermalEnsemble, basis: ProductBasis) -> DissipationResult:
    """
    Symmetrized dissipation sum, cross-checked against the unsymmetrized form
    sum_nm (E_n - E_m) P_m B_nm.
    """
    rows, cols, delta, summand = pair_terms(kernel, ensemble, basis)
    return _summed(rows, cols, delta, summand, kernel.B_matrix[rows, cols], ensemble, basis)


def delta_e_on_support(
    support: CouplingSupport, signal: DriveSignal, ensemble: ThermalEnsemble, basis: ProductBasis
) -> DissipationResult:
    """
    Same sum as `spectral_dissipation`, evaluated on the coupling support only.

    Used by sweeps that rebuild the basis energies for every point while the
    ladder-matrix coupling stays fixed.
    """
    _check_shapes(ensemble, basis)
    omega = basis.energies[support.rows] - basis.energies[support.cols]
    B = np.abs(support.values) ** 2 * np.asarray(power_kernel(signal, omega), dtype=float)
    rows, cols, delta, B = _nondegenerate(support.rows, support.cols, B, basis)
    weights = ensemble.weights
    summand = 0.5 * delta * (weights[cols] - weights[rows]) * B
    result = _summed(rows, cols, delta, summand, B, ensemble, basis)
    result.meta["drive"] = describe(signal)
    return result


def _summed(
    rows: np.ndarray,
    cols: np.ndarray,
    delta: np.ndarray,
    summand: np.ndarray,
    B: np.ndarray,
    ensemble: ThermalEnsemble,
    basis: ProductBasis,
) -> DissipationResult:
    p_from = ensemble.weights[cols]
    delta_e = float(np.sum(summand))
    unsymmetrized = float(np.sum(delta * p_from * B))
    scale = float(np.sum(np.abs(delta) * p_from * B))
    if abs(delta_e - unsymmetrized) > FORM_AGREEMENT_RTOL * scale:
        raise ConvergenceError(
            f"symmetrized ({delta_e:.17e}) and unsymmetrized ({unsymmetrized:.17e}) dissipation sums disagree",
            {"symmetrized": delta_e, "unsymmetrized": unsymmetrized, "scale": scale},
        )
    meta = {
        "n_max": basis.n_max,
        "beta": ensemble.beta,
        "omega1": basis.spec1.omega,
        "omega2": basis.spec2.omega,
        "pairs": int(rows.size),
        "unsymmetrized": unsymmetrized,
        "min_summand": float(np.min(summand)) if summand.size else 0.0,
    }
    return DissipationResult(delta_e + 0.0, "spectral", meta, scale).check_positive()


def spectral_dissipation(
    A: HermitianOperator, signal: DriveSignal, ensemble: ThermalEnsemble, basis: ProductBasis
) -> DissipationResult:
    """amplitudes + delta_e_spectral, with the drive recorded in the metadata."""
    result = delta_e_spectral(amplitudes(A, signal, basis), ensemble, basis)
    result.meta["drive"] = describe(signal)
    return result
