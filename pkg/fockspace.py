"""
Truncated Fock spaces for a pair of harmonic oscillators.

States |n1, n2> are enumerated lexicographically, so the product-space index
of (n1, n2) is n1 * (n_max + 1) + n2 and every two-mode operator is a Kronecker
product of single-mode matrices. Natural units: hbar = 1.

The raising operator maps the top level n_max to zero (hard cutoff); the
canonical commutator [a, a+] = 1 therefore holds only below the top level.
"""
from dataclasses import dataclass, field
from itertools import product
from typing import Optional, Tuple

import numpy as np
from scipy import sparse

HERMITIAN_TOLERANCE = 1e-12


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class OscillatorSpec:
    omega: float
    mass: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.omega) or self.omega <= 0:
            raise ValueError(f"Oscillator omega must be a positive number, got {self.omega}")
        if not np.isfinite(self.mass) or self.mass <= 0:
            raise ValueError(f"Oscillator mass must be a positive number, got {self.mass}")


@dataclass(frozen=True, eq=False)
class ProductBasis:
    spec1: OscillatorSpec
    spec2: OscillatorSpec
    n_max: int
    states: np.ndarray = field(repr=False)    # (dim, 2) integer occupation numbers
    energies: np.ndarray = field(repr=False)  # (dim,) E = w1 (n1 + 1/2) + w2 (n2 + 1/2)

    @property
    def dim(self) -> int:
        return int(self.states.shape[0])

    @property
    def levels(self) -> int:
        return self.n_max + 1

    def index(self, n1: int, n2: int) -> int:
        if not (0 <= n1 <= self.n_max and 0 <= n2 <= self.n_max):
            raise ValueError(f"State ({n1},{n2}) lies outside the truncated space n_max={self.n_max}")
        return n1 * self.levels + n2

    def occupations(self, which: int) -> np.ndarray:
        _check_which(which)
        return self.states[:, which - 1]

    def basis_vector(self, n1: int, n2: int) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=complex)
        vec[self.index(n1, n2)] = 1.0
        return vec

    def with_frequencies(self, omega1: float, omega2: float) -> "ProductBasis":
        """Same truncation and masses, new mode frequencies (operators built from
        ladder matrices do not depend on the frequencies, only energies do)."""
        return build_basis(
            OscillatorSpec(omega1, self.spec1.mass), OscillatorSpec(omega2, self.spec2.mass), self.n_max
        )


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=complex)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"Operator must be a square matrix, got shape {entries.shape}")
        error = hermiticity_error(entries)
        if error >= HERMITIAN_TOLERANCE:
            raise ValueError(f"Operator is not Hermitian: max|O - O^+| = {error:.3e}")
        object.__setattr__(self, "entries", _freeze(entries))

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def check_dimension(self, basis: ProductBasis) -> None:
        if self.dim != basis.dim:
            raise ValueError(f"Operator dimension {self.dim} does not match basis dimension {basis.dim}")


def hermiticity_error(matrix: np.ndarray) -> float:
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T)))


def _check_which(which: int) -> None:
    if which not in (1, 2):
        raise ValueError(f"Oscillator index must be 1 or 2, got {which}")


def build_basis(spec1: OscillatorSpec, spec2: OscillatorSpec, n_max: int) -> ProductBasis:
    """
    Enumerate the (n_max+1)^2 product states with their unperturbed energies.

    Args:
        spec1, spec2: the two oscillators
        n_max: inclusive truncation level per oscillator (>= 1)

    Returns:
        ProductBasis in lexicographic (n1, n2) order
    """
    if isinstance(n_max, bool) or int(n_max) != n_max:
        raise ValueError(f"n_max must be an integer, got {n_max!r}")
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1 (one quantum exchange needs two levels per mode), got {n_max}")
    states = np.array(list(product(range(n_max + 1), repeat=2)), dtype=int)
    energies = spec1.omega * (states[:, 0] + 0.5) + spec2.omega * (states[:, 1] + 0.5)
    return ProductBasis(spec1, spec2, n_max, _freeze(states), _freeze(energies.astype(float)))


def single_mode_lowering(levels: int) -> np.ndarray:
    """a|n> = sqrt(n)|n-1> on `levels` states; the transpose is the truncated raising operator."""
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)


def _embed(basis: ProductBasis, op: np.ndarray, which: int) -> np.ndarray:
    identity = np.eye(basis.levels)
    return np.kron(op, identity) if which == 1 else np.kron(identity, op)


def ladder_ops(basis: ProductBasis, which: int) -> Tuple[np.ndarray, np.ndarray]:
    """Lowering and raising operators of oscillator `which` on the product basis."""
    _check_which(which)
    lowering = single_mode_lowering(basis.levels)
    return _embed(basis, lowering, which), _embed(basis, lowering.T.copy(), which)


def number_operator(basis: ProductBasis, which: int) -> HermitianOperator:
    return HermitianOperator(np.diag(basis.occupations(which).astype(float)))


def hamiltonian(basis: ProductBasis) -> HermitianOperator:
    """H0, diagonal in the product basis."""
    return HermitianOperator(np.diag(basis.energies))


def rwa_coupling_sparse(basis: ProductBasis) -> sparse.csr_matrix:
    """Sparse a1 a2^+ + a1^+ a2 (about 2 dim nonzero entries)."""
    a = sparse.csr_matrix(single_mode_lowering(basis.levels))
    matrix = (sparse.kron(a, a.T) + sparse.kron(a.T, a)).tocsr()
    matrix.eliminate_zeros()
    return matrix


def rwa_coupling(basis: ProductBasis) -> HermitianOperator:
    """A = a1 a2^+ + a1^+ a2, the number-conserving part of the x1 x2 coupling."""
    return HermitianOperator(rwa_coupling_sparse(basis).toarray())


def full_coupling(
    basis: ProductBasis,
    spec1: Optional[OscillatorSpec] = None,
    spec2: Optional[OscillatorSpec] = None,
) -> HermitianOperator:
    """
    A = a1 a2 + a1 a2^+ + a1^+ a2 + a1^+ a2^+ = (a1 + a1^+)(a2 + a2^+).

    The dimensional prefactor of x1 x2 is carried by the drive amplitude gamma,
    so the returned operator is dimensionless. The specs, when given, must be
    the ones the basis was built with.
    """
    for given, own in ((spec1, basis.spec1), (spec2, basis.spec2)):
        if given is not None and given != own:
            raise ValueError(f"Oscillator spec {given} does not match the basis spec {own}")
    a = single_mode_lowering(basis.levels)
    quadrature = a + a.T
    return HermitianOperator(np.kron(quadrature, quadrature))

