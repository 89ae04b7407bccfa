"""
Exact dynamics under H(t) = H0 - A q(t) on the truncated product basis.

The stepper alternates exact free rotations exp(-i H0 s) (H0 is diagonal) with
interaction kicks exp(i A q s) evaluated at the midpoint of each sub-step.
That symmetric second-order step is composed with the triple-jump weights

    w1 = 1 / (2 - 2^(1/3)),  w0 = -2^(1/3) / (2 - 2^(1/3))

into a fourth-order unitary integrator. A is split into the connected blocks
of its sparsity pattern and every block is diagonalized once, so a kick costs
two small matrix products per block.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, TypedDict, Union

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from drive import (
    DEFAULT_DECAY_TOLERANCE,
    DriveSignal,
    TimeGrid,
    check_decay,
    describe,
    evaluate,
    ramp_exp,
    suggested_grid,
)
from errors import ConvergenceError
from fockspace import HermitianOperator, OscillatorSpec, ProductBasis, build_basis, full_coupling, rwa_coupling
from print_utils import create_print_if_verbose
from spectral import DissipationResult
from thermal import ThermalEnsemble, make_ensemble

NORM_TOLERANCE = 1e-8
LEAKAGE_TOLERANCE = 1e-6
TRIPLE_JUMP_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
TRIPLE_JUMP_W0 = -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0))

InitialState = Union[int, Tuple[int, int], np.ndarray]


@dataclass(frozen=True)
class PropagationRun:
    """
    Numerics of one propagation: uniform steps of `dt` over [t_start, t_end].

    With `require_decay` the drive must have decayed below `decay_tolerance` of
    its maximum at both ends of the horizon. Leakage above `leakage_tolerance`
    is flagged in the result metadata, or raised when `strict_leakage` is set.
    """

    dt: float
    t_start: float
    t_end: float
    require_decay: bool = True
    decay_tolerance: float = DEFAULT_DECAY_TOLERANCE
    norm_tolerance: float = NORM_TOLERANCE
    leakage_tolerance: float = LEAKAGE_TOLERANCE
    strict_leakage: bool = False
    checkpoints: int = 200
    verbose: bool = False

    def __post_init__(self) -> None:
        TimeGrid(self.t_start, self.t_end, self.dt)
        if self.checkpoints < 1:
            raise ValueError(f"checkpoints must be >= 1, got {self.checkpoints}")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.t_start, self.t_end, self.dt)

    def with_dt(self, dt: float) -> "PropagationRun":
        return PropagationRun(
            dt, self.t_start, self.t_end, self.require_decay, self.decay_tolerance,
            self.norm_tolerance, self.leakage_tolerance, self.strict_leakage, self.checkpoints, self.verbose,
        )

    @classmethod
    def covering(cls, signal: DriveSignal, dt: float, **kwargs) -> "PropagationRun":
        """Run over the smallest dt-aligned horizon on which `signal` has decayed."""
        grid = suggested_grid(signal, dt, kwargs.get("decay_tolerance", DEFAULT_DECAY_TOLERANCE))
        return cls(dt, grid.t_start, grid.t_end, **kwargs)


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Connected blocks of A, padded to a common size for batched products."""

    members: Tuple[np.ndarray, ...] = field(repr=False)  # basis indices of each block
    eigenvalues: np.ndarray = field(repr=False)          # (blocks, size)
    eigenvectors: np.ndarray = field(repr=False)         # (blocks, size, size)
    energies: np.ndarray = field(repr=False)             # (blocks, size, 1), zero on padding

    @property
    def size(self) -> int:
        return int(self.eigenvalues.shape[1])


@dataclass
class Evolution:
    """Block-stacked states after a propagation, with run diagnostics."""

    states: np.ndarray = field(repr=False)  # (blocks, size, columns)
    norm_drift: float = 0.0
    history: Dict[str, List[float]] = field(default_factory=dict)


def block_structure(A: HermitianOperator, basis: ProductBasis) -> BlockStructure:
    A.check_dimension(basis)
    pattern = sparse.csr_matrix(np.abs(A.entries) > 0)
    count, labels = connected_components(pattern, directed=False)
    members = tuple(np.nonzero(labels == label)[0] for label in range(count))
    size = max(len(m) for m in members)
    eigenvalues = np.zeros((count, size))
    eigenvectors = np.tile(np.eye(size, dtype=complex), (count, 1, 1))
    energies = np.zeros((count, size, 1))
    for b, idx in enumerate(members):
        d = len(idx)
        values, vectors = np.linalg.eigh(A.entries[np.ix_(idx, idx)])
        eigenvalues[b, :d] = values
        eigenvectors[b, :d, :d] = vectors
        energies[b, :d, 0] = basis.energies[idx]
    return BlockStructure(members, eigenvalues, eigenvectors, energies)


def _kick_times(grid: TimeGrid) -> Tuple[np.ndarray, Tuple[float, float, float]]:
    """Midpoints of the three sub-steps of every step, and the sub-step lengths."""
    dt, w1, w0 = grid.dt, TRIPLE_JUMP_W1, TRIPLE_JUMP_W0
    starts = grid.times[:-1]
    offsets = np.array([0.5 * w1, w1 + 0.5 * w0, 1.0 - 0.5 * w1]) * dt
    return starts[:, None] + offsets[None, :], (w1 * dt, w0 * dt, w1 * dt)


def evolve(
    blocks: BlockStructure,
    states: np.ndarray,
    signal: DriveSignal,
    run: PropagationRun,
    weights: Optional[np.ndarray] = None,
    top_shell: Optional[np.ndarray] = None,
) -> Evolution:
    """
    Propagate block-stacked `states` (blocks, size, columns) through the run.

    `weights` (blocks, columns) and `top_shell` (blocks, size) enable the
    ensemble energy and leakage history at checkpoints.
    """
    print_if_verbose = create_print_if_verbose(run.verbose)
    grid = run.grid
    if run.require_decay:
        check_decay(signal, grid, run.decay_tolerance)
    kick_times, substeps = _kick_times(grid)
    q_kicks = evaluate(signal, kick_times)
    vectors = blocks.eigenvectors
    adjoint = np.conj(np.swapaxes(vectors, 1, 2))
    lam = blocks.eigenvalues[:, :, None]
    outer = np.exp(-1j * blocks.energies * (0.5 * substeps[0]))
    inner = np.exp(-1j * blocks.energies * (0.5 * (substeps[0] + substeps[1])))
    x = np.array(states, dtype=complex)
    initial_norms = np.sum(np.abs(x) ** 2, axis=1)
    every = max(1, grid.steps // run.checkpoints)
    history: Dict[str, List[float]] = {"t": [], "energy": [], "norm": [], "leakage": []}
    norm_drift = 0.0

    def checkpoint(t: float) -> None:
        nonlocal norm_drift
        populations = np.abs(x) ** 2
        deviation = float(np.max(np.abs(populations.sum(axis=1) - initial_norms)))
        norm_drift = max(norm_drift, deviation)
        if norm_drift > run.norm_tolerance:
            raise ConvergenceError(
                f"norm drift {norm_drift:.3e} exceeds {run.norm_tolerance:g} at t={t}; reduce dt",
                {"norm_drift": norm_drift, "t": t, "dt": grid.dt},
            )
        history["t"].append(t)
        history["norm"].append(deviation)
        if weights is not None:
            energy = np.einsum("bkn,bk->bn", populations, blocks.energies[:, :, 0])
            history["energy"].append(float(np.sum(weights * energy)))
            if top_shell is not None:
                shell = np.einsum("bkn,bk->bn", populations, top_shell)
                history["leakage"].append(float(np.sum(weights * shell)))

    checkpoint(grid.t_start)
    for step in range(grid.steps):
        x *= outer
        for sub in range(3):
            if sub:
                x *= inner
            phase = np.exp(1j * lam * (q_kicks[step, sub] * substeps[sub]))
            x = vectors @ (phase * (adjoint @ x))
        x *= outer
        if (step + 1) % every == 0 or step + 1 == grid.steps:
            checkpoint(grid.t_start + (step + 1) * grid.dt)
    print_if_verbose(f"propagated {grid.steps} steps of dt={grid.dt}, norm drift {norm_drift:.3e}")
    return Evolution(x, norm_drift, history)


def _as_vector(psi0: InitialState, basis: ProductBasis) -> np.ndarray:
    if isinstance(psi0, tuple):
        return basis.basis_vector(*psi0)
    if isinstance(psi0, (int, np.integer)):
        if not 0 <= psi0 < basis.dim:
            raise ValueError(f"basis index {psi0} outside [0, {basis.dim})")
        vec = np.zeros(basis.dim, dtype=complex)
        vec[psi0] = 1.0
        return vec
    vec = np.asarray(psi0, dtype=complex)
    if vec.shape != (basis.dim,):
        raise ValueError(f"state vector has shape {vec.shape}, expected ({basis.dim},)")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ValueError(f"initial state must be normalized, |psi| = {norm}")
    return vec


def propagate_state(
    psi0: InitialState, A: HermitianOperator, signal: DriveSignal, run: PropagationRun, basis: ProductBasis
) -> np.ndarray:
    """psi(t_end) from psi(t_start) = psi0 (basis index, (n1, n2) or a normalized vector)."""
    vec = _as_vector(psi0, basis)
    blocks = block_structure(A, basis)
    stacked = np.zeros((len(blocks.members), blocks.size, 1), dtype=complex)
    for b, idx in enumerate(blocks.members):
        stacked[b, : len(idx), 0] = vec[idx]
    evolution = evolve(blocks, stacked, signal, run)
    out = np.zeros(basis.dim, dtype=complex)
    for b, idx in enumerate(blocks.members):
        out[idx] = evolution.states[b, : len(idx), 0]
    return out


def top_shell_mask(basis: ProductBasis) -> np.ndarray:
    """States with n1 or n2 in the two highest retained levels."""
    return (basis.occupations(1) >= basis.n_max - 1) | (basis.occupations(2) >= basis.n_max - 1)


def delta_e_propagated(
    ensemble: ThermalEnsemble,
    A: HermitianOperator,
    signal: DriveSignal,
    run: PropagationRun,
    basis: ProductBasis,
    history_path: Optional[str] = None,
) -> DissipationResult:
    """
    sum_n P_n (<psi_n(t_end)|H0|psi_n(t_end)> - E_n) with psi_n started in eigenstate n.

    Each block of A is propagated from the identity, which yields all
    eigenstate runs of that block at once; blocks without thermal weight are
    skipped.
    """
    blocks = block_structure(A, basis)
    if ensemble.weights.shape != (basis.dim,):
        raise ValueError("ensemble and basis dimensions do not agree")
    active = [b for b, idx in enumerate(blocks.members) if np.any(ensemble.weights[idx] > 0)]
    sub = BlockStructure(
        tuple(blocks.members[b] for b in active),
        blocks.eigenvalues[active],
        blocks.eigenvectors[active],
        blocks.energies[active],
    )
    weights = np.zeros((len(active), blocks.size))
    shell = np.zeros((len(active), blocks.size))
    mask = top_shell_mask(basis).astype(float)
    for b, idx in enumerate(sub.members):
        weights[b, : len(idx)] = ensemble.weights[idx]
        shell[b, : len(idx)] = mask[idx]
    identity = np.tile(np.eye(blocks.size, dtype=complex), (len(active), 1, 1))
    evolution = evolve(sub, identity, signal, run, weights, shell)

    populations = np.abs(evolution.states) ** 2
    gaps = sub.energies - np.swapaxes(sub.energies, 1, 2)          # E_k - E_n
    per_state = np.sum(populations * gaps, axis=1)                  # (blocks, columns)
    delta_e = float(np.sum(weights * per_state))
    scale = float(np.sum(weights * np.sum(populations * np.abs(gaps), axis=1)))

    initial_shell = float(np.sum(weights * shell))
    leakage = max(evolution.history["leakage"]) - initial_shell if evolution.history["leakage"] else 0.0
    leakage_flag = leakage > run.leakage_tolerance
    if leakage_flag:
        message = f"truncation leakage {leakage:.3e} above {run.leakage_tolerance:g}: increase n_max (now {basis.n_max})"
        if run.strict_leakage:
            raise ConvergenceError(message, {"leakage": leakage, "n_max": basis.n_max})
        print(f"Warning: {message}")
    meta = {
        "n_max": basis.n_max,
        "beta": ensemble.beta,
        "omega1": basis.spec1.omega,
        "omega2": basis.spec2.omega,
        "dt": run.dt,
        "t_start": run.t_start,
        "t_end": run.t_end,
        "steps": run.grid.steps,
        "blocks": len(blocks.members),
        "propagated_blocks": len(active),
        "norm_drift": evolution.norm_drift,
        "leakage": leakage,
        "leakage_flag": leakage_flag,
        "drive": describe(signal),
    }
    if history_path:
        write_energy_history(history_path, evolution.history)
    return DissipationResult(delta_e + 0.0, "propagator", meta, scale)


def write_energy_history(path: str, history: Dict[str, List[float]]) -> None:
    """CSV with columns t, energy (ensemble <H0>), norm (largest norm change of any propagated state)."""
    from output_utils import write_table

    columns = ["t", "energy", "norm"]
    rows = [dict(zip(columns, values)) for values in zip(*(history[c] for c in columns))]
    write_table(path, columns, rows, fmt="csv", provenance="propagator energy history")


class AuditRow(TypedDict):
    eta: float
    omega2: float
    delta_e_rwa: float
    delta_e_full: float
    relative_gap: float


def counter_rotating_audit(
    omega1: float,
    beta: float,
    gamma: float,
    etas: Sequence[float],
    n_max: int,
    dt: float,
    detuning_multiple: float = 1.0,
    decay_tolerance: float = DEFAULT_DECAY_TOLERANCE,
    verbose: bool = False,
) -> List[AuditRow]:
    """
    Propagated dissipation with the full x1 x2 coupling against the rotating-wave
    coupling for each eta (ramp drive, omega2 = omega1 + detuning_multiple * eta).

    relative_gap = |dE_full - dE_rwa| / dE_rwa, +inf when the rotating-wave
    value vanishes (T = 0).
    """
    print_if_verbose = create_print_if_verbose(verbose)
    rows: List[AuditRow] = []
    for eta in etas:
        omega2 = omega1 + detuning_multiple * eta
        basis = build_basis(OscillatorSpec(omega1), OscillatorSpec(omega2), n_max)
        ensemble = make_ensemble(basis, beta)
        signal = ramp_exp(gamma, eta)
        run = PropagationRun.covering(signal, dt, decay_tolerance=decay_tolerance, verbose=verbose)
        rwa = delta_e_propagated(ensemble, rwa_coupling(basis), signal, run, basis)
        full = delta_e_propagated(ensemble, full_coupling(basis), signal, run, basis)
        if rwa.delta_e > 0:
            gap = abs(full.delta_e - rwa.delta_e) / rwa.delta_e
        else:
            gap = math.inf if full.delta_e != rwa.delta_e else 0.0
        print_if_verbose(f"audit eta={eta}: rwa {rwa.delta_e:.6e} full {full.delta_e:.6e} gap {gap:.3e}")
        rows.append(
            {
                "eta": float(eta),
                "omega2": omega2,
                "delta_e_rwa": rwa.delta_e,
                "delta_e_full": full.delta_e,
                "relative_gap": gap,
            }
        )
    return rows
