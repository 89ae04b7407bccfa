"""
Dissipation through the Kubo response function

    phi_AA(t) = (1 / i hbar) Tr{rho [A, A(t)]}
              = (1 / i hbar) sum_nm M_nm (exp(-i w_nm t) - exp(i w_nm t)),
    M_nm = -(1/Z) exp(-beta (E_n + E_m) / 2) sinh(beta (E_n - E_m) / 2) |A_nm|^2.

Two evaluations of the dissipated energy

    dE = -integral qdot(t) F_f(t) dt,   F_f(t) = integral_{t' < t} phi_AA(t - t') q(t') dt'

are provided: the time route discretizes both integrals on a uniform grid,
the frequency route uses the exact partial-integration result
dE = -(1/hbar) sum_nm M_nm w_nm q_hat(w_nm) q_hat(-w_nm).
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.linalg import expm
from scipy.signal import fftconvolve

from drive import DEFAULT_DECAY_TOLERANCE, DriveSignal, TimeGrid, check_decay, describe, evaluate, fourier, power_kernel
from errors import ConvergenceError
from fockspace import HermitianOperator, ProductBasis
from print_utils import create_print_if_verbose
from spectral import DissipationResult, degeneracy_threshold
from thermal import ThermalEnsemble

SELF_CHECK_RTOL = 1e-9
SELF_CHECK_MAX_DIM = 400
SELF_CHECK_TIMES = (0.5, 1.7, 3.9)
REALNESS_RTOL = 1e-12
FFT_AGREEMENT_RTOL = 1e-10
FFT_VALIDATION_SAMPLES = 4096
FFT_TAIL_SAMPLES = 64


@dataclass(frozen=True, eq=False)
class ResponseFunction:
    m_matrix: np.ndarray = field(repr=False)      # dense M_nm, zero off the coupling support
    frequencies: np.ndarray = field(repr=False)   # dense w_nm = E_n - E_m
    pair_m: np.ndarray = field(repr=False)        # M on nondegenerate coupled pairs
    pair_omega: np.ndarray = field(repr=False)
    line_omega: np.ndarray = field(repr=False)    # distinct w_nm
    line_weight: np.ndarray = field(repr=False)   # sum of M over pairs sharing a frequency
    beta: float
    n_max: int
    self_check: Dict[str, Any] = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return float(2.0 * np.sum(np.abs(self.line_weight)))

    def evaluate_complex(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phases = np.outer(t, self.line_omega)
        total = (np.exp(-1j * phases) - np.exp(1j * phases)) @ self.line_weight
        return total / 1j

    def __call__(self, t) -> np.ndarray:
        """phi_AA(t), real; raises if the imaginary residue is not at rounding level."""
        values = self.evaluate_complex(t)
        residue = float(np.max(np.abs(values.imag))) if values.size else 0.0
        if residue > REALNESS_RTOL * max(self.scale, float(np.max(np.abs(values.real)))):
            raise ConvergenceError(f"response function has imaginary residue {residue:.3e}")
        return values.real

    def sampled(self, grid: TimeGrid, chunk: int = 8192) -> np.ndarray:
        """phi_AA at lags 0, dt, 2 dt, ... covering the grid."""
        lags = grid.dt * np.arange(grid.steps + 1)
        return np.concatenate([self(lags[i:i + chunk]) for i in range(0, lags.size, chunk)])


def _lines(omega: np.ndarray, weight: np.ndarray, tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    """Merge pairs whose frequencies agree within `tolerance` (harmonic spectra are highly degenerate)."""
    if omega.size == 0:
        return np.zeros(0), np.zeros(0)
    order = np.argsort(omega, kind="stable")
    omega, weight = omega[order], weight[order]
    starts = np.concatenate([[0], np.nonzero(np.diff(omega) > tolerance)[0] + 1])
    return omega[starts], np.add.reduceat(weight, starts)


def brute_force_response(
    A: HermitianOperator, ensemble: ThermalEnsemble, basis: ProductBasis, times: Sequence[float]
) -> np.ndarray:
    """(1/i) Tr{rho [A, A(t)]} with A(t) = exp(i H0 t) A exp(-i H0 t) by explicit matrix exponentials."""
    rho = np.diag(ensemble.weights)
    h0 = np.diag(basis.energies).astype(complex)
    a = A.entries
    out = []
    for t in times:
        forward = expm(1j * t * h0)
        a_t = forward @ a @ forward.conj().T
        out.append((np.trace(rho @ a @ a_t) - np.trace(rho @ a_t @ a)) / 1j)
    return np.array(out)


def response(
    A: HermitianOperator,
    ensemble: ThermalEnsemble,
    basis: ProductBasis,
    self_check: bool = True,
    check_times: Sequence[float] = SELF_CHECK_TIMES,
) -> ResponseFunction:
    """
    Build M_nm from the coupling operator and the thermal ensemble.

    M_nm = -1/2 sign(E_n - E_m) P_lower (1 - exp(-beta |E_n - E_m|)) |A_nm|^2
    is the sinh form rewritten so that beta = inf and large beta*E stay finite.
    When `self_check` is set and the basis is small enough, the result is
    compared with `brute_force_response` at `check_times`.
    """
    A.check_dimension(basis)
    if ensemble.weights.shape != (basis.dim,):
        raise ValueError("ensemble and basis dimensions do not agree")
    energies = basis.energies
    rows, cols = np.nonzero(A.entries)
    delta = energies[rows] - energies[cols]
    keep = np.abs(delta) > degeneracy_threshold(basis)
    rows, cols, delta = rows[keep], cols[keep], delta[keep]

    weights = ensemble.weights
    p_lower = np.where(delta > 0, weights[cols], weights[rows])
    boltzmann_gap = -np.expm1(-ensemble.beta * np.abs(delta))
    pair_m = -0.5 * np.sign(delta) * p_lower * boltzmann_gap * np.abs(A.entries[rows, cols]) ** 2

    m_matrix = np.zeros((basis.dim, basis.dim))
    m_matrix[rows, cols] = pair_m
    frequencies = energies[:, None] - energies[None, :]
    line_omega, line_weight = _lines(delta, pair_m, degeneracy_threshold(basis))
    for array in (m_matrix, frequencies, pair_m, delta, line_omega, line_weight):
        array.flags.writeable = False
    resp = ResponseFunction(
        m_matrix, frequencies, pair_m, delta, line_omega, line_weight, ensemble.beta, basis.n_max
    )

    if self_check and basis.dim <= SELF_CHECK_MAX_DIM:
        expected = brute_force_response(A, ensemble, basis, check_times)
        got = resp.evaluate_complex(check_times)
        error = float(np.max(np.abs(expected - got)))
        # |A|^2 floors the scale when every coupled pair is degenerate and phi vanishes
        operator_scale = float(np.max(np.abs(A.entries))) ** 2 if A.entries.size else 0.0
        reference = max(resp.scale, float(np.max(np.abs(expected))), operator_scale)
        resp.self_check.update({"times": list(check_times), "max_error": error, "reference": reference})
        if error > SELF_CHECK_RTOL * reference and error > 0.0:
            raise ConvergenceError(
                f"response function disagrees with the trace evaluation: max error {error:.3e} "
                f"(reference {reference:.3e})",
                resp.self_check,
            )
    else:
        resp.self_check["skipped"] = True
    return resp


def delta_e_kubo_freq(resp: ResponseFunction, signal: DriveSignal) -> DissipationResult:
    """dE = -(1/hbar) sum_nm M_nm w_nm q_hat(w_nm) q_hat(-w_nm), evaluated exactly."""
    omega = resp.pair_omega
    unique, inverse = np.unique(omega, return_inverse=True)
    power = np.atleast_1d(np.asarray(power_kernel(signal, unique), dtype=float))[inverse] if omega.size else omega
    contributions = -resp.pair_m * omega * power
    meta = {"n_max": resp.n_max, "beta": resp.beta, "pairs": int(omega.size), "drive": describe(signal)}
    result = DissipationResult(float(np.sum(contributions)) + 0.0, "kubo_freq", meta, float(np.sum(np.abs(contributions))))
    return result.check_positive()


def causal_convolution(phi: np.ndarray, q: np.ndarray, dt: float, method: str = "direct") -> np.ndarray:
    """
    F_i = trapezoid over t_0..t_i of phi(t_i - t') q(t').

    `method="fft"` is used only after matching the direct O(N^2) sum within
    1e-10 on a leading block of samples and on evenly spread samples of the
    remainder, each evaluated as its own full history sum; otherwise the
    direct sum is kept.
    """
    if phi.shape != q.shape:
        raise ValueError(f"phi and q must have the same length, got {phi.shape} and {q.shape}")
    if method not in ("direct", "fft"):
        raise ValueError(f"Invalid convolution method '{method}'. Must be one of ['direct', 'fft']")

    def _trapezoid(raw: np.ndarray, phi_part: np.ndarray, q_part: np.ndarray) -> np.ndarray:
        return dt * (raw - 0.5 * (phi_part * q_part[0] + phi_part[0] * q_part))

    n = q.size
    if method == "fft":
        m = min(n, FFT_VALIDATION_SAMPLES)
        fft_full = _trapezoid(fftconvolve(phi, q)[:n], phi, q)
        checked = np.arange(m)
        direct = _trapezoid(np.convolve(phi[:m], q[:m])[:m], phi[:m], q[:m])
        if n > m:
            tail = np.unique(np.linspace(m, n - 1, FFT_TAIL_SAMPLES).astype(int))
            raw_tail = np.array([np.dot(phi[i::-1], q[:i + 1]) for i in tail])
            direct_tail = dt * (raw_tail - 0.5 * (phi[tail] * q[0] + phi[0] * q[tail]))
            checked = np.concatenate([checked, tail])
            direct = np.concatenate([direct, direct_tail])
        tolerance = FFT_AGREEMENT_RTOL * max(float(np.max(np.abs(direct))), 1e-300)
        if float(np.max(np.abs(fft_full[checked] - direct))) <= tolerance:
            return fft_full
        print("Warning: fft convolution disagrees with the direct sum; using the direct sum.")
    return _trapezoid(np.convolve(phi, q)[:n], phi, q)


def _time_route(
    resp: ResponseFunction, signal: DriveSignal, grid: TimeGrid, method: str
) -> Tuple[float, float, Dict[str, np.ndarray]]:
    times = grid.times
    q = evaluate(signal, times)
    velocity = np.gradient(q, grid.dt, edge_order=2)
    force = causal_convolution(resp.sampled(grid), q, grid.dt, method)
    power = velocity * force
    delta_e = -float(trapezoid(power, dx=grid.dt))
    scale = float(trapezoid(np.abs(power), dx=grid.dt))
    return delta_e, scale, {"t": times, "q": q, "v": velocity, "F_f": force}


def delta_e_kubo_time(
    resp: ResponseFunction,
    signal: DriveSignal,
    grid: TimeGrid,
    method: str = "direct",
    decay_tolerance: float = DEFAULT_DECAY_TOLERANCE,
    history_path: Optional[str] = None,
    verbose: bool = False,
) -> DissipationResult:
    """
    Time-domain Kubo route on `grid`.

    The grid must cover the drive until it has decayed below `decay_tolerance`
    of its maximum (otherwise ConvergenceError). The metadata carries the
    difference to the same computation on the grid with doubled dt.
    """
    print_if_verbose = create_print_if_verbose(verbose)
    boundary_ratio = check_decay(signal, grid, decay_tolerance)
    delta_e, scale, history = _time_route(resp, signal, grid, method)
    meta: Dict[str, Any] = {
        "n_max": resp.n_max,
        "beta": resp.beta,
        "dt": grid.dt,
        "t_start": grid.t_start,
        "t_end": grid.t_end,
        "steps": grid.steps,
        "method": method,
        "boundary_ratio": boundary_ratio,
        "drive": describe(signal),
    }
    if grid.steps % 2 == 0 and grid.steps >= 4:
        coarse_value, _, _ = _time_route(resp, signal, grid.coarsened(2), method)
        meta["halving_difference"] = abs(delta_e - coarse_value)
        meta["richardson_estimate"] = delta_e + (delta_e - coarse_value) / 3.0
    print_if_verbose(f"kubo_time: dt={grid.dt} steps={grid.steps} delta_e={delta_e:.10e}")
    if history_path:
        write_force_history(history_path, history)
    return DissipationResult(delta_e + 0.0, "kubo_time", meta, scale)


def write_force_history(path: str, history: Dict[str, np.ndarray]) -> None:
    """CSV with columns t, q, v, F_f."""
    from output_utils import write_table

    columns = ["t", "q", "v", "F_f"]
    rows = [dict(zip(columns, values)) for values in zip(*(history[c] for c in columns))]
    write_table(path, columns, rows, fmt="csv", provenance="kubo friction force history")


def partial_integration_check(signal: DriveSignal, omega: float, grid: TimeGrid) -> Tuple[complex, complex]:
    """
    Double integral over t > t' of qdot(t) q(t') (exp(-i w (t - t')) - exp(i w (t - t')))
    on `grid`, and its closed form i w q_hat(w) q_hat(-w).
    """
    times = grid.times
    q = evaluate(signal, times)
    qdot = np.gradient(q, grid.dt, edge_order=2)
    inner_minus = cumulative_trapezoid(q * np.exp(1j * omega * times), dx=grid.dt, initial=0.0)
    inner_plus = cumulative_trapezoid(q * np.exp(-1j * omega * times), dx=grid.dt, initial=0.0)
    integrand = qdot * (np.exp(-1j * omega * times) * inner_minus - np.exp(1j * omega * times) * inner_plus)
    numeric = complex(trapezoid(integrand, dx=grid.dt))
    closed = 1j * omega * fourier(signal, omega) * fourier(signal, -omega)
    return numeric, complex(closed)
