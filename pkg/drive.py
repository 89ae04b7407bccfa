"""
Classical drive q(t) multiplying the coupling operator, and its Fourier transform

    q_hat(w) = integral q(t) exp(-i w t) dt.

The drive carries every dimensional prefactor of the interaction (gamma), so
operators from fockspace stay dimensionless. The constant first term of the
expanded interaction is a reversible force and is never part of a drive.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from errors import ConvergenceError
from fockspace import OscillatorSpec

DRIVE_KINDS = ("ramp_exp", "gaussian_pulse", "tabulated", "superposition")
DEFAULT_DECAY_TOLERANCE = 1e-10
GRID_RTOL = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_start, t_start + dt, ..., t_end (both ends included)."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        steps = (self.t_end - self.t_start) / self.dt
        if abs(steps - round(steps)) > GRID_RTOL * max(1.0, steps):
            raise ValueError(
                f"horizon [{self.t_start}, {self.t_end}] is not an integer number of steps dt={self.dt}"
            )

    @property
    def steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.steps + 1)

    def coarsened(self, factor: int = 2) -> "TimeGrid":
        if self.steps % factor:
            raise ValueError(f"{self.steps} steps cannot be coarsened by {factor}")
        return TimeGrid(self.t_start, self.t_end, self.dt * factor)


@dataclass(frozen=True, eq=False)
class DriveSignal:
    kind: str
    gamma: float = 1.0
    eta: Optional[float] = None
    tau: Optional[float] = None
    t0: float = 0.0
    times: Optional[np.ndarray] = field(default=None, repr=False)
    values: Optional[np.ndarray] = field(default=None, repr=False)
    components: Tuple["DriveSignal", ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in DRIVE_KINDS:
            raise ValueError(f"Invalid drive kind '{self.kind}'. Must be one of {list(DRIVE_KINDS)}")
        if not np.isfinite(self.gamma):
            raise ValueError(f"gamma must be finite, got {self.gamma}")
        if self.kind == "ramp_exp":
            if self.eta is None or not self.eta > 0 or not np.isfinite(self.eta):
                raise ValueError(f"ramp_exp needs eta > 0 (the eta -> 0 limit is taken by extrapolation), got {self.eta}")
        elif self.kind == "gaussian_pulse":
            if self.tau is None or not self.tau > 0 or not np.isfinite(self.tau):
                raise ValueError(f"gaussian_pulse needs tau > 0, got {self.tau}")
        elif self.kind == "superposition":
            if not self.components:
                raise ValueError("superposition drive needs at least one component")
        elif self.kind == "tabulated":
            self._validate_table()

    def _validate_table(self) -> None:
        if self.times is None or self.values is None:
            raise ValueError("tabulated drive needs times and values")
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size < 3:
            raise ValueError("tabulated drive needs matching 1-d times/values with at least 3 samples")
        steps = np.diff(times)
        if np.any(steps <= 0) or np.max(np.abs(steps - steps[0])) > 1e-6 * steps[0]:
            raise ValueError("tabulated drive must be sampled on a uniform increasing grid")
        peak = float(np.max(np.abs(values)))
        if peak > 0 and max(abs(values[0]), abs(values[-1])) > DEFAULT_DECAY_TOLERANCE * peak:
            raise ValueError(
                f"tabulated drive does not decay below {DEFAULT_DECAY_TOLERANCE:g} of max|q| at the grid ends "
                f"(|q| = {abs(values[0]):.3e}, {abs(values[-1]):.3e}; max {peak:.3e})"
            )
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)


def ramp_exp(gamma: float, eta: float) -> DriveSignal:
    """q(t) = gamma t exp(-eta t) for t > 0, zero before."""
    return DriveSignal("ramp_exp", gamma=gamma, eta=eta)


def gaussian_pulse(gamma: float, tau: float, t0: float = 0.0) -> DriveSignal:
    """q(t) = gamma exp(-((t - t0) / tau)^2)."""
    return DriveSignal("gaussian_pulse", gamma=gamma, tau=tau, t0=t0)


def tabulated(times: Sequence[float], values: Sequence[float]) -> DriveSignal:
    return DriveSignal("tabulated", times=np.array(times, dtype=float), values=np.array(values, dtype=float))


def superposition(signals: Sequence[DriveSignal]) -> DriveSignal:
    return DriveSignal("superposition", components=tuple(signals))


def gamma_from_physics(v_dot_grad_psi: float, spec1: OscillatorSpec, spec2: OscillatorSpec) -> float:
    """gamma = (D hbar / 2)^{1/2} (v . grad psi), D = hbar / (2 m1 m2 w1 w2), hbar = 1."""
    d = 1.0 / (2.0 * spec1.mass * spec2.mass * spec1.omega * spec2.omega)
    return math.sqrt(0.5 * d) * float(v_dot_grad_psi)


def evaluate(signal: DriveSignal, t) -> np.ndarray:
    """q(t) on an array of times (zero outside a tabulated grid)."""
    t = np.asarray(t, dtype=float)
    if signal.kind == "ramp_exp":
        positive = np.maximum(t, 0.0)
        return np.where(t > 0, signal.gamma * positive * np.exp(-signal.eta * positive), 0.0)
    if signal.kind == "gaussian_pulse":
        return signal.gamma * np.exp(-(((t - signal.t0) / signal.tau) ** 2))
    if signal.kind == "tabulated":
        return np.interp(t, signal.times, signal.values, left=0.0, right=0.0)
    return sum((evaluate(c, t) for c in signal.components), np.zeros_like(t))


def _tabulated_fourier(signal: DriveSignal, omega: np.ndarray) -> np.ndarray:
    out = np.empty(omega.shape, dtype=complex)
    for k, w in np.ndenumerate(omega):
        out[k] = trapezoid(signal.values * np.exp(-1j * w * signal.times), signal.times)
    return out


def fourier(signal: DriveSignal, omega):
    """q_hat(omega); scalar in, complex scalar out, arrays broadcast."""
    w = np.asarray(omega, dtype=float)
    if signal.kind == "ramp_exp":
        result = signal.gamma / (signal.eta + 1j * w) ** 2
    elif signal.kind == "gaussian_pulse":
        tau = signal.tau
        result = (
            signal.gamma * math.sqrt(math.pi) * tau
            * np.exp(-0.25 * (w * tau) ** 2) * np.exp(-1j * w * signal.t0)
        )
    elif signal.kind == "tabulated":
        result = _tabulated_fourier(signal, w)
    else:
        result = sum((np.asarray(fourier(c, w)) for c in signal.components), np.zeros(w.shape, dtype=complex))
    return complex(result) if np.ndim(result) == 0 else result


def power_kernel(signal: DriveSignal, omega):
    """q_hat(omega) q_hat(-omega) = |q_hat(omega)|^2 for a real drive (real, >= 0)."""
    w = np.asarray(omega, dtype=float)
    if signal.kind == "ramp_exp":
        result = signal.gamma ** 2 / (signal.eta ** 2 + w ** 2) ** 2
    elif signal.kind == "gaussian_pulse":
        result = math.pi * (signal.gamma * signal.tau) ** 2 * np.exp(-0.5 * (w * signal.tau) ** 2)
    else:
        result = np.real(np.asarray(fourier(signal, w)) * np.asarray(fourier(signal, -w)))
    return float(result) if np.ndim(result) == 0 else result


def support(signal: DriveSignal, tolerance: float = DEFAULT_DECAY_TOLERANCE) -> Tuple[float, float]:
    """Interval outside which |q| < tolerance * max|q|."""
    if signal.kind == "ramp_exp":
        # t exp(-eta t) <= tol / (e eta): solve eta t - ln(eta t) = 1 - ln(tol) by fixed point
        target = 1.0 - math.log(tolerance)
        x = target
        for _ in range(60):
            x = target + math.log(x)
        return 0.0, x / signal.eta
    if signal.kind == "gaussian_pulse":
        half = signal.tau * math.sqrt(-math.log(tolerance))
        return signal.t0 - half, signal.t0 + half
    if signal.kind == "tabulated":
        return float(signal.times[0]), float(signal.times[-1])
    spans = [support(c, tolerance) for c in signal.components]
    return min(s[0] for s in spans), max(s[1] for s in spans)


def suggested_grid(signal: DriveSignal, dt: float, tolerance: float = DEFAULT_DECAY_TOLERANCE) -> TimeGrid:
    """Smallest dt-aligned grid covering `support(signal, tolerance)`."""
    lo, hi = support(signal, tolerance)
    start = math.floor(lo / dt) * dt
    steps = math.ceil((hi - start) / dt)
    return TimeGrid(start, start + steps * dt, dt)


def check_decay(signal: DriveSignal, grid: TimeGrid, tolerance: float = DEFAULT_DECAY_TOLERANCE) -> float:
    """
    Raise ConvergenceError when q has not decayed at the grid ends.

    Returns:
        the larger end value relative to max|q| on the grid
    """
    q = evaluate(signal, grid.times)
    peak = float(np.max(np.abs(q)))
    if peak == 0.0:
        return 0.0
    ratio = max(abs(q[0]), abs(q[-1])) / peak
    if ratio > tolerance:
        raise ConvergenceError(
            f"grid [{grid.t_start}, {grid.t_end}] too short: drive is {ratio:.3e} of its maximum at the boundary "
            f"(tolerance {tolerance:g})",
            {"boundary_ratio": ratio, "t_start": grid.t_start, "t_end": grid.t_end},
        )
    return ratio


def tabulate(signal: DriveSignal, grid: TimeGrid) -> DriveSignal:
    return tabulated(grid.times, evaluate(signal, grid.times))


def load_tabulated(path: str) -> DriveSignal:
    """Read a two-column (time, value) whitespace-separated text file with '#' comments."""
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except ValueError as e:
        raise ValueError(f"Invalid tabulated drive file {path}: {e}")
    if data.shape[1] != 2:
        raise ValueError(f"Tabulated drive file {path} must have exactly two columns, found {data.shape[1]}")
    return tabulated(data[:, 0], data[:, 1])


def describe(signal: DriveSignal) -> dict:
    """Plain-data description of a drive for run metadata."""
    if signal.kind == "superposition":
        return {"kind": signal.kind, "components": [describe(c) for c in signal.components]}
    if signal.kind == "tabulated":
        return {
            "kind": signal.kind,
            "samples": int(signal.times.size),
            "t_start": float(signal.times[0]),
            "t_end": float(signal.times[-1]),
        }
    out = {"kind": signal.kind, "gamma": signal.gamma}
    if signal.kind == "ramp_exp":
        out["eta"] = signal.eta
    else:
        out.update({"tau": signal.tau, "t0": signal.t0})
    return out
