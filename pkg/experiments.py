"""
Experiment orchestration behind the `cfl` command.

Each experiment turns an ExperimentConfig into a result table (columns plus
row dicts) and a metadata dict. Independent sweep points go to a worker pool;
results come back in config order regardless of completion order.
"""
import math
import multiprocessing
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from drive import DriveSignal, TimeGrid, gaussian_pulse, load_tabulated, ramp_exp, suggested_grid
from errors import ConfigError, ConvergenceError
from fockspace import HermitianOperator, OscillatorSpec, ProductBasis, build_basis, full_coupling, rwa_coupling
from kubo import delta_e_kubo_freq, delta_e_kubo_time, response
from load_utils import ExperimentConfig
from output_utils import TOOL_VERSION, write_metadata, write_table
from print_utils import create_print_if_verbose, dump_route_table
from propagator import PropagationRun, counter_rotating_audit, delta_e_propagated
from resonance import ResonanceConfig, compare_routes_near_resonance, delta_e_closed_form, eta_scaling_study
from spectral import DissipationResult, spectral_dissipation
from thermal import ThermalEnsemble, make_ensemble, n_max_for_tail, occupancy_tail


@dataclass
class ExperimentResult:
    columns: List[str]
    rows: List[Dict[str, Any]]
    meta: Dict[str, Any] = field(default_factory=dict)


def pool_map(fn: Callable, items: Sequence, jobs: int) -> List:
    """map() over a process pool of `jobs` workers; order follows `items`."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with multiprocessing.Pool(processes=min(jobs, len(items))) as pool:
        return pool.map(fn, items)


def beta_from_temperature(temperature: float) -> float:
    return math.inf if temperature == 0 else 1.0 / temperature


def oscillators(config: ExperimentConfig, omega2: Optional[float] = None) -> Tuple[OscillatorSpec, OscillatorSpec]:
    return (
        OscillatorSpec(config.omega1, config.mass1),
        OscillatorSpec(config.omega2 if omega2 is None else omega2, config.mass2),
    )


def basis_for(config: ExperimentConfig, beta: float, omega2: Optional[float] = None) -> ProductBasis:
    """
    Product basis at the configured truncation, or the smallest one whose
    occupancy tail is below tail_tolerance.
    """
    spec1, spec2 = oscillators(config, omega2)
    lowest = min(spec1.omega, spec2.omega)
    n_max = config.n_max
    if n_max is None:
        n_max = n_max_for_tail(beta, lowest, config.tail_tolerance)
    tail = occupancy_tail(beta, lowest, n_max)
    if tail >= config.tail_tolerance:
        raise ConvergenceError(
            f"n_max={n_max} leaves an occupancy tail {tail:.3e} above tail_tolerance={config.tail_tolerance:g}",
            {"n_max": n_max, "tail": tail, "beta": beta},
        )
    return build_basis(spec1, spec2, n_max)


def coupling_for(config: ExperimentConfig, basis: ProductBasis) -> HermitianOperator:
    return rwa_coupling(basis) if config.coupling == 'rwa' else full_coupling(basis)


def drive_for(config: ExperimentConfig) -> DriveSignal:
    if config.drive == 'ramp_exp':
        return ramp_exp(config.gamma, config.eta)
    if config.drive == 'gaussian_pulse':
        return gaussian_pulse(config.gamma, config.tau, config.t0)
    try:
        return load_tabulated(config.drive_file)
    except (OSError, ValueError) as e:
        raise ConfigError(f"Cannot load drive_file {config.drive_file}: {e}")


def grid_for(config: ExperimentConfig, signal: DriveSignal) -> TimeGrid:
    if config.t_start is not None:
        try:
            return TimeGrid(config.t_start, config.t_end, config.dt)
        except ValueError as e:
            raise ConfigError(str(e))
    return suggested_grid(signal, config.dt, config.decay_tolerance)


def _setup(config: ExperimentConfig, beta: float) -> Tuple[ProductBasis, ThermalEnsemble, HermitianOperator, DriveSignal]:
    basis = basis_for(config, beta)
    return basis, make_ensemble(basis, beta), coupling_for(config, basis), drive_for(config)


def _route_row(route: str, result: DissipationResult, reference: DissipationResult) -> Dict[str, Any]:
    return {'route': route, 'delta_e': result.delta_e, 'rel_gap_vs_spectral': result.relative_gap(reference)}


def run_compare(config: ExperimentConfig) -> ExperimentResult:
    """Every requested route on one configuration, with gaps relative to the spectral route."""
    print_if_verbose = create_print_if_verbose(config.verbose)
    basis, ensemble, A, signal = _setup(config, config.beta)
    reference = spectral_dissipation(A, signal, ensemble, basis)
    results: Dict[str, DissipationResult] = {'spectral': reference}
    resp = None
    for route in config.routes:
        print_if_verbose(f'route {route} (n_max={basis.n_max}, dim={basis.dim})')
        if route in ('kubo_freq', 'kubo_time') and resp is None:
            resp = response(A, ensemble, basis)
        if route == 'kubo_freq':
            results[route] = delta_e_kubo_freq(resp, signal)
        elif route == 'kubo_time':
            grid = grid_for(config, signal)
            results[route] = delta_e_kubo_time(
                resp, signal, grid, config.convolution, config.decay_tolerance, verbose=config.verbose
            )
        elif route == 'propagator':
            grid = grid_for(config, signal)
            run = PropagationRun(config.dt, grid.t_start, grid.t_end, decay_tolerance=config.decay_tolerance,
                                 verbose=config.verbose)
            results[route] = delta_e_propagated(ensemble, A, signal, run, basis)
        elif route == 'closed_form':
            if config.drive != 'ramp_exp' or config.coupling != 'rwa':
                raise ConfigError("closed_form route needs drive = ramp_exp and coupling = rwa")
            results[route] = delta_e_closed_form(
                ResonanceConfig(config.omega1, config.omega2, config.beta, config.gamma, config.eta)
            )
    rows = [_route_row(route, results[route], reference) for route in config.routes]
    meta = {f'{route}_meta': results[route].meta for route in config.routes}
    if resp is not None:
        meta['kubo_self_check'] = resp.self_check
    return ExperimentResult(['route', 'delta_e', 'rel_gap_vs_spectral'], rows, meta)


def _temperature_point(args: Tuple[ExperimentConfig, float]) -> Dict[str, Any]:
    config, temperature = args
    beta = beta_from_temperature(temperature)
    basis, ensemble, A, signal = _setup(config, beta)
    result = spectral_dissipation(A, signal, ensemble, basis)
    return {'temperature': float(temperature), 'beta': beta, 'n_max': basis.n_max, 'delta_e': result.delta_e}


def run_sweep_temperature(config: ExperimentConfig) -> ExperimentResult:
    """Spectral-route dissipation for each temperature (0 means the ground state)."""
    rows = pool_map(_temperature_point, [(config, t) for t in config.temperatures], config.jobs)
    return ExperimentResult(['temperature', 'beta', 'n_max', 'delta_e'], rows, {})


def _resonance_config(config: ExperimentConfig, beta: float) -> ResonanceConfig:
    return ResonanceConfig(config.omega1, config.omega1, beta, config.gamma, config.eta)


def _detuning_sweep(args: Tuple[ExperimentConfig, float]) -> Dict[str, Any]:
    config, beta = args
    return compare_routes_near_resonance(
        _resonance_config(config, beta), config.detuning_span, config.detuning_points, config.n_max,
        config.tail_tolerance, config.verbose,
    )


def run_sweep_detuning(config: ExperimentConfig) -> ExperimentResult:
    """Rotating-wave lineshape against the closed form for each beta (ramp drive)."""
    betas = list(config.betas or (config.beta,))
    sweeps = pool_map(_detuning_sweep, [(config, b) for b in betas], config.jobs)
    rows, summary = [], []
    for beta, sweep in zip(betas, sweeps):
        rows.extend({'beta': beta, **row} for row in sweep['rows'])
        summary.append({k: v for k, v in sweep.items() if k != 'rows'} | {'beta': beta})
    columns = ['beta', 'detuning', 'delta_e_spectral', 'delta_e_closed_form', 'rel_gap']
    return ExperimentResult(columns, rows, {'integrated': summary, 'drive': 'ramp_exp', 'coupling': 'rwa'})


def _eta_study(args: Tuple[ExperimentConfig, float]) -> List[Dict[str, Any]]:
    config, beta = args
    return eta_scaling_study(
        _resonance_config(config, beta), config.etas, config.detuning_span, config.detuning_points,
        config.tail_tolerance, config.verbose,
    )


def run_sweep_eta(config: ExperimentConfig) -> ExperimentResult:
    """Detuning-integrated dissipation against eta for each beta."""
    betas = list(config.betas or (config.beta,))
    studies = pool_map(_eta_study, [(config, b) for b in betas], config.jobs)
    rows = [{'beta': beta, **row} for beta, study in zip(betas, studies) for row in study]
    columns = ['beta', 'eta', 'delta_e', 'eta_delta_e', 'closed_form']
    return ExperimentResult(columns, rows, {'drive': 'ramp_exp', 'coupling': 'rwa'})


def run_propagate(config: ExperimentConfig) -> ExperimentResult:
    """Exact propagation against the spectral prediction, with a rerun at dt/2 as its error estimate."""
    basis, ensemble, A, signal = _setup(config, config.beta)
    grid = grid_for(config, signal)
    run = PropagationRun(config.dt, grid.t_start, grid.t_end, decay_tolerance=config.decay_tolerance,
                         verbose=config.verbose)
    reference = spectral_dissipation(A, signal, ensemble, basis)
    propagated = delta_e_propagated(ensemble, A, signal, run, basis)
    halved = delta_e_propagated(ensemble, A, signal, run.with_dt(0.5 * run.dt), basis)
    rows = [_route_row('spectral', reference, reference), _route_row('propagator', propagated, reference)]
    meta = {
        'propagator_meta': propagated.meta,
        'dt_halving_difference': abs(halved.delta_e - propagated.delta_e),
    }
    return ExperimentResult(['route', 'delta_e', 'rel_gap_vs_spectral'], rows, meta)


def _audit_point(args: Tuple[ExperimentConfig, float]) -> Dict[str, Any]:
    config, eta = args
    n_max = basis_for(config, config.beta, config.omega1 + config.detuning_multiple * eta).n_max
    return counter_rotating_audit(
        config.omega1, config.beta, config.gamma, [eta], n_max, config.dt, config.detuning_multiple,
        config.decay_tolerance, config.verbose,
    )[0]


def run_audit(config: ExperimentConfig) -> ExperimentResult:
    """Counter-rotating contribution to the propagated dissipation for each eta."""
    rows = pool_map(_audit_point, [(config, eta) for eta in config.etas], config.jobs)
    columns = ['eta', 'omega2', 'delta_e_rwa', 'delta_e_full', 'relative_gap']
    return ExperimentResult(columns, rows, {'detuning_multiple': config.detuning_multiple})


EXPERIMENT_RUNNERS: Dict[str, Callable[[ExperimentConfig], ExperimentResult]] = {
    'compare': run_compare,
    'sweep-temperature': run_sweep_temperature,
    'sweep-detuning': run_sweep_detuning,
    'sweep-eta': run_sweep_eta,
    'propagate': run_propagate,
    'audit-counter-rotating': run_audit,
}


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run the configured experiment and attach inputs, version and wall time to the metadata."""
    start = time.perf_counter()
    result = EXPERIMENT_RUNNERS[config.experiment](config)
    result.meta.update(
        {
            'experiment': config.experiment,
            'config': config.as_dict(),
            'tool_version': TOOL_VERSION,
            'rows': len(result.rows),
            'wall_time': time.perf_counter() - start,
            'error_category': None,
        }
    )
    return result


def run(config: ExperimentConfig) -> ExperimentResult:
    """
    Execute the experiment, print the headline table and write the results
    plus `<output>.meta.json` when an output path is configured.
    """
    result = execute(config)
    dump_route_table(result.rows, config.experiment, result.columns)
    if config.output:
        write_table(config.output, result.columns, result.rows, config.format, f'experiment={config.experiment}')
        write_metadata(config.output, result.meta)
    return result
