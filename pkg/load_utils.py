import math
import os
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

from errors import ConfigError

EXPERIMENTS = ('compare', 'sweep-temperature', 'sweep-detuning', 'sweep-eta', 'propagate', 'audit-counter-rotating')
DRIVES = ('ramp_exp', 'gaussian_pulse', 'tabulated')
COUPLINGS = ('rwa', 'full')
FORMATS = ('csv', 'json')
COMPARE_ROUTES = ('spectral', 'kubo_freq', 'kubo_time', 'propagator', 'closed_form')
CONVOLUTIONS = ('direct', 'fft')

# Every key a config file or a --set flag may name, with its default as text.
DEFAULT_CONFIG: Dict[str, str] = {
    'experiment': 'compare',
    'omega1': '1.0',
    'omega2': '1.3',
    'mass1': '1.0',
    'mass2': '1.0',
    'beta': '1.0',
    'temperatures': '2.0, 1.0, 0.5, 0.25, 0.1, 0',
    'betas': '',
    'gamma': '',
    'v_dot_grad_psi': '',
    'eta': '0.1',
    'etas': '0.02, 0.01, 0.005',
    'tau': '5.0',
    't0': '0.0',
    'drive': 'gaussian_pulse',
    'drive_file': '',
    'coupling': 'rwa',
    'routes': 'spectral, kubo_freq, kubo_time, propagator',
    'detuning_span': '10.0',
    'detuning_points': '401',
    'detuning_multiple': '1.0',
    'n_max': 'auto',
    'dt': '0.01',
    't_start': '',
    't_end': '',
    'output': '',
    'format': 'csv',
    'jobs': '',
    'tail_tolerance': '1e-10',
    'decay_tolerance': '1e-10',
    'convolution': 'direct',
    'verbose': 'false',
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    omega1: float
    omega2: float
    mass1: float
    mass2: float
    beta: float
    temperatures: Tuple[float, ...]
    betas: Tuple[float, ...]
    gamma: float
    v_dot_grad_psi: Optional[float]
    eta: float
    etas: Tuple[float, ...]
    tau: float
    t0: float
    drive: str
    drive_file: Optional[str]
    coupling: str
    routes: Tuple[str, ...]
    detuning_span: float
    detuning_points: int
    detuning_multiple: float  # audit: omega2 - omega1 in units of eta
    n_max: Optional[int]  # None = smallest truncation meeting tail_tolerance
    dt: float
    t_start: Optional[float]
    t_end: Optional[float]
    output: Optional[str]
    format: str
    jobs: int
    tail_tolerance: float
    decay_tolerance: float
    convolution: str
    verbose: bool

    def as_dict(self) -> Dict[str, object]:
        """Plain values for the metadata sidecar."""
        out: Dict[str, object] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


def parse_config_text(text: str, source: str = '<config>') -> Dict[str, str]:
    """
    Parse flat `key = value` lines; '#' starts a comment, blank lines are ignored.

    Raises:
        ConfigError: malformed line, duplicate or unknown key
    """
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"{source}:{lineno}: unknown config key '{key}'. Valid keys: {sorted(DEFAULT_CONFIG)}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key '{key}'")
        values[key] = value
    return values


def load_config_file(path: str) -> Dict[str, str]:
    if not path:
        raise ConfigError("Config file path cannot be empty")
    if not os.path.isfile(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except UnicodeDecodeError:
        raise ConfigError(f"File encoding error in {path}. Expected UTF-8.")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    return parse_config_text(text, path)


def parse_overrides(overrides: Sequence[str]) -> Dict[str, str]:
    """`--set key=value` flags; later flags win over earlier ones."""
    values: Dict[str, str] = {}
    for item in overrides or ():
        if '=' not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, value = (part.strip() for part in item.split('=', 1))
        if key not in DEFAULT_CONFIG:
            raise ConfigError(f"unknown config key '{key}' in --set. Valid keys: {sorted(DEFAULT_CONFIG)}")
        values[key] = value
    return values


def _number(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got '{text}'")
    if math.isnan(value):
        raise ConfigError(f"{key} must be a number, got NaN")
    return value


def _positive(key: str, text: str, allow_inf: bool = False) -> float:
    value = _number(key, text)
    if value <= 0 or (math.isinf(value) and not allow_inf):
        raise ConfigError(f"{key} must be a positive number, got {text}")
    return value


def _optional(key: str, text: str) -> Optional[float]:
    return _number(key, text) if text else None


def _number_list(key: str, text: str, allow_zero: bool = False) -> Tuple[float, ...]:
    items = [part.strip() for part in text.split(',') if part.strip()]
    values = tuple(_number(key, item) for item in items)
    for value in values:
        if math.isinf(value) or (value < 0) or (value == 0 and not allow_zero):
            raise ConfigError(f"{key} entries must be {'non-negative' if allow_zero else 'positive'} and finite, got {value}")
    return values


def _choice(key: str, text: str, choices: Sequence[str]) -> str:
    if text not in choices:
        raise ConfigError(f"Invalid {key} '{text}'. Must be one of {list(choices)}")
    return text


def available_processors() -> int:
    """Processors this process may run on, which can be fewer than the machine has."""
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        # not available on macOS or Windows
        return os.cpu_count() or 1


def _integer(key: str, text: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got '{text}'")
    if value < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return value


def _boolean(key: str, text: str) -> bool:
    lowered = text.lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"{key} must be true or false, got '{text}'")


def _compose_gamma(raw: Dict[str, str]) -> Tuple[float, Optional[float]]:
    from drive import gamma_from_physics
    from fockspace import OscillatorSpec

    v_dot_grad_psi = _optional('v_dot_grad_psi', raw['v_dot_grad_psi'])
    if raw['gamma']:
        return _number('gamma', raw['gamma']), v_dot_grad_psi
    if v_dot_grad_psi is None:
        return 0.01, None
    spec1 = OscillatorSpec(_positive('omega1', raw['omega1']), _positive('mass1', raw['mass1']))
    spec2 = OscillatorSpec(_positive('omega2', raw['omega2']), _positive('mass2', raw['mass2']))
    return gamma_from_physics(v_dot_grad_psi, spec1, spec2), v_dot_grad_psi


def build_config(raw: Dict[str, str]) -> ExperimentConfig:
    """
    Validate merged text values into an ExperimentConfig.

    Raises:
        ConfigError: naming the offending key
    """
    raw = {**DEFAULT_CONFIG, **raw}
    gamma, v_dot_grad_psi = _compose_gamma(raw)
    if not math.isfinite(gamma):
        raise ConfigError(f"gamma must be finite, got {gamma}")
    drive = _choice('drive', raw['drive'], DRIVES)
    drive_file = raw['drive_file'] or None
    if drive == 'tabulated' and not drive_file:
        raise ConfigError("drive = tabulated needs drive_file")
    routes = tuple(r.strip() for r in raw['routes'].split(',') if r.strip())
    if not routes:
        raise ConfigError("routes must name at least one route")
    for route in routes:
        _choice('route', route, COMPARE_ROUTES)
    t_start, t_end = _optional('t_start', raw['t_start']), _optional('t_end', raw['t_end'])
    if (t_start is None) != (t_end is None):
        raise ConfigError("t_start and t_end must be given together")
    if t_start is not None and t_end <= t_start:
        raise ConfigError(f"t_end ({t_end}) must exceed t_start ({t_start})")
    config = ExperimentConfig(
        experiment=_choice('experiment', raw['experiment'], EXPERIMENTS),
        omega1=_positive('omega1', raw['omega1']),
        omega2=_positive('omega2', raw['omega2']),
        mass1=_positive('mass1', raw['mass1']),
        mass2=_positive('mass2', raw['mass2']),
        beta=_positive('beta', raw['beta'], allow_inf=True),
        temperatures=_number_list('temperatures', raw['temperatures'], allow_zero=True),
        betas=_number_list('betas', raw['betas']),
        gamma=gamma,
        v_dot_grad_psi=v_dot_grad_psi,
        eta=_positive('eta', raw['eta']),
        etas=_number_list('etas', raw['etas']),
        tau=_positive('tau', raw['tau']),
        t0=_number('t0', raw['t0']),
        drive=drive,
        drive_file=drive_file,
        coupling=_choice('coupling', raw['coupling'], COUPLINGS),
        routes=routes,
        detuning_span=_positive('detuning_span', raw['detuning_span']),
        detuning_points=_integer('detuning_points', raw['detuning_points'], 3),
        detuning_multiple=_positive('detuning_multiple', raw['detuning_multiple']),
        n_max=None if raw['n_max'] == 'auto' else _integer('n_max', raw['n_max'], 1),
        dt=_positive('dt', raw['dt']),
        t_start=t_start,
        t_end=t_end,
        output=raw['output'] or None,
        format=_choice('format', raw['format'], FORMATS),
        jobs=_integer('jobs', raw['jobs'], 1) if raw['jobs'] else available_processors(),
        tail_tolerance=_positive('tail_tolerance', raw['tail_tolerance']),
        decay_tolerance=_positive('decay_tolerance', raw['decay_tolerance']),
        convolution=_choice('convolution', raw['convolution'], CONVOLUTIONS),
        verbose=_boolean('verbose', raw['verbose']),
    )
    _check_experiment_lists(config)
    return config


def _check_experiment_lists(config: ExperimentConfig) -> None:
    required: Dict[str, List[str]] = {
        'sweep-temperature': ['temperatures'],
        'sweep-eta': ['etas'],
        'audit-counter-rotating': ['etas'],
    }
    for key in required.get(config.experiment, []):
        if not getattr(config, key):
            raise ConfigError(f"{config.experiment} needs a nonempty '{key}' list")
    if config.experiment in ('sweep-eta', 'audit-counter-rotating'):
        etas = list(config.etas)
        if any(later >= earlier for earlier, later in zip(etas, etas[1:])):
            raise ConfigError(f"etas must be strictly decreasing, got {etas}")
    if config.experiment in ('sweep-detuning', 'sweep-eta') and config.detuning_points % 2 == 0:
        raise ConfigError(f"detuning_points must be odd (zero detuning on the grid), got {config.detuning_points}")
    if not 0 < config.tail_tolerance < 1:
        raise ConfigError(f"tail_tolerance must be in (0, 1), got {config.tail_tolerance}")


def load_config(path: Optional[str] = None, overrides: Sequence[str] = (), experiment: Optional[str] = None) -> ExperimentConfig:
    """
    Defaults, then the config file, then `experiment` (the CLI positional), then --set flags.
    """
    raw: Dict[str, str] = {}
    if path:
        raw.update(load_config_file(path))
    if experiment:
        raw['experiment'] = experiment
    raw.update(parse_overrides(overrides))
    return build_config(raw)
