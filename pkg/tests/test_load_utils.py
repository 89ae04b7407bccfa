import math
import os

import pytest

from errors import ConfigError
from load_utils import DEFAULT_CONFIG, build_config, load_config, parse_config_text, parse_overrides

INPUTS = os.path.join(os.path.dirname(__file__), 'inputs')


def _write_config(tmp_path, text):
    p = tmp_path / "experiment.cfg"
    p.write_text(text, encoding='utf-8')
    return str(p)


def test_load_config_from_file():
    config = load_config(os.path.join(INPUTS, 'compare_small.cfg'))
    assert config.experiment == 'compare'
    assert config.omega2 == 1.3
    assert config.routes == ('spectral', 'kubo_freq')
    assert config.n_max == 4
    assert config.jobs == 1
    assert config.tail_tolerance == 0.1
    assert config.verbose is False


def test_defaults_cover_every_field():
    config = build_config({})
    assert config.experiment == 'compare'
    assert config.gamma == 0.01
    assert config.n_max is None
    assert config.temperatures == (2.0, 1.0, 0.5, 0.25, 0.1, 0.0)
    assert config.jobs >= 1
    assert set(config.as_dict()) == set(DEFAULT_CONFIG)


def test_default_jobs_follow_cpu_affinity(monkeypatch):
    monkeypatch.setattr(os, 'sched_getaffinity', lambda pid: {0, 2, 5}, raising=False)
    monkeypatch.setattr(os, 'cpu_count', lambda: 64)
    assert build_config({}).jobs == 3
    assert build_config({'jobs': '2'}).jobs == 2


def test_default_jobs_without_affinity_support(monkeypatch):
    monkeypatch.delattr(os, 'sched_getaffinity', raising=False)
    monkeypatch.setattr(os, 'cpu_count', lambda: 6)
    assert build_config({}).jobs == 6
    monkeypatch.setattr(os, 'cpu_count', lambda: None)
    assert build_config({}).jobs == 1


def test_comments_and_blank_lines_are_ignored():
    values = parse_config_text("# header\n\nomega1 = 2.0  # trailing\n  beta=inf\n")
    assert values == {'omega1': '2.0', 'beta': 'inf'}
    assert build_config(values).beta == math.inf


def test_unknown_key_raises():
    with pytest.raises(ConfigError) as e:
        parse_config_text("omega3 = 1.0")
    assert "unknown config key 'omega3'" in str(e.value)


def test_duplicate_key_raises():
    with pytest.raises(ConfigError) as e:
        parse_config_text("eta = 0.1\neta = 0.2")
    assert "duplicate config key 'eta'" in str(e.value)


def test_malformed_line_raises():
    with pytest.raises(ConfigError) as e:
        parse_config_text("omega1 1.0", source="x.cfg")
    assert "x.cfg:1" in str(e.value)


def test_overrides_win_over_file(tmp_path):
    path = _write_config(tmp_path, "experiment = compare\neta = 0.1\n")
    config = load_config(path, ['eta=0.2', 'eta=0.3'], experiment='sweep-eta')
    assert config.eta == 0.3
    assert config.experiment == 'sweep-eta'


def test_override_needs_key_value():
    with pytest.raises(ConfigError) as e:
        parse_overrides(['eta'])
    assert "key=value" in str(e.value)


def test_zero_eta_is_a_config_error():
    with pytest.raises(ConfigError) as e:
        build_config({'eta': '0'})
    assert "eta must be a positive number" in str(e.value)
    assert e.value.category == 'config'


@pytest.mark.parametrize("key, value, fragment", [
    ('omega1', 'abc', "omega1 must be a number"),
    ('beta', 'nan', "beta must be a number"),
    ('omega2', 'inf', "omega2 must be a positive number"),
    ('drive', 'square', "Invalid drive 'square'"),
    ('format', 'xml', "Invalid format 'xml'"),
    ('n_max', '0', "n_max must be >= 1"),
    ('detuning_points', 'many', "detuning_points must be an integer"),
    ('verbose', 'maybe', "verbose must be true or false"),
    ('routes', 'spectral, magic', "Invalid route 'magic'"),
    ('temperatures', '1.0, -2', "temperatures entries must be non-negative"),
])
def test_invalid_values_name_the_key(key, value, fragment):
    with pytest.raises(ConfigError) as e:
        build_config({key: value})
    assert fragment in str(e.value)


def test_experiment_lists_are_checked():
    with pytest.raises(ConfigError) as e:
        build_config({'experiment': 'sweep-temperature', 'temperatures': ''})
    assert "nonempty 'temperatures'" in str(e.value)
    with pytest.raises(ConfigError) as e:
        build_config({'experiment': 'sweep-eta', 'etas': '0.01, 0.02'})
    assert "strictly decreasing" in str(e.value)
    with pytest.raises(ConfigError) as e:
        build_config({'experiment': 'sweep-detuning', 'detuning_points': '400'})
    assert "must be odd" in str(e.value)


def test_tabulated_drive_needs_file():
    with pytest.raises(ConfigError) as e:
        build_config({'drive': 'tabulated'})
    assert "needs drive_file" in str(e.value)


def test_horizon_bounds_come_together():
    with pytest.raises(ConfigError):
        build_config({'t_start': '0'})
    with pytest.raises(ConfigError):
        build_config({'t_start': '5', 't_end': '1'})
    config = build_config({'t_start': '-10', 't_end': '10'})
    assert (config.t_start, config.t_end) == (-10.0, 10.0)


def test_gamma_composed_from_physics():
    config = build_config({'v_dot_grad_psi': '2.0', 'omega1': '1.0', 'omega2': '1.0'})
    assert config.gamma == pytest.approx(1.0)
    assert config.v_dot_grad_psi == 2.0
    explicit = build_config({'v_dot_grad_psi': '2.0', 'gamma': '0.5'})
    assert explicit.gamma == 0.5


def test_missing_config_file_raises():
    with pytest.raises(ConfigError) as e:
        load_config('does/not/exist.cfg')
    assert "Config file not found" in str(e.value)
