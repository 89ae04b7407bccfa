import os
import shutil

import pytest

from errors import GoldenError
from golden_utils import TOLERANCE_FILE, golden_check, golden_names, load_tolerances, update_goldens

GOLDENS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'goldens')


def _copy_goldens(tmp_path):
    target = tmp_path / 'goldens'
    shutil.copytree(GOLDENS, target)
    return target


def _set_key(path, key, value):
    lines = path.read_text(encoding='utf-8').splitlines()
    lines = [f'{key} = {value}' if line.split('=')[0].strip() == key else line for line in lines]
    path.write_text('\n'.join(lines) + '\n', encoding='utf-8')


def test_untouched_goldens_pass():
    outcomes = golden_check(GOLDENS)
    assert [o.name for o in outcomes] == golden_names(GOLDENS)
    assert all(o.passed for o in outcomes), [o.divergence for o in outcomes if not o.passed]


def test_perturbed_gamma_fails_exactly_that_golden(tmp_path):
    goldens = _copy_goldens(tmp_path)
    _set_key(goldens / 't0_full_sweep_temperature.cfg', 'gamma', '1.001')
    outcomes = {o.name: o for o in golden_check(str(goldens))}
    assert not outcomes['t0_full_sweep_temperature'].passed
    assert 'column delta_e' in outcomes['t0_full_sweep_temperature'].divergence
    assert all(o.passed for name, o in outcomes.items() if name != 't0_full_sweep_temperature')


def test_finite_temperature_goldens_catch_a_small_perturbation(tmp_path):
    goldens = _copy_goldens(tmp_path)
    _set_key(goldens / 'compare_rwa_gaussian.cfg', 'gamma', '0.01001')
    outcomes = {o.name: o for o in golden_check(str(goldens))}
    assert {'compare_rwa_gaussian', 'finite_t_full_sweep_temperature', 'sweep_detuning_short'} <= set(outcomes)
    assert not outcomes['compare_rwa_gaussian'].passed
    assert 'column delta_e' in outcomes['compare_rwa_gaussian'].divergence
    assert all(o.passed for name, o in outcomes.items() if name != 'compare_rwa_gaussian')


def test_missing_tolerance_file_is_a_hard_error(tmp_path):
    goldens = _copy_goldens(tmp_path)
    os.remove(goldens / TOLERANCE_FILE)
    with pytest.raises(GoldenError) as e:
        golden_check(str(goldens))
    assert "Tolerance file not found" in str(e.value)


def test_missing_column_tolerance_is_an_error(tmp_path):
    goldens = _copy_goldens(tmp_path)
    path = goldens / TOLERANCE_FILE
    kept = [line for line in path.read_text(encoding='utf-8').splitlines() if 'delta_e' not in line]
    path.write_text('\n'.join(kept) + '\n', encoding='utf-8')
    with pytest.raises(GoldenError) as e:
        golden_check(str(goldens))
    assert 'No tolerance for column "delta_e"' in str(e.value)


def test_missing_golden_result_is_an_error(tmp_path):
    goldens = _copy_goldens(tmp_path)
    os.remove(goldens / 't0_rwa_sweep_temperature.csv')
    with pytest.raises(GoldenError) as e:
        golden_check(str(goldens))
    assert "Golden result missing" in str(e.value)


def test_malformed_tolerance_line(tmp_path):
    (tmp_path / TOLERANCE_FILE).write_text('* delta_e 1e-12\n', encoding='utf-8')
    with pytest.raises(GoldenError) as e:
        load_tolerances(str(tmp_path))
    assert ':1:' in str(e.value)


def test_update_goldens_regenerates_passing_tables(tmp_path):
    goldens = _copy_goldens(tmp_path)
    _set_key(goldens / 't0_full_sweep_temperature.cfg', 'gamma', '2.0')
    written = update_goldens(str(goldens))
    assert len(written) == len(golden_names(str(goldens)))
    assert all(o.passed for o in golden_check(str(goldens)))


def test_empty_golden_directory(tmp_path):
    with pytest.raises(GoldenError):
        golden_names(str(tmp_path))
