import json
import math

import pytest

from errors import OutputError
from output_utils import (
    TOOL_VERSION,
    format_number,
    parse_cell,
    read_csv_table,
    render_csv,
    sidecar_path,
    write_metadata,
    write_table,
)

COLUMNS = ['route', 'delta_e', 'n_max']
ROWS = [
    {'route': 'spectral', 'delta_e': 0.25, 'n_max': 8},
    {'route': 'kubo_freq', 'delta_e': -0.0, 'n_max': 8},
]


def test_format_number_is_fixed_width_scientific():
    assert format_number(0.1) == '1.0000000000000001e-01'
    assert format_number(-0.0) == '0.0000000000000000e+00'
    assert format_number(3) == '3'
    assert format_number(math.inf) == 'inf'
    assert format_number(-math.inf) == '-inf'
    assert format_number(math.nan) == 'nan'
    assert format_number(True) == 'true'
    assert format_number('rwa') == 'rwa'


def test_render_csv_layout():
    text = render_csv(COLUMNS, ROWS, 'experiment=compare')
    lines = text.split('\n')
    assert lines[0] == f'# cfl {TOOL_VERSION} experiment=compare'
    assert lines[1] == 'route,delta_e,n_max'
    assert lines[2] == 'spectral,2.5000000000000000e-01,8'
    assert lines[3] == 'kubo_freq,0.0000000000000000e+00,8'
    assert text.endswith('\n')
    assert '\r' not in text


def test_render_csv_requires_every_column():
    with pytest.raises(ValueError) as e:
        render_csv(['route', 'missing'], ROWS, '')
    assert "missing columns" in str(e.value)


def test_write_table_is_byte_identical(tmp_path):
    first, second = tmp_path / 'a.csv', tmp_path / 'b.csv'
    write_table(str(first), COLUMNS, ROWS, 'csv', 'x')
    write_table(str(second), COLUMNS, ROWS, 'csv', 'x')
    assert first.read_bytes() == second.read_bytes()


def test_csv_round_trip_through_reader(tmp_path):
    path = tmp_path / 'nested' / 'out.csv'
    write_table(str(path), COLUMNS, ROWS, 'csv', 'x')
    table = read_csv_table(str(path))
    assert table['columns'] == COLUMNS
    assert parse_cell(table['rows'][0][1]) == 0.25
    assert parse_cell(table['rows'][0][0]) is None


def test_json_table(tmp_path):
    path = tmp_path / 'out.json'
    write_table(str(path), COLUMNS, [{'route': 'spectral', 'delta_e': math.inf, 'n_max': 2}], 'json', 'x')
    payload = json.loads(path.read_text(encoding='utf-8'))
    assert payload['columns'] == COLUMNS
    assert payload['rows'][0]['delta_e'] == 'inf'


def test_unknown_format_raises(tmp_path):
    with pytest.raises(ValueError) as e:
        write_table(str(tmp_path / 'out.txt'), COLUMNS, ROWS, 'xml')
    assert "Invalid format 'xml'" in str(e.value)


def test_metadata_sidecar(tmp_path):
    path = str(tmp_path / 'out.csv')
    target = write_metadata(path, {'wall_time': 0.5, 'beta': math.inf, 'nested': {'n_max': 3}})
    assert target == sidecar_path(path) == path + '.meta.json'
    payload = json.loads(open(target, encoding='utf-8').read())
    assert payload == {'beta': 'inf', 'nested': {'n_max': 3}, 'wall_time': 0.5}


def test_unwritable_path_is_an_io_error(tmp_path):
    blocker = tmp_path / 'file'
    blocker.write_text('x', encoding='utf-8')
    with pytest.raises(OutputError) as e:
        write_table(str(blocker / 'out.csv'), COLUMNS, ROWS)
    assert e.value.category == 'io'


def test_missing_result_file_raises(tmp_path):
    with pytest.raises(OutputError):
        read_csv_table(str(tmp_path / 'absent.csv'))
