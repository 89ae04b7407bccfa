"""
Regression goldens: `<name>.cfg` configs with pinned `<name>.csv` results and
one `tolerances.txt` for the whole directory.

tolerances.txt lines are `<golden name or *> <column> <rtol> <atol>`; a numeric
cell passes when |got - expected| <= atol + rtol * |expected|. Every numeric
column of every golden needs a tolerance line; text cells must match exactly.
"""
import glob
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from errors import GoldenError
from experiments import execute
from load_utils import load_config
from output_utils import format_number, parse_cell, read_csv_table, write_table

TOLERANCE_FILE = 'tolerances.txt'


@dataclass
class GoldenOutcome:
    name: str
    passed: bool
    divergence: Optional[str] = None  # first failing cell, human readable


def load_tolerances(directory: str) -> Dict[Tuple[str, str], Tuple[float, float]]:
    path = os.path.join(directory, TOLERANCE_FILE)
    if not os.path.isfile(path):
        raise GoldenError(f'Tolerance file not found: {path} (goldens never fall back to default tolerances)')
    tolerances: Dict[Tuple[str, str], Tuple[float, float]] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise GoldenError(f'{path}:{lineno}: expected "<golden> <column> <rtol> <atol>", got "{raw.strip()}"')
            try:
                rtol, atol = float(parts[2]), float(parts[3])
            except ValueError:
                raise GoldenError(f'{path}:{lineno}: tolerances must be numbers')
            if rtol < 0 or atol < 0:
                raise GoldenError(f'{path}:{lineno}: tolerances must be non-negative')
            tolerances[(parts[0], parts[1])] = (rtol, atol)
    return tolerances


def golden_names(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise GoldenError(f'Golden directory not found: {directory}')
    names = sorted(os.path.splitext(os.path.basename(p))[0] for p in glob.glob(os.path.join(directory, '*.cfg')))
    if not names:
        raise GoldenError(f'No golden configs (*.cfg) in {directory}')
    return names


def _tolerance(tolerances, name: str, column: str) -> Tuple[float, float]:
    for key in ((name, column), ('*', column)):
        if key in tolerances:
            return tolerances[key]
    raise GoldenError(f'No tolerance for column "{column}" of golden "{name}" in {TOLERANCE_FILE}')


def _cells_match(got: str, expected: str, tolerance: Tuple[float, float]) -> bool:
    g, e = parse_cell(got), parse_cell(expected)
    if g is None or e is None:
        return got == expected
    if math.isnan(e) or math.isinf(e):
        return got == expected
    rtol, atol = tolerance
    return abs(g - e) <= atol + rtol * abs(e)


def _rerun(directory: str, name: str):
    config = load_config(os.path.join(directory, f'{name}.cfg'), ['jobs=1', 'verbose=false', 'output='])
    return execute(config)


def check_golden(directory: str, name: str, tolerances) -> GoldenOutcome:
    expected_path = os.path.join(directory, f'{name}.csv')
    if not os.path.isfile(expected_path):
        raise GoldenError(f'Golden result missing for {name}: {expected_path}')
    expected = read_csv_table(expected_path)
    result = _rerun(directory, name)
    if result.columns != expected['columns']:
        return GoldenOutcome(name, False, f'columns {result.columns} != golden {expected["columns"]}')
    if len(result.rows) != len(expected['rows']):
        return GoldenOutcome(name, False, f'{len(result.rows)} rows != golden {len(expected["rows"])}')
    for i, (row, golden_row) in enumerate(zip(result.rows, expected['rows'])):
        for column, golden_cell in zip(result.columns, golden_row):
            got = format_number(row[column])
            if parse_cell(golden_cell) is not None:
                tolerance = _tolerance(tolerances, name, column)
            else:
                tolerance = (0.0, 0.0)
            if not _cells_match(got, golden_cell, tolerance):
                return GoldenOutcome(name, False, f'row {i + 1} column {column}: got {got}, golden {golden_cell}')
    return GoldenOutcome(name, True)


def golden_check(directory: str) -> List[GoldenOutcome]:
    """
    Rerun every golden config in `directory` and compare with its pinned table.

    Raises:
        GoldenError: missing tolerance file, missing golden result or tolerance entry
    """
    tolerances = load_tolerances(directory)
    return [check_golden(directory, name, tolerances) for name in golden_names(directory)]


def update_goldens(directory: str) -> List[str]:
    """Regenerate `<name>.csv` for every golden config; returns the files written."""
    written = []
    for name in golden_names(directory):
        result = _rerun(directory, name)
        path = os.path.join(directory, f'{name}.csv')
        write_table(path, result.columns, result.rows, 'csv', f'golden={name}')
        written.append(path)
    return written
