"""
Deterministic result writers.

Numbers are written in fixed 17-significant-digit scientific notation so
identical runs produce byte-identical files on every platform.
"""
import csv
import io
import json
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

from errors import OutputError

TOOL_NAME = 'cfl'
TOOL_VERSION = '0.1.0'


def format_number(value: Any) -> str:
    """Fixed text form of a table cell."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f'{value + 0.0:.16e}'  # + 0.0 folds -0.0 into 0.0
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return format_number(value)
    if isinstance(value, dict):
        return {str(k): _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    if hasattr(value, 'item') and callable(value.item):  # numpy scalars
        return _json_value(value.item())
    return value


def sidecar_path(path: str) -> str:
    return f'{path}.meta.json'


def _ensure_parent(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(parent, exist_ok=True)
    except OSError as e:
        raise OutputError(f'Cannot create output directory {parent}: {e}')


def render_csv(columns: Sequence[str], rows: Sequence[Mapping[str, Any]], provenance: str) -> str:
    """'#' provenance line, header row, one line per row, '\\n' line endings."""
    lines: List[List[str]] = [list(columns)]
    for row in rows:
        missing = [c for c in columns if c not in row]
        if missing:
            raise ValueError(f'Row is missing columns {missing}')
        lines.append([format_number(row[c]) for c in columns])

    buffer = io.StringIO()
    buffer.write(f'# {TOOL_NAME} {TOOL_VERSION} {provenance}\n')
    writer = csv.writer(buffer, lineterminator='\n', quoting=csv.QUOTE_MINIMAL)
    writer.writerows(lines)
    return buffer.getvalue()


def render_json(columns: Sequence[str], rows: Sequence[Mapping[str, Any]], provenance: str) -> str:
    payload = {
        'tool': f'{TOOL_NAME} {TOOL_VERSION}',
        'provenance': provenance,
        'columns': list(columns),
        'rows': [{c: _json_value(row[c]) for c in columns} for row in rows],
    }
    return json.dumps(payload, indent=2) + '\n'


def write_table(
    path: str, columns: Sequence[str], rows: Sequence[Mapping[str, Any]], fmt: str = 'csv', provenance: str = ''
) -> None:
    """
    Write a result table.

    Raises:
        ValueError: unknown format or rows missing a column
        OutputError: the file cannot be written
    """
    if fmt == 'csv':
        text = render_csv(columns, rows, provenance)
    elif fmt == 'json':
        text = render_json(columns, rows, provenance)
    else:
        raise ValueError(f"Invalid format '{fmt}'. Must be one of ['csv', 'json']")
    _ensure_parent(path)
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
    except OSError as e:
        raise OutputError(f'Cannot write {path}: {e}')


def write_metadata(path: str, meta: Dict[str, Any]) -> str:
    """Write `<path>.meta.json` and return its path."""
    target = sidecar_path(path)
    _ensure_parent(target)
    try:
        with open(target, 'w', encoding='utf-8', newline='') as f:
            json.dump(_json_value(meta), f, indent=2, sort_keys=True)
            f.write('\n')
    except OSError as e:
        raise OutputError(f'Cannot write {target}: {e}')
    return target


def read_csv_table(path: str) -> Dict[str, Any]:
    """
    Parse a table written by `write_table` (comment lines skipped).

    Returns:
        {'columns': [...], 'rows': [[cell text, ...], ...]}
    """
    if not os.path.isfile(path):
        raise OutputError(f'Result file not found: {path}')
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    records = list(csv.reader(lines))
    if not records:
        raise OutputError(f'{path} has no header row')
    return {'columns': records[0], 'rows': records[1:]}


def parse_cell(text: str) -> Optional[float]:
    """Float value of a numeric cell, None for text cells."""
    try:
        return float(text)
    except ValueError:
        return None
