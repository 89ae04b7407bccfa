from __future__ import annotations

import math
from types import ModuleType
from typing import Dict, List, Optional, Sequence, Tuple

from output_utils import parse_cell, read_csv_table


def _numeric_column(table: Dict, column: str) -> List[float]:
    if column not in table['columns']:
        raise ValueError(f"Column '{column}' not in table. Available: {table['columns']}")
    idx = table['columns'].index(column)
    values = []
    for row in table['rows']:
        value = parse_cell(row[idx])
        if value is None:
            raise ValueError(f"Column '{column}' has a non-numeric cell '{row[idx]}'")
        values.append(value)
    return values


def _series(
    table: Dict, x_column: str, y_column: str, group_by: Optional[str]
) -> Dict[Optional[float], Tuple[List[float], List[float]]]:
    xs = _numeric_column(table, x_column)
    ys = _numeric_column(table, y_column)
    groups = _numeric_column(table, group_by) if group_by else [None] * len(xs)
    series: Dict[Optional[float], Tuple[List[float], List[float]]] = {}
    for g, x, y in zip(groups, xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            continue
        bucket = series.setdefault(g, ([], []))
        bucket[0].append(x)
        bucket[1].append(y)
    return series


def plot_sweep(
    csv_path: str,
    x_column: str,
    y_columns: Sequence[str],
    group_by: Optional[str] = None,
    log_y: bool = False,
    output_path: Optional[str] = None,
) -> ModuleType:
    """Plot result columns of a sweep table written by `cfl`.

    Args:
        csv_path: CSV result table (provenance line is skipped).
        x_column: Column on the horizontal axis, e.g. 'detuning' or 'eta'.
        y_columns: One line per column, e.g. ['delta_e_spectral', 'delta_e_closed_form'].
        group_by: Optional column splitting rows into separate lines (e.g. 'beta').
        log_y: Logarithmic vertical axis; non-positive values are dropped by matplotlib.
        output_path: When given, the figure is saved there.

    Returns:
        matplotlib.pyplot (plt) with the plot configured; call plt.show() to display.
    """
    if not y_columns:
        raise ValueError("y_columns must name at least one column")
    table = read_csv_table(csv_path)

    # Ensure a non-interactive backend under pytest/headless to avoid Tk errors.
    import os
    import matplotlib
    if os.environ.get("PYTEST_CURRENT_TEST"):
        try:
            matplotlib.use("Agg", force=True)
        except Exception:
            pass
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    for y_column in y_columns:
        for group, (xs, ys) in _series(table, x_column, y_column, group_by).items():
            label = y_column if group is None else f'{y_column} ({group_by}={group:g})'
            ax.plot(xs, ys, marker='.', linewidth=0.8, label=label)

    ax.set_xlabel(x_column)
    ax.set_ylabel(y_columns[0] if len(y_columns) == 1 else 'value')
    if log_y:
        ax.set_yscale('log')
    ax.set_title(os.path.basename(csv_path))
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    if output_path:
        fig.savefig(output_path)
    return plt
