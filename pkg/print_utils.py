"""
Utility functions for conditional printing and console report tables.
"""
from typing import Any, Dict, Iterable, Mapping, Sequence

STATUS_COLORS = {
    'PASS': '\033[92m',   # Green
    'OK': '\033[92m',
    'FAIL': '\033[91m',   # Red
    'WARN': '\033[93m',   # Yellow
    'INFO': '\033[94m',   # Blue
}
RESET = '\033[0m'


def create_print_if_verbose(verbose):
    """
    Creates a print function that only prints if verbose is True.

    Args:
        verbose (bool): Whether to enable printing

    Returns:
        function: A print function that respects the verbose flag

    Example:
        print_if_verbose = create_print_if_verbose(True)
        print_if_verbose("This will print")

        print_if_verbose = create_print_if_verbose(False)
        print_if_verbose("This will not print")
    """
    def print_if_verbose(*args, **kwargs):
        """Helper function to print only if verbose is True"""
        if verbose:
            print(*args, **kwargs)

    return print_if_verbose


def color_status(status: str, text: str = None) -> str:
    """Wrap `text` (default: the status itself) in the ANSI color of `status`."""
    color = STATUS_COLORS.get(status.upper(), RESET)
    return f'{color}{text if text is not None else status}{RESET}'


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f'{value:.10e}'
    return str(value)


def dump_route_table(rows: Iterable[Mapping[str, Any]], title: str, columns: Sequence[str] = None) -> None:
    """
    Print a markdown table of result rows.

    Args:
        rows: dicts sharing the same keys (e.g. route, delta_e, rel_gap)
        title: heading printed above the table
        columns: column order; defaults to the keys of the first row
    """
    rows = list(rows)
    print('')
    print(f'******** {title} ********')
    if not rows:
        print('No rows.')
        return
    columns = list(columns or rows[0].keys())
    print('| ' + ' | '.join(columns) + ' |')
    print('|' + '|'.join('---' for _ in columns) + '|')
    for row in rows:
        print('| ' + ' | '.join(_cell(row.get(c, '')) for c in columns) + ' |')
    print('*' * (len(title) + 18))


def dump_run_summary(experiment: str, meta: Dict[str, Any], verbose: bool = False) -> None:
    """Headline of a finished experiment; the full metadata only when verbose."""
    print_if_verbose = create_print_if_verbose(verbose)
    print(f"{color_status('OK', experiment)}: {meta.get('rows', 0)} rows in {meta.get('wall_time', 0.0):.2f} s")
    for key in sorted(meta):
        print_if_verbose(f'  {key}: {meta[key]}')
