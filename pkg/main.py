import sys
import traceback

from errors import EXIT_CODES, CflError
from experiments import run
from golden_utils import golden_check, update_goldens
from load_utils import EXPERIMENTS, FORMATS, load_config
from output_utils import write_metadata
from print_utils import color_status, dump_run_summary

GOLDEN_COMMANDS = ('golden-check', 'update-goldens')
DEFAULT_GOLDEN_DIR = 'goldens'


def build_parser():
    import argparse
    parser = argparse.ArgumentParser(
        prog='cfl', description="Dissipation of a driven pair of coupled oscillators, computed along independent routes."
    )
    parser.add_argument('command', choices=list(EXPERIMENTS) + list(GOLDEN_COMMANDS),
                        help="Experiment to run, or a golden regression command.")
    parser.add_argument('--config', type=str, default=None, help="Path to a key = value config file.")
    parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                        help="Override one config key (repeatable; wins over the config file).")
    parser.add_argument('--out', type=str, default=None, help="Path of the result table.")
    parser.add_argument('--format', choices=FORMATS, default=None, help="Result table format.")
    parser.add_argument('--jobs', type=int, default=None, help="Worker processes for sweeps (default: all processors).")
    parser.add_argument('--verbose', action='store_true', help="Enable detailed progress output.")
    parser.add_argument('--goldens', type=str, default=DEFAULT_GOLDEN_DIR, help="Golden directory for golden commands.")
    return parser


def _flag_overrides(args):
    """Dedicated flags are shorthands for --set and apply after it."""
    overrides = list(args.overrides)
    if args.out is not None:
        overrides.append(f'output={args.out}')
    if args.format is not None:
        overrides.append(f'format={args.format}')
    if args.jobs is not None:
        overrides.append(f'jobs={args.jobs}')
    if args.verbose:
        overrides.append('verbose=true')
    return overrides


def _report_failure(category: str, message: str, output=None) -> None:
    print(f"error_category={category} message={' '.join(str(message).split())}", file=sys.stderr)
    if output:
        try:
            write_metadata(output, {'error_category': category, 'message': str(message)})
        except CflError:
            pass  # the sidecar itself is unwritable; the stderr line stands


def run_goldens(args) -> int:
    if args.command == 'update-goldens':
        for path in update_goldens(args.goldens):
            print(f"Wrote {path}")
        return 0
    outcomes = golden_check(args.goldens)
    for outcome in outcomes:
        status = 'PASS' if outcome.passed else 'FAIL'
        line = f"{color_status(status)} {outcome.name}"
        if outcome.divergence:
            line += f": {outcome.divergence}"
        print(line)
    failed = [o.name for o in outcomes if not o.passed]
    if failed:
        _report_failure('golden', f"{len(failed)} of {len(outcomes)} goldens failed: {', '.join(failed)}")
        return EXIT_CODES['golden']
    return 0


def main(argv=None) -> int:
    """
    Entry point of the `cfl` command. Returns the process exit status:
    0 success, 2 config, 3 convergence, 4 io, 5 golden, 1 anything else.
    """
    args = build_parser().parse_args(argv)
    output = args.out
    try:
        if args.command in GOLDEN_COMMANDS:
            return run_goldens(args)
        config = load_config(args.config, _flag_overrides(args), experiment=args.command)
        output = config.output
        result = run(config)
        dump_run_summary(config.experiment, result.meta, config.verbose)
        return 0
    except CflError as e:
        _report_failure(e.category, str(e), output)
        return EXIT_CODES[e.category]
    except Exception as e:
        if args.verbose:
            traceback.print_exc()
        _report_failure('internal', f"{type(e).__name__}: {e}", output)
        return EXIT_CODES['internal']


if __name__ == "__main__":
    sys.exit(main())
