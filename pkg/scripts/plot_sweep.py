"""
Example post-processing: plot columns of a `cfl` sweep table.

    python scripts/plot_sweep.py outputs/sweep-detuning.csv detuning delta_e_spectral delta_e_closed_form --group-by beta
"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from visualization_utils import plot_sweep  # noqa: E402


def main():
    import argparse
    parser = argparse.ArgumentParser(description="Plot columns of a cfl sweep CSV.")
    parser.add_argument('csv', help="Result table written by cfl.")
    parser.add_argument('x', help="Column on the horizontal axis.")
    parser.add_argument('y', nargs='+', help="Columns to plot.")
    parser.add_argument('--group-by', default=None, help="Column splitting rows into separate lines.")
    parser.add_argument('--log-y', action='store_true', help="Logarithmic vertical axis.")
    parser.add_argument('--save', default=None, help="Save the figure instead of showing it.")
    args = parser.parse_args()

    plt = plot_sweep(args.csv, args.x, args.y, args.group_by, args.log_y, args.save)
    if not args.save:
        plt.show()


if __name__ == "__main__":
    main()
