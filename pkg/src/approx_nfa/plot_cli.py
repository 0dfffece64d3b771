"""Command line interface for sweep plots."""

import argparse
import os
import sys

from . import __version__
from .constants import METHODS

PLOTS = ('all', 'accuracy', 'probability', 'tradeoff')


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='approx-nfa-plot',
        description="Draw accuracy / probability / cost trade-off plots of approx-nfa sweeps",
        epilog="Sweep CSVs come from 'approx-nfa pareto --sweep-csv' or 'approx-nfa pipeline'."
    )
    parser.add_argument('sweeps', nargs='+', metavar='SWEEP_CSV',
                        help="Sweep CSV file(s); several files are overlaid, one series per file")
    parser.add_argument('--plot', choices=PLOTS, default='all',
                        help="Which plot to draw (default: all)")
    parser.add_argument('--methods',
                        help=f"Comma-separated methods to keep ({', '.join(METHODS)}); "
                             "the precise row is always kept")
    parser.add_argument('--front-csv', help="Also write the non-dominated (cost, prob) rows here")
    parser.add_argument('-o', '--output-dir', default='.',
                        help="Directory for the HTML files (default: current directory)")
    parser.add_argument('--version', action='version', version=f'approx-nfa-plot {__version__}')
    return parser


def _keep_methods(plotter, methods: str) -> None:
    wanted = {m.strip() for m in methods.split(',') if m.strip()}
    unknown = wanted - set(METHODS)
    if unknown:
        raise ValueError(f"unknown method(s): {', '.join(sorted(unknown))}")
    data = plotter.data
    plotter.data = data[data['method'].isin(wanted | {'precise'})]


def main(argv=None) -> int:
    try:
        args = create_parser().parse_args(argv)

        try:
            from . import _get_plotter_class
            SweepPlotter = _get_plotter_class()
        except ImportError:
            print("Error: plotly and pandas are required for plotting.", file=sys.stderr)
            print("Install with: pip install -e \".[plotting]\"", file=sys.stderr)
            return 1

        if len(args.sweeps) > 1:
            print(f"Overlaying {len(args.sweeps)} sweeps...")
        plotter = SweepPlotter.from_multiple_files(args.sweeps)
        if args.methods:
            _keep_methods(plotter, args.methods)

        if args.front_csv:
            plotter.front().to_csv(args.front_csv, index=False)
            print(f"Front: {args.front_csv}")

        if args.plot == 'all':
            plotter.generate_all_plots(args.output_dir)
            return 0
        draw = getattr(plotter, f'plot_{args.plot}')
        os.makedirs(args.output_dir, exist_ok=True)
        stem = os.path.splitext(os.path.basename(plotter.input_file))[0]
        output_file = os.path.join(args.output_dir, f"{stem}_{args.plot}.html")
        draw().write_html(output_file)
        print(f"Generated: {output_file}")
        return 0

    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 0
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 130
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 3
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
