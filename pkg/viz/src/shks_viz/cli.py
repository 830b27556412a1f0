"""shks-viz: render figures from simulator CSV/manifest outputs.

Usage: shks-viz --kind trajectory --input run/trajectory.csv --out fig.png
Exit codes: 0 success, 2 invalid inputs or schema violation.
"""

from __future__ import annotations

import argparse
import sys

from .plots import PLOT_KINDS, PlotJob, render
from .schemas import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shks-viz", description=__doc__)
    parser.add_argument(
        "--input",
        dest="inputs",
        action="append",
        required=True,
        help="input CSV (repeatable for overlays)",
    )
    parser.add_argument("--out", required=True, help="output image path (.png or .svg)")
    parser.add_argument("--kind", required=True, choices=PLOT_KINDS)
    parser.add_argument("--log-x", action="store_true", help="logarithmic x axis")
    parser.add_argument("--log-y", action="store_true", help="logarithmic y axis")
    parser.add_argument(
        "--no-ci-band", action="store_true", help="suppress the CI band fill"
    )
    return parser


def dispatch(argv: list[str]) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    job = PlotJob(
        inputs=args.inputs,
        kind=args.kind,
        out=args.out,
        log_x=args.log_x,
        log_y=args.log_y,
        ci_band=not args.no_ci_band,
    )
    try:
        result = render(job)
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    print(result.out)
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
