"""figgen command line: JSON curve/band files in, panel image out."""

import argparse
import json
import sys

from .render import FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figgen",
        description="Render npdose curve/band JSON files as a panel figure",
    )
    parser.add_argument("inputs", nargs="+", help="curve or bootstrap JSON files, one panel each")
    parser.add_argument("--truth", default=None, choices=("single", "linear", "nonlinear"),
                        help="overlay the analytic truth of a benchmark model")
    parser.add_argument("--out", default="figure.png", help="output image path")
    parser.add_argument("--ncols", type=int, default=0, help="panels per row (default: all in one row)")
    parser.add_argument("--title", action="append", default=[], help="panel title (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=args.inputs, truth=args.truth, out=args.out,
                      ncols=args.ncols, titles=args.title)
    try:
        render(spec)
    except (SchemaError, ValueError, OSError, json.JSONDecodeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
