"""Command-line figure renderer for distdelay CSV bundles."""

from __future__ import annotations

import argparse
import sys

from . import figures


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distdelay-plot",
        description="Render comparison, error, or precursor figures from CSV bundles")
    parser.add_argument("--layout", required=True,
                        choices=sorted(figures.LAYOUTS),
                        help="figure layout to render")
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV path (repeatable)")
    parser.add_argument("--label", dest="labels", action="append",
                        metavar="TEXT", help="legend label per input (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        figures.render(args.layout, args.inputs, args.out, labels=args.labels)
    except (figures.ColumnError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
