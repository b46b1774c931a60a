"""Command line: plotviz render --spec plot.toml"""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotviz")
    sub = parser.add_subparsers(dest="command", required=True)
    render_parser = sub.add_parser("render", help="render a figure from CSVs")
    render_parser.add_argument("--spec", required=True, help="plot spec TOML")
    args = parser.parse_args(argv)
    try:
        render(args.spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
