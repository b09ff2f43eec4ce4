"""Command line: plot <kind> --run <dir> [--run <dir> ...] [--out <file>].

Exit codes: 0 on success, 2 when an input fails schema validation, 1 for
anything else (unknown kind, unreadable files).
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .schemas import SchemaError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plot", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--run", action="append", required=True,
                        help="run or sweep directory (repeatable where it makes sense)")
    parser.add_argument("--out", default=None, help="output SVG path")
    parser.add_argument("--bins", type=int, default=None)
    args = parser.parse_args(argv)
    style = {}
    if args.bins:
        style["bins"] = args.bins
    try:
        spec = FigureSpec(kind=args.kind, runs=args.run, out=args.out, style=style)
        out = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
