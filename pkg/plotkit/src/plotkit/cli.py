"""Command line front end: ``plotkit <kind> --in PATH... --out PATH``.

Exit codes: 0 on success, 2 for any input problem (missing or malformed
file, unsupported schema version, wrong file kind or argument shape).
"""

import argparse
import sys

from .figures import KINDS, PlotSpec, render
from .io import PlotDataError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render figures from streaming-filter output files.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in",
        dest="inputs",
        nargs="+",
        required=True,
        metavar="PATH",
        help="input file(s), in the order the kind expects",
    )
    parser.add_argument("--out", required=True, metavar="PATH", help="output image path")
    parser.add_argument("--title", default=None, help="figure title override")
    parser.add_argument("--dpi", type=int, default=150, help="raster resolution")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            kind=args.kind, inputs=tuple(args.inputs), out=args.out,
            title=args.title, dpi=args.dpi,
        )
        path = render(spec)
    except (PlotDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
