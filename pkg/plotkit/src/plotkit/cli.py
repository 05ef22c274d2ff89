"""render-figure command-line entry point."""

import argparse
import sys

from .figures import KINDS, FigureSpec, RenderError, render


def build_parser():
    parser = argparse.ArgumentParser(
        prog="render-figure",
        description="Render simulator CSV outputs as figures")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--in", dest="csv_path", required=True,
                        help="input CSV (simulate or sweep output)")
    parser.add_argument("--peaks", default=None,
                        help="crest-curve sidecar CSV for the heatmap overlay")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--port", type=int, default=1, choices=(1, 2))
    parser.add_argument("--linear", action="store_true",
                        help="linear instead of logarithmic intensity scale")
    parser.add_argument("--no-overlay", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, csv_path=args.csv_path,
                      out_path=args.out, peaks_path=args.peaks,
                      port=args.port,
                      log_scale=False if args.linear else None,
                      overlay=not args.no_overlay)
    try:
        render(spec)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
