"""figgen command line: render one figure from CSV inputs."""

import argparse
import sys

from .render import KINDS, FigureSpec, RenderError, render


def build_parser():
    ap = argparse.ArgumentParser(
        prog="figgen", description="Render diagnostic CSV bundles to figures"
    )
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True,
                    help="input CSV file(s)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--ref", nargs="*", type=float, default=[],
                    help="reference values for horizontal lines / rug marks")
    ap.add_argument("--logy", action="store_true")
    ap.add_argument("--caption", default="")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=args.inputs,
        output=args.out,
        refs=args.ref,
        logy=args.logy,
        caption=args.caption,
    )
    try:
        render(spec)
    except (RenderError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
