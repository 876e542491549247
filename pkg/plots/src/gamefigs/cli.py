"""Command line for turning solver CSVs into figures."""

import argparse
import sys

from .render import render_curve, render_sweep


def build_parser():
    ap = argparse.ArgumentParser(prog="gamefigs",
                                 description="Render solver CSV output to figures")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("curve", help="value curve with payoff envelopes")
    sp.add_argument("csv_path")
    sp.add_argument("out_image")
    sp.set_defaults(kind=None)

    sp = sub.add_parser("sweep", help="threshold or boundary curves over sigma")
    sp.add_argument("csv_path")
    sp.add_argument("out_image")
    sp.add_argument("--kind", choices=["thresholds", "boundaries"], required=True)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.command == "curve":
            render_curve(ns.csv_path, ns.out_image)
        else:
            render_sweep(ns.csv_path, ns.out_image, ns.kind)
    except (ValueError, OSError) as exc:
        print(f"gamefigs: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
