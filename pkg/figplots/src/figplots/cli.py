"""Command line: plot --kind K --in DIR --out FILE."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import FigplotsError
from .render import KINDS, PlotSpec, render


def build_parser():
    p = argparse.ArgumentParser(
        prog="hflow-plot",
        description="render figures from an hflow sweep output directory")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--in", dest="in_dir", required=True,
                   help="sweep output directory (manifest.json + traj_*.csv)")
    p.add_argument("--out", dest="out_path", required=True,
                   help="image path (.png or .svg)")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--dpi", type=int, default=150)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(in_dir=args.in_dir, kind=args.kind, out_path=args.out_path,
                    stride=args.stride, dpi=args.dpi)
    try:
        path = render(spec)
    except (FigplotsError, ValueError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}),
              file=sys.stderr)
        return 2
    print(json.dumps({"out": path, "kind": spec.kind}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
