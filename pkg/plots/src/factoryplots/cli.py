"""Command line entry point: render one figure family from artifact paths."""

from __future__ import annotations

import argparse
import sys

from .figures import FAMILIES, render
from .io import ArtifactError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="factoryplots",
        description="render figures from simulator artifacts")
    parser.add_argument("--family", required=True, choices=FAMILIES)
    parser.add_argument("--out", required=True,
                        help="output image path (.png or .svg)")
    parser.add_argument("inputs", nargs="+",
                        help="run directories (curves, usage-cdf, "
                             "latency-dist) or one CSV file (overhead, "
                             "latency-bars)")
    args = parser.parse_args(argv)
    try:
        render(args.family, args.inputs, args.out)
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
