"""Script CLI: ``weakflow-viz plot --spec PATH``.

The spec file is JSON: {"kind": "flowlines" | "weakfield-compare" | "packet",
"out": image path, input paths per kind, optional "xlim"/"zlim"}.
Relative paths resolve against the spec file's directory.
"""

import argparse
import json
import sys

from .io import SchemaError
from .plots import PlotSpec, plot


def main(argv=None):
    parser = argparse.ArgumentParser(prog="weakflow-viz")
    sub = parser.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("plot", help="render one figure from simulator outputs")
    sp.add_argument("--spec", required=True, help="path to the JSON plot spec")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec.from_file(args.spec)
        stats = plot(spec)
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary = " ".join(f"{k}={v}" for k, v in stats.items())
    print(f"{spec.kind}: {summary} -> {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
