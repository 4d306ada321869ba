"""Command-line entry point.

    tplexport export --checkpoint model.npz --arch arch.json --out DIR \
        [--prune-s 0.9] [--eps 0]

Exit codes: 0 success, 2 input error.
"""

import argparse
import sys

from .export import ExportError, export

EXIT_OK = 0
EXIT_INPUT = 2


def build_parser():
    p = argparse.ArgumentParser(
        prog="tplexport",
        description="Export a model checkpoint to a sparse-topology container",
    )
    sub = p.add_subparsers(dest="cmd", required=True)
    e = sub.add_parser("export", help="write manifest.json plus raw mask files")
    e.add_argument("--checkpoint", required=True, help=".npz or torch state-dict file")
    e.add_argument("--arch", required=True, help="architecture description JSON")
    e.add_argument("--out", required=True, help="output container directory")
    e.add_argument("--prune-s", dest="prune_s", type=float, default=None,
                   help="magnitude-prune this fraction per layer (omit for "
                        "already-sparse checkpoints)")
    e.add_argument("--eps", type=float, default=0.0,
                   help="zero-detection threshold for sparse checkpoints")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        manifest = export(args.checkpoint, args.arch, args.out,
                          s=args.prune_s, eps=args.eps)
    except ExportError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    print(f"wrote {manifest}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
