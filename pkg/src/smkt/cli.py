"""``smkt <subcommand> --config <path> [--out <dir>] [--seed <u64>]``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import SmktError
from .pipeline import ANALYSES, RunConfig, run_pipeline


def build_parser():
    parser = argparse.ArgumentParser(prog="smkt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ANALYSES:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="master seed (overrides config 'seed')")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.command, args.out, args.seed)
        written = run_pipeline(cfg)
    except SmktError as exc:
        stage = getattr(exc, "stage", "config")
        msg = str(exc) if str(exc).startswith("[") else f"[{stage}] {exc}"
        print(f"smkt {args.command}: {msg}", file=sys.stderr)
        return 2
    for name in sorted(written):
        print(written[name])
    return 0


if __name__ == "__main__":
    sys.exit(main())
