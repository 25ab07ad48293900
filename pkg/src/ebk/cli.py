"""Command line front door.

    ebk run --config cfg.json [--output-dir D] [--threads T] [--verbose]
    ebk validate --config cfg.json

Exit codes: 0 ok, 2 config error, 3 hypothesis violation (regularity or
topology), 4 verification failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError
from .pipeline import run as run_pipeline


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ebk",
        description="Quantization spectra of 1D Hamiltonian symbols, with a direct oracle",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a configured pipeline")
    p_run.add_argument("--config", required=True, help="path to the JSON run config")
    p_run.add_argument("--output-dir", default=None, help="override config output_dir")
    p_run.add_argument("--threads", type=int, default=1, help="worker threads")
    p_run.add_argument("--verbose", action="store_true", help="print stage progress")

    p_val = sub.add_parser("validate", help="check a config file and exit")
    p_val.add_argument("--config", required=True, help="path to the JSON run config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"config ok: symbol={config.symbol_name} stages={','.join(config.pipeline)}")
        return 0

    manifest, code = run_pipeline(
        config,
        output_dir=args.output_dir,
        threads=args.threads,
        verbose=args.verbose,
    )
    bad = [s for s, st in manifest["stages"].items() if st["status"] != "ok"]
    if code != 0:
        print(f"run failed (exit {code}); problem stages: {', '.join(bad)}", file=sys.stderr)
    elif args.verbose:
        print("run ok")
    return code


if __name__ == "__main__":
    sys.exit(main())
