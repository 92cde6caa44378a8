"""Command line entry point: ``python -m arrayheal <stage> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .pipeline import STAGES, StageError, Layout, run_pipeline


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arrayheal",
        description="Simulate a magnetic sensor array, detect drifted units and heal the current estimate.")
    parser.add_argument("command", choices=STAGES + ("all",),
                        help="stage to run; 'all' runs every stage in order")
    parser.add_argument("--config", type=Path,
                        help="INI config (default: <out>/config.ini if present, else the paper-twin preset)")
    parser.add_argument("--seed", type=int, help="override the scenario seed")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
    parser.add_argument("--alpha", type=float, help="confidence level of the Q control limit")
    parser.add_argument("--kappa", type=float, help="variance threshold for the principal subspace")
    parser.add_argument("--paper-mode", action="store_true",
                        help="squared-eigenvalue variance rule and the h0 expression as originally printed")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    config = args.config
    if config is None and args.command != "simulate" and Layout(args.out).config.exists():
        # later stages reuse the config written by `simulate`
        config = Layout(args.out).config
    try:
        cfg = load_config(config, seed=args.seed, alpha=args.alpha, kappa=args.kappa,
                          paper_mode=args.paper_mode, out_dir=args.out)
    except ConfigError as exc:
        print(f"arrayheal: config error: {exc}", file=sys.stderr)
        return 2
    stages = STAGES if args.command == "all" else (args.command,)
    try:
        run_pipeline(cfg, stages)
    except StageError as exc:
        print(f"arrayheal: {exc}", file=sys.stderr)
        return 1
    if "report" in stages:
        print((Layout(cfg.out_dir).report_dir / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
