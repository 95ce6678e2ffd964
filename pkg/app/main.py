from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from app import __version__
from app.cli.parser import parse_config
from app.cli.runner import EXIT_CONFIG, ExperimentRunner
from app.config import settings
from app.store.results import ResultStore

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Run one absorbed-diffusion experiment declared in a key = value config file.",
    )
    parser.add_argument("config", help="experiment config file")
    parser.add_argument("--out", help="output directory (default: config output_dir, then SIMPLEX_QSD_OUTPUT_DIR)")
    parser.add_argument("--workers", type=int, help="worker threads for path ensembles")
    parser.add_argument("--seed", type=int, help="override the seed set in the config")
    parser.add_argument("--log-level", default=settings.log_level, help="logging level (default: %(default)s)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Compose config, store and runner; return the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    if args.workers is not None and args.workers < 1:
        logger.error("--workers must be >= 1, got %s", args.workers)
        return EXIT_CONFIG
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        logger.error("Cannot read config %s: %s", args.config, exc)
        return EXIT_CONFIG
    try:
        config = parse_config(text, overrides={"seed": args.seed})
        output_dir = args.out or config.output_dir or settings.output_dir
        runner = ExperimentRunner(config, ResultStore(output_dir), workers=args.workers)
    except ValueError as exc:
        logger.error("Invalid config %s: %s", args.config, exc)
        return EXIT_CONFIG
    return runner.run()


if __name__ == "__main__":
    sys.exit(main())
