import argparse
import logging
from typing import List, Optional

from config import config

logger = logging.getLogger(__name__)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hdgame',
        description='Equilibria of the heterogeneous data game under proximity and logit choice',
    )
    parser.add_argument('--threads', type=int, default=None,
                        help='worker cap (falls back to HDGAME_THREADS, then the config file)')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True

    # Register commands
    from app.api import register_commands
    register_commands(subparsers)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, dispatch to the command handler and return the exit status."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0)

    args.threads = config.threads(args.threads)
    logger.info(f"Running {args.command} in environment {config.get('environment', 'local')}")
    return args.handler(args)
