"""Command-line entry point."""
import argparse
import logging
import sys
from typing import List, Optional

from .__version__ import __version__
from .core.discovery import CommandDiscovery
from .core.registry import registry
from .exceptions import ConfigurationError, TransRPPGError
from .utils.logging import get_logger, set_log_level

logger = get_logger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def common_arguments() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", default=None, help="key = value configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="run seed (overrides the config)")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Parser with one subparser per registered command."""
    discovery = CommandDiscovery()
    discovery.discover_all()
    for error in discovery.get_discovery_errors():
        logger.warning(f"⚠️  Command module failed to load: {error}")

    parser = argparse.ArgumentParser(prog="transrppg", description="rPPG-based 3D mask presentation attack detection")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    common = common_arguments()
    for cmd in registry.get_commands():
        cmd.add_to(subparsers, parents=[common])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand; 0 on success, 2 on configuration errors, 1 on other failures."""
    args = build_parser().parse_args(argv)
    if args.log_level:
        if args.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            logger.error(f"❌ Unknown log level '{args.log_level}'")
            return 2
        set_log_level(args.log_level)
    logging.basicConfig(format=LOG_FORMAT)

    cmd = registry.get_command(args.command)
    try:
        return cmd.execute(args)
    except ConfigurationError as e:
        logger.error(f"❌ {e}")
        return 2
    except (TransRPPGError, OSError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
