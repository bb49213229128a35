#!/usr/bin/env python3
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .config import ConfigError
from .estimation.base import NumericalError
from .records.base import DataError
from .workspace import WorkspaceError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_INTERRUPTED = 130


# Configure logging
def setup_logging(verbose: bool = False, log_file: Optional[Path] = None):
    """Setup logging configuration"""
    log_level = logging.DEBUG if verbose else logging.INFO
    log_format = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=log_level,
        format=log_format,
        handlers=handlers,
        force=True,
    )


class Color:
    """ANSI color codes for terminal output"""
    RED = '\033[91m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    MAGENTA = '\033[95m'
    CYAN = '\033[96m'
    WHITE = '\033[97m'
    BOLD = '\033[1m'
    END = '\033[0m'


def colorize(text: str, color: str) -> str:
    """Colorize text for terminal output"""
    if not sys.stdout.isatty():
        return text  # No colors if not in terminal
    return f"{color}{text}{Color.END}"


class CLIError(Exception):
    """Custom exception for CLI errors"""
    pass


def print_banner():
    banner = f"""
{colorize('=' * 44, Color.CYAN)}
  {colorize('rdicausal', Color.BOLD + Color.MAGENTA)} - dose intensity causal pipeline
{colorize('=' * 44, Color.CYAN)}
"""
    print(banner)


def print_usage_examples():
    """Print usage examples"""
    examples = f"""
{colorize('Usage Examples:', Color.BOLD + Color.YELLOW)}

{colorize('Full run:', Color.CYAN)}
  {colorize('rdicausal all --seed 1 --out out', Color.GREEN)}             {colorize('# Simulate and analyse', Color.WHITE)}
  {colorize('rdicausal all --config study.json', Color.GREEN)}            {colorize('# Analyse configured data', Color.WHITE)}

{colorize('Stage by stage:', Color.CYAN)}
  {colorize('rdicausal simulate --seed 1', Color.GREEN)}                  {colorize('# Synthetic dataset + truth', Color.WHITE)}
  {colorize('rdicausal derive', Color.GREEN)}                             {colorize('# Cohort and covariates', Color.WHITE)}
  {colorize('rdicausal weights --spec IPTW4', Color.GREEN)}               {colorize('# Weights and diagnostics', Color.WHITE)}
  {colorize('rdicausal fit --tie efron', Color.GREEN)}                    {colorize('# Cox models', Color.WHITE)}
  {colorize('rdicausal effects --bootstrap-B 200', Color.GREEN)}          {colorize('# CATE with bootstrap bounds', Color.WHITE)}

{colorize('Advanced Usage:', Color.CYAN)}
  {colorize('rdicausal --verbose fit', Color.GREEN)}                      {colorize('# Debug logging', Color.WHITE)}
  {colorize('rdicausal --log-file run.log all', Color.GREEN)}             {colorize('# Log to file', Color.WHITE)}
"""
    print(examples)


def handle_keyboard_interrupt() -> int:
    """Handle Ctrl+C gracefully"""
    print(f"\n{colorize('Operation cancelled by user', Color.YELLOW)}")
    return EXIT_INTERRUPTED


def check_python_version():
    """Check Python version compatibility"""
    if sys.version_info < (3, 8):
        print(f"{colorize('Error: rdicausal requires Python 3.8 or higher', Color.RED)}")
        sys.exit(EXIT_VALIDATION)


def build_parser() -> argparse.ArgumentParser:
    """Main parser with global options and one subparser per registered command"""
    parser = argparse.ArgumentParser(
        prog="rdicausal",
        description="Causal effect of chemotherapy dose intensity on event-free survival",
        epilog="Run 'rdicausal <command> --help' for command-specific help.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        add_help=False
    )

    global_group = parser.add_argument_group('global options')
    global_group.add_argument('-h', '--help', action='store_true', help='Show this help message and exit')
    global_group.add_argument('-v', '--verbose', action='store_true', help='Enable verbose output')
    global_group.add_argument('--version', action='store_true', help='Show version information')
    global_group.add_argument('--log-file', type=Path, help='Write logs to specified file')
    global_group.add_argument('--no-color', action='store_true', help='Disable colored output')

    try:
        from .commands import get_registry
        registry = get_registry()
    except ImportError as e:
        raise CLIError(f"Failed to load commands: {e}")

    subparsers = parser.add_subparsers(
        dest="command",
        title="available commands",
        description="Run 'rdicausal <command> --help' for command-specific help",
        metavar="<command>"
    )
    for name in registry.list_commands():
        metadata = registry.get_command(name)
        cmd_parser = subparsers.add_parser(
            name,
            help=metadata.description,
            aliases=metadata.aliases,
            description=metadata.description
        )
        metadata.parser_setup(cmd_parser)
        cmd_parser.set_defaults(func=metadata.function)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code"""
    check_python_version()
    argv = sys.argv[1:] if argv is None else list(argv)

    try:
        parser = build_parser()
    except CLIError as e:
        print(f"{colorize(f'Error: {e}', Color.RED)}")
        return EXIT_VALIDATION

    if not argv:
        print_banner()
        print_usage_examples()
        parser.print_help()
        return EXIT_OK

    args = parser.parse_args(argv)

    if args.help and not hasattr(args, 'func'):
        print_banner()
        parser.print_help()
        return EXIT_OK

    if args.version:
        from . import __version__
        print(f"rdicausal version {__version__}")
        return EXIT_OK

    if args.no_color:
        # print_* helpers look colorize up at call time
        sys.modules[__name__].colorize = lambda text, color: text

    setup_logging(args.verbose, args.log_file)
    logger = logging.getLogger('rdicausal')

    if not hasattr(args, 'func'):
        parser.print_help()
        return EXIT_VALIDATION

    try:
        logger.debug(f"Executing command: {args.command}")
        logger.debug(f"Command arguments: {args}")
        success = args.func(args)
        if success:
            logger.debug("Command completed successfully")
            return EXIT_OK
        logger.error("Command failed")
        return EXIT_VALIDATION

    except KeyboardInterrupt:
        return handle_keyboard_interrupt()
    except (DataError, ConfigError, WorkspaceError, CLIError) as e:
        print_error(f"{type(e).__name__}: {e}")
        logger.error(f"Validation error: {e}")
        return EXIT_VALIDATION
    except NumericalError as e:
        print_error(f"{type(e).__name__}: {e}")
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        print(f"{colorize(f'Unexpected error: {e}', Color.RED)}")
        if args.verbose:
            import traceback
            traceback.print_exc()
        logger.exception("Unexpected error occurred")
        return EXIT_VALIDATION


def print_success(message: str):
    """Print success message"""
    print(f"{colorize('✓', Color.GREEN)} {message}")


def print_error(message: str):
    """Print error message"""
    print(f"{colorize('✗', Color.RED)} {message}")


def print_warning(message: str):
    """Print warning message"""
    print(f"{colorize('⚠', Color.YELLOW)} {message}")


def print_info(message: str):
    """Print info message"""
    print(f"{colorize('ℹ', Color.CYAN)} {message}")


if __name__ == "__main__":
    sys.exit(main())
