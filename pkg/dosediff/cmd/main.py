# License: BSD3

"""
The `dosediff` command line tool
"""

from __future__ import print_function
import argparse
import logging
import sys

from ..internalutil import DosediffError
from ..util import add_subcommand
from . import SUBCOMMAND_SECTIONS, SUBCOMMANDS

PROG = 'dosediff'

LOG_FORMAT = '%(levelname)s %(name)s: %(message)s'

_HANDLER = None


def _epilog():
    "subcommands by pipeline stage"
    lines = []
    for descr, section in SUBCOMMAND_SECTIONS:
        names = [getattr(module, 'NAME', module.__name__.split('.')[-1])
                 for module in section]
        lines.append('%s: %s' % (descr, ', '.join(names)))
    return '\n'.join(lines)


def mk_argparser():
    """
    The top level parser, with one subparser per subcommand
    """
    parser = argparse.ArgumentParser(
        prog=PROG,
        description='Dose prediction with a conditional diffusion model',
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', '-v', action='store_true',
                           help='debug output')
    verbosity.add_argument('--quiet', '-q', action='store_true',
                           help='warnings and errors only')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for module in SUBCOMMANDS:
        subparser = add_subcommand(subparsers, module)
        module.config_argparser(subparser)
    return parser


def configure_logging(args):
    """
    One stderr handler on the package logger; library code never
    configures handlers itself
    """
    global _HANDLER  # pylint: disable=global-statement
    logger = logging.getLogger('dosediff')
    if _HANDLER is not None:
        logger.removeHandler(_HANDLER)
    _HANDLER = logging.StreamHandler(sys.stderr)
    _HANDLER.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(_HANDLER)
    logger.propagate = False
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    elif args.quiet:
        logger.setLevel(logging.WARNING)
    else:
        logger.setLevel(logging.INFO)


def run_cli(argv=None):
    """
    Run a subcommand.

    Returns
    -------
    int
        0 on success, 1 if the command failed (with a one line
        diagnostic on stderr), 2 on usage errors
    """
    parser = mk_argparser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_:
        # argparse exits 2 on usage errors, 0 after --help
        return exit_.code
    configure_logging(args)
    try:
        args.func(args)
    except (DosediffError, EnvironmentError) as oops:
        print('%s %s: %s' % (PROG, args.command, oops), file=sys.stderr)
        return 1
    return 0


def main():
    "console script entry point"
    sys.exit(run_cli())
