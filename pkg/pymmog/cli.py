"""Command line for the scenario runner, the auth demo and the login tier.

This software is licensed under a BSD 3-Clause License.
See the LICENSE file provided with this software.

    pymmog run --config mp32 [--seed N] [--out PATH] [--realtime] [--timing]
               [--loss P] [--latency-mean MS] [--latency-jitter MS]
               [--players N] [--duration S]
    pymmog auth-demo [--accounts PATH] [--cards PATH] [--trials N]
    pymmog serve [--port N] [--accounts PATH] [--cards PATH] [--today DATE]

Reports go to stdout (or --out); logging goes to stderr.  Exit status is
0 on success, 2 for a configuration or fixture error and 3 when an
assertion of the run failed.

Exported Functions:
main -- Parse arguments, run a subcommand and return the exit status.
"""

__all__ = ['main', 'EXIT_OK', 'EXIT_CONFIG', 'EXIT_ASSERTION']

import argparse
import datetime
import io
import logging
import sys

try:
    from typing import Any, List, Optional  # pylint: disable=unused-import
except ImportError:
    pass

from . import __version__, protocol
from .accounts import FixedClock
from .authdemo import report_json, run_auth_demo
from .exception import Error
from .scenario import load_config, preset_names, run_scenario
from .webapp import LoginServices, create_app

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSERTION = 3

# Flag name -> ScenarioConfig (or network) field
_OVERRIDES = (('seed', 'seed'),
              ('loss', 'drop_probability'),
              ('latency_mean', 'latency_mean'),
              ('latency_jitter', 'latency_jitter'),
              ('players', 'players'),
              ('duration', 'duration_s'))


def _emit(text, path):
    # type: (str, Optional[str]) -> None
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with io.open(path, 'w', encoding='utf-8') as f:
        f.write(text)


def _run(args):
    # type: (argparse.Namespace) -> int
    config = load_config(args.config)
    changes = dict((field, getattr(args, flag)) for flag, field in _OVERRIDES
                   if getattr(args, flag) is not None)
    if args.realtime:
        changes['realtime'] = True
    if changes:
        config = config.with_changes(**changes)
    report = run_scenario(config)
    _emit(report.to_json(timing=args.timing), args.out)
    if not report.passed:
        logger.error("assertions failed: %s", ', '.join(report.failed))
        return EXIT_ASSERTION
    return EXIT_OK


def _auth_demo(args):
    # type: (argparse.Namespace) -> int
    report = run_auth_demo(args.accounts, args.cards, trials=args.trials)
    _emit(report_json(report), args.out)
    return EXIT_OK if report['passed'] else EXIT_ASSERTION


def _serve(args):
    # type: (argparse.Namespace) -> int
    clock = FixedClock(args.today) if args.today is not None else None
    services = LoginServices.from_fixtures(args.accounts, args.cards, clock)
    app = create_app(services)
    logger.info("serving the login tier on %s:%d", args.host, args.port)
    app.run(host=args.host, port=args.port, threaded=True)
    return EXIT_OK


def _date(text):
    # type: (str) -> datetime.datetime
    try:
        return datetime.datetime.strptime(text, '%Y-%m-%d')
    except ValueError:
        raise argparse.ArgumentTypeError("expected YYYY-MM-DD, not %r" % (text))


def _parser():
    # type: () -> argparse.ArgumentParser
    parser = argparse.ArgumentParser(
        prog='pymmog',
        description='Publish-subscribe game state over simulated networks.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + __version__)
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='log INFO (-v) or DEBUG (-vv) to stderr')
    parser.add_argument('-q', '--quiet', action='store_true',
                        help='log errors only')
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help='run a scenario and report metrics')
    run.add_argument('--config', required=True,
                     help='scenario JSON file or preset (%s)'
                     % (', '.join(preset_names())))
    run.add_argument('--seed', type=int)
    run.add_argument('--out', help='write the report here instead of stdout')
    run.add_argument('--realtime', action='store_true',
                     help='use UDP on loopback and the wall clock')
    run.add_argument('--timing', action='store_true',
                     help='include the wall-clock runtime in the report')
    run.add_argument('--loss', type=float, help='datagram drop probability')
    run.add_argument('--latency-mean', type=float, help='milliseconds')
    run.add_argument('--latency-jitter', type=float, help='milliseconds')
    run.add_argument('--players', type=int)
    run.add_argument('--duration', type=float, help='seconds of play')
    run.set_defaults(handler=_run)

    demo = commands.add_parser('auth-demo',
                               help='run the login approval truth table')
    demo.add_argument('--accounts', help='accounts JSONL fixture')
    demo.add_argument('--cards', help='cards JSONL fixture')
    demo.add_argument('--trials', type=int, default=2,
                      help='runs per case, alternating completion order')
    demo.add_argument('--out', help='write the report here instead of stdout')
    demo.set_defaults(handler=_auth_demo)

    serve = commands.add_parser('serve', help='serve the login tier over HTTP')
    serve.add_argument('--host', default='127.0.0.1')
    serve.add_argument('--port', type=int, default=8080)
    serve.add_argument('--accounts', help='accounts JSONL fixture')
    serve.add_argument('--cards', help='cards JSONL fixture')
    serve.add_argument('--today', type=_date,
                       help='pin the service clock to YYYY-MM-DD (UTC)')
    serve.set_defaults(handler=_serve)
    return parser


def main(argv=None):
    # type: (Optional[List[str]]) -> int
    parser = _parser()
    args = parser.parse_args(argv)
    if args.quiet:
        level = logging.ERROR
    elif args.verbose > 1:
        level = logging.DEBUG
    elif args.verbose:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.handler(args)
    except Error as e:
        logger.error("%s", e)
        if e.code in (protocol.CONFIG_ERROR, protocol.FIXTURE_ERROR):
            return EXIT_CONFIG
        if e.code == protocol.ASSERTION_FAILED:
            return EXIT_ASSERTION
        raise
