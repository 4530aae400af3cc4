#!/usr/bin/env python
"""
    robolead.main
    ~~~~~~~~~~~~~~

    Closed-loop fish-leading robot simulator.

    :copyright: (c) 2024 by the robolead authors.
    :license: GPLv3, see LICENSE for more details.
"""

import sys
import os
import json
import logging
import logging.handlers
from errorhandler import ErrorHandler
from argparse import ArgumentParser, ArgumentDefaultsHelpFormatter
from .errors import RoboleadError
from .utils import (STATS, OUT_ENV, CONFIG_DIR, read_params, read_population, apply_overrides, create_config,
                    check_pid, output_root)
from .controller import LAWS, MODES, FIXED_CAREFULNESS, make_mode
from .params import ReferenceDistribution
from .records import manifest_path, write_manifest, write_record
from . import __version__


TRACE = 8


def _add_trial_args(parser, modes=True):
    if modes:
        parser.add_argument('--mode', action='store', choices=MODES, default='competent',
                            dest='mode', help='robot treatment mode')
        parser.add_argument('--carefulness', action='store', type=float, default=FIXED_CAREFULNESS,
                            dest='carefulness', help='carefulness of the fixed mode')
    parser.add_argument('--carefulness-law', action='store', choices=LAWS, default='integrator',
                        dest='law', help='carefulness update law')
    parser.add_argument('--duration', action='store', type=float, default=600.0,
                        dest='duration', help='post-release trial duration in s')
    parser.add_argument('--exit-timeout', action='store', type=float, default=180.0,
                        dest='exit_timeout', help='milling time in s before the fish is released')
    parser.add_argument('--release-margin', action='store', type=float, default=3.0,
                        dest='release_margin', help='distance in cm past the door that counts as released')


def _parser():
    parser = ArgumentParser(prog='robolead', formatter_class=ArgumentDefaultsHelpFormatter,
                            description='Closed-loop fish-leading robot simulator (version='+__version__+')')
    parser.add_argument('-q', '--quiet', action="store_true",
                        dest="quiet", help='quiet logging, only errors shown (WARNING)')
    parser.add_argument('-v', '--verbose', action="store_true",
                        dest="verbose", help='print more verbose output (DEBUG)')
    parser.add_argument('-t', '--trace', action="store_true",
                        dest="trace", help='print run tracing output (TRACE)')
    parser.add_argument('--syslog', action="store_true",
                        dest="syslog", help='add logging to syslog (INFO)')
    parser.add_argument('--params', action="store",
                        dest="params", help='path to parameter file, default is the shipped params.json')
    parser.add_argument('--population', action="store",
                        dest="population", help='path to fish population file, default is the shipped one')
    parser.add_argument('--set', action="append", default=[], metavar='SECTION.FIELD=VALUE',
                        dest="overrides", help='override one parameter, repeatable')
    parser.add_argument('-V', '--version', action="store_true",
                        dest="version", help='print version number')

    subparsers = parser.add_subparsers(dest='command')

    parser_setup = subparsers.add_parser('setup', help='write the default parameter files',
                                         formatter_class=ArgumentDefaultsHelpFormatter)
    parser_setup.add_argument('-p', '--path', action='store', default='.',
                              dest='path', help='directory for params.json and population.json')

    parser_run = subparsers.add_parser('run', help='run one trial',
                                       formatter_class=ArgumentDefaultsHelpFormatter)
    parser_run.add_argument('--seed', action='store', type=int, dest='seed',
                            help='root seed, required unless --manifest is given')
    parser_run.add_argument('--manifest', action='store', dest='manifest',
                            help='reproduce the trial a manifest describes')
    parser_run.add_argument('--fish', action='store', default='guppy', dest='fish',
                            help="fish model, 'guppy' or 'replay:PATH'")
    parser_run.add_argument('--out', action='store', dest='out',
                            help='output directory, default is ${:s} or the working directory'.format(OUT_ENV))
    _add_trial_args(parser_run)

    parser_pretrial = subparsers.add_parser('pretrial', help='build a reference carefulness distribution',
                                            formatter_class=ArgumentDefaultsHelpFormatter)
    parser_pretrial.add_argument('--n', action='store', type=int, default=10, dest='n',
                                 help='number of competent pretrials')
    parser_pretrial.add_argument('--seed', action='store', type=int, required=True, dest='seed',
                                 help='root seed')
    parser_pretrial.add_argument('--jobs', action='store', type=int, default=1, dest='jobs',
                                 help='worker processes')
    parser_pretrial.add_argument('--out', action='store', dest='out',
                                 help='output directory for reference.json')
    _add_trial_args(parser_pretrial, modes=False)

    parser_experiment = subparsers.add_parser('experiment', help='run an experiment, competent vs control',
                                              formatter_class=ArgumentDefaultsHelpFormatter)
    parser_experiment.add_argument('--id', action='store', type=int, required=True, choices=(1, 2, 3),
                                   dest='experiment_id', help='1 fixed, 2 random or 3 inverse control')
    parser_experiment.add_argument('--n', action='store', type=int, default=20, dest='n',
                                   help='trials per arm')
    parser_experiment.add_argument('--seed', action='store', type=int, required=True, dest='seed',
                                   help='root seed')
    parser_experiment.add_argument('--jobs', action='store', type=int, default=1, dest='jobs',
                                   help='worker processes, output does not depend on it')
    parser_experiment.add_argument('--reference', action='store', dest='reference',
                                   help='reference.json of a pretrial run for the random control')
    parser_experiment.add_argument('--no-analysis', action='store_true', dest='no_analysis',
                                   help='skip the analysis bundle')
    parser_experiment.add_argument('--out', action='store', dest='out',
                                   help='output directory, default is ${:s} or the working directory'.format(OUT_ENV))
    _add_trial_args(parser_experiment, modes=False)

    parser_analyze = subparsers.add_parser('analyze', help='analyze an experiment dataset',
                                           formatter_class=ArgumentDefaultsHelpFormatter)
    parser_analyze.add_argument('dataset', help='experiment directory holding dataset.csv')
    parser_analyze.add_argument('--body-sizes', action='store', dest='body_sizes',
                                help='CSV with columns arm and size_mm')
    parser_analyze.add_argument('--out', action='store', dest='out',
                                help='output directory, default is <dataset>/analysis')

    parser_metrics = subparsers.add_parser('metrics', help='scores and follow episodes of any two-agent track',
                                           formatter_class=ArgumentDefaultsHelpFormatter)
    parser_metrics.add_argument('track', help='CSV with fish_x, fish_y, robot_x, robot_y and optional time_s, phase')
    parser_metrics.add_argument('--rate', action='store', type=float, dest='rate',
                                help='sampling rate in Hz, needed without a time_s column')
    parser_metrics.add_argument('--out', action='store', dest='out',
                                help='output directory, default is ${:s} or the working directory'.format(OUT_ENV))

    parser_serve = subparsers.add_parser('serve', help='serve the controller over TCP',
                                         formatter_class=ArgumentDefaultsHelpFormatter)
    parser_serve.add_argument('--host', action='store', default='localhost', dest='host', help='bind address')
    parser_serve.add_argument('--port', action='store', type=int, default=7025, dest='port', help='TCP port')
    parser_serve.add_argument('--seed', action='store', type=int, required=True, dest='seed',
                              help='seed of every session controller stream')
    parser_serve.add_argument('--pidfile', action="store", default=None,
                              dest="pidfile", help='path to pid file')
    _add_trial_args(parser_serve)
    return parser


def _install(root_logger, handler):
    handler.robolead = True
    root_logger.addHandler(handler)


def _setup_logging(args):
    loglevel = logging.INFO
    if args.quiet:
        loglevel = logging.WARNING
    if args.verbose:
        loglevel = logging.DEBUG
    if args.trace:
        # trace override all
        logging.addLevelName(TRACE, 'TRACE')
        loglevel = TRACE

    basicloglevel = min(loglevel, logging.INFO) if args.syslog else loglevel
    root_logger = logging.getLogger()
    root_logger.setLevel(basicloglevel)
    # handlers of an earlier main() call in the same process
    for handler in [h for h in root_logger.handlers if getattr(h, 'robolead', False)]:
        root_logger.removeHandler(handler)
        handler.close()

    console_fmt = logging.Formatter('%(asctime)s %(levelname)s: %(message)s', datefmt='%b %d %H:%M:%S')
    if loglevel < logging.WARNING:
        console_handler = logging.StreamHandler(sys.stdout)
        console_handler.setFormatter(console_fmt)
        console_handler.addFilter(lambda record: record.levelno < logging.WARNING)
        console_handler.setLevel(loglevel)
        _install(root_logger, console_handler)
    console_err_handler = logging.StreamHandler(sys.stderr)
    console_err_handler.setFormatter(console_fmt)
    console_err_handler.setLevel(logging.WARNING)
    _install(root_logger, console_err_handler)

    if args.syslog:
        syslog_handler = logging.handlers.SysLogHandler(address='/dev/log',
                                                        facility=logging.handlers.SysLogHandler.LOG_DAEMON)
        syslog_handler.setFormatter(logging.Formatter('robolead: [%(levelname)s] %(message)s'))
        syslog_handler.setLevel(logging.INFO)
        _install(root_logger, syslog_handler)


def _template(args, params, population):
    from .engine import TrialConfig
    from .controller import Competent
    return TrialConfig(mode=Competent(), seed=args.seed, duration=args.duration, params=params, law=args.law,
                       exit_timeout=args.exit_timeout, release_margin=args.release_margin,
                       population=population)


def _mode(args, params):
    return make_mode(args.mode, reference=params.reference, carefulness=args.carefulness)


def _read_reference(path):
    with open(path) as file:
        data = json.load(file)
    return ReferenceDistribution(tuple(data['reference'] if isinstance(data, dict) else data))


def run_command(args, params, population):
    from .engine import TrialConfig, run_trial, config_from_manifest
    logger = logging.getLogger(__name__)

    if args.manifest:
        with open(args.manifest) as file:
            config = config_from_manifest(json.load(file))
        logger.info('Reproducing trial seed={:d} from {:s}...'.format(config.seed, args.manifest))
    elif args.seed is None:
        logger.error('run needs --seed or --manifest...')
        return None
    else:
        config = TrialConfig(mode=_mode(args, params), seed=args.seed, fish=args.fish, duration=args.duration,
                             params=params, law=args.law, exit_timeout=args.exit_timeout,
                             release_margin=args.release_margin, population=population)

    record = run_trial(config)
    out = output_root(args.out)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, 'trial_{:d}_{:s}.csv'.format(config.seed, config.mode.name))
    write_record(record, path)
    logger.info('Wrote {:d} rows to {:s}, manifest {:s}...'.format(len(record), path, manifest_path(path)))
    return path


def pretrial_command(args, params, population):
    from .engine import run_pretrials
    logger = logging.getLogger(__name__)

    reference = run_pretrials(args.n, _template(args, params, population), jobs=args.jobs)
    out = output_root(args.out)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, 'reference.json')
    write_manifest(path, {'reference': list(reference.frequencies), 'n': args.n, 'seed': args.seed,
                          'law': args.law, 'duration': args.duration})
    logger.info('Reference distribution {} written to {:s}...'
                .format(['{:.3f}'.format(f) for f in reference.frequencies], path))
    return path


def experiment_command(args, params, population):
    from .engine import run_experiment
    from .analysis import analysis_suite

    reference = _read_reference(args.reference) if args.reference else None
    out = output_root(args.out)
    dataset = run_experiment(args.experiment_id, args.n, args.seed, _template(args, params, population),
                             out=out, jobs=args.jobs, reference=reference)
    if not args.no_analysis:
        analysis_suite(dataset, os.path.join(out, 'analysis'))
    return dataset


def analyze_command(args):
    from .records import read_dataset
    from .analysis import analysis_suite, read_body_sizes

    dataset = read_dataset(args.dataset)
    body_sizes = read_body_sizes(args.body_sizes) if args.body_sizes else None
    return analysis_suite(dataset, args.out or os.path.join(args.dataset, 'analysis'), body_sizes)


def metrics_command(args, params):
    from .records import read_track
    from .analysis import track_metrics
    logger = logging.getLogger(__name__)

    track = read_track(args.track, args.rate)
    scores, episodes = track_metrics(track, params)
    out = output_root(args.out)
    os.makedirs(out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.track))[0]
    for suffix, frame in (('scores', scores), ('episodes', episodes)):
        frame.to_csv(os.path.join(out, '{:s}_{:s}.csv'.format(stem, suffix)), index=False, float_format='%.6f',
                     lineterminator='\n')
    logger.info('{:s}: {:d} samples, {:d} follow episodes, {:.2f} s following...'
                .format(args.track, len(scores), len(episodes), float(episodes['duration_s'].sum())))
    return scores, episodes


def serve_command(args, params):
    from .bridge import serve
    serve(args.host, args.port, params, _mode(args, params), args.seed, args.law, args.release_margin,
          args.exit_timeout)


def _main(argv=None):
    """robolead main function. Parses arguments and runs the subcommand.

    Parameters:
    ----------
    argv : {list of str}, optional
        Arguments (the default is None, sys.argv)

    Returns
    -------
    int
        Exit code
    """

    parser = _parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_help(sys.stderr)
        sys.exit(1)
    args = parser.parse_args(argv)

    if args.version:
        print(__version__)
        sys.exit()

    if not args.command:
        print('ERROR: No command specified.\n')
        parser.print_help(sys.stderr)
        sys.exit(1)

    e = ErrorHandler()
    _setup_logging(args)
    logger = logging.getLogger(__name__)

    pidfile = getattr(args, 'pidfile', None)
    if pidfile is not None:
        if not check_pid(pidfile):
            logger.info('pidfile {} exists, exiting'.format(pidfile))
            sys.exit(1)
        with open(pidfile, 'w') as file:
            file.write('{}\n'.format(os.getpid()))
    try:
        logger.info('Starting robolead...')

        if args.command == 'setup':
            if create_config(args.path):
                return 1
        else:
            params = read_params(args.params)
            population = read_population(args.population)
            if params is None or population is None:
                return 1
            logger.debug('Parameters from {:s}...'.format(args.params or CONFIG_DIR))
            params = apply_overrides(params, args.overrides)

            if args.command == 'run':
                run_command(args, params, population)
            elif args.command == 'pretrial':
                pretrial_command(args, params, population)
            elif args.command == 'experiment':
                experiment_command(args, params, population)
            elif args.command == 'analyze':
                analyze_command(args)
            elif args.command == 'metrics':
                metrics_command(args, params)
            elif args.command == 'serve':
                serve_command(args, params)

        STATS.log()
        logger.info('Finished successfully...\n')
    except (RoboleadError, OSError, ValueError, KeyError) as err:
        logger.error('Error while running {:s}: {}...'.format(args.command, err))
        return 1
    finally:
        if pidfile is not None:
            os.unlink(pidfile)
    return 1 if e.fired else 0


def main(argv=None):
    """Wrapper around _main function to catch KeyboardInterrupt

    Returns
    -------
    int
        Exit code
    """

    logger = logging.getLogger(__name__)
    try:
        return _main(argv)
    except KeyboardInterrupt:
        logger.error('KeyboardInterrupt - exiting gracefully...\n')
        return 1


if __name__ == "__main__":
    sys.exit(main())
