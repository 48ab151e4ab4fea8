"""
Entrypoint for the application
"""

import argparse
import logging
import os
import sys

from featuresort import commands
from featuresort.config import load_config, parse_set_flags
from featuresort.errors import EXIT_OK, EXIT_USAGE, ConfigError, FeatureSortError

log = logging.getLogger('featuresort')

LOG_ENV = 'FEATURESORT_LOG'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, '{}: error: {}\n'.format(self.prog, message))


def configure_logging():
    level = os.environ.get(LOG_ENV, 'WARNING').upper()
    unknown = level not in LOG_LEVELS
    logging.basicConfig(level=logging.WARNING if unknown else getattr(logging, level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    if unknown:
        log.warning('Unknown %s level %r, using WARNING', LOG_ENV, level)


def _config_flags(parser):
    parser.add_argument('--config', type=str, default=None, help='config file of section.key = value lines')
    parser.add_argument('--set', type=str, action='append', default=[], dest='overrides', metavar='KEY=VALUE',
                        help='override one config key, e.g. tracker.iou_min=0.5 (repeatable)')


def build_parser():
    parser = ArgumentParser(prog='featuresort', description='Multi-object tracking with feature-bank association.')
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND', parser_class=ArgumentParser)
    subparsers.required = True

    track = subparsers.add_parser('track', help='track detection files into trajectory files')
    track.add_argument('detections', nargs='+', help='detection file(s) with .features sidecars')
    track.add_argument('--out', required=True, help='trajectory file, or directory for several inputs')
    track.add_argument('--jobs', type=int, default=1, help='worker processes for several inputs')
    track.add_argument('--metrics-file', type=str, default=None, help='file to write run metrics to')
    _config_flags(track)

    post = subparsers.add_parser('postprocess', help='global linking and GSP smoothing of a trajectory file')
    post.add_argument('trajectories')
    post.add_argument('--out', required=True)
    _config_flags(post)

    evaluate = subparsers.add_parser('eval', help='score predicted trajectories against ground truth')
    evaluate.add_argument('pred')
    evaluate.add_argument('truth')
    evaluate.add_argument('--out', default=None, help='metrics file to write (default: <pred>.prom)')
    evaluate.add_argument('--sequence', default=None, help='sequence label in the metrics file')

    synth = subparsers.add_parser('synth', help='generate a synthetic scenario')
    synth.add_argument('scenario', help='preset name or scenario file')
    synth.add_argument('--out', required=True, help='output directory')
    synth.add_argument('--seed', type=int, default=None)
    _config_flags(synth)

    ablate = subparsers.add_parser('ablate', help='compare tracker variants on a preset over several seeds')
    ablate.add_argument('scenario', help='preset name or scenario file')
    ablate.add_argument('--seeds', type=int, default=20)
    ablate.add_argument('--seed', type=int, default=0, help='first seed')
    _config_flags(ablate)

    return parser


def run(args):
    if args.command == 'eval':
        commands.cmd_eval(args.pred, args.truth, args.out, args.sequence)
        return

    cfg = load_config(args.config, parse_set_flags(args.overrides))
    if args.command == 'track':
        if args.jobs < 1:
            raise ConfigError('--jobs must be >= 1')
        commands.cmd_track(args.detections, args.out, cfg, jobs=args.jobs, metrics_file=args.metrics_file)
    elif args.command == 'postprocess':
        commands.cmd_postprocess(args.trajectories, args.out, cfg)
    elif args.command == 'synth':
        commands.cmd_synth(args.scenario, args.out, cfg, seed=args.seed)
    elif args.command == 'ablate':
        commands.cmd_ablate(args.scenario, args.seeds, cfg, first_seed=args.seed)


def main(argv=None):
    configure_logging()
    args = build_parser().parse_args(argv)

    try:
        run(args)
    except FeatureSortError as e:
        log.error(e)
        return e.exit_code
    except OSError as e:
        log.error(e)
        return FeatureSortError.exit_code
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
