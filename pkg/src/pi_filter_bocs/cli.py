# Command-line entry point: pi-filter-bocs <subcommand> [options]
#   optimize    BOCS trials          baseline   random-search trials
#   enumerate   rank table + histogram of all canonical designs
#   evaluate    one objective query  report     CSV series from a run directory
#   serve-mock  run the bundled mock sampler
# Exit status: 0 ok, 1 runtime failure, 2 bad usage or configuration.
import argparse
import logging
import sys
from typing import List, Optional

from . import interface_funcs, mock_sampler
from .circuit_eval import CircuitModelError
from .config import ConfigError, RunConfig, load_config
from .encoding import EncodingError
from .harness import TrialAborted
from .records import RunLogError, write_json
from .solvers import SOLVER_NAMES, SolverError
from .surrogate import SurrogateError


def _add_run_options(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='JSON run configuration (defaults reproduce the reference experiment)')
    parser.add_argument('--solver', choices=SOLVER_NAMES)
    parser.add_argument('--endpoint', help='sampler URL for --solver remote')
    parser.add_argument('--trials', type=int, dest='n_trials')
    parser.add_argument('--seed', type=int)
    parser.add_argument('--iterations', type=int, dest='n_iterations')
    parser.add_argument('--initial', type=int, dest='n_initial')
    parser.add_argument('--workers', type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pi-filter-bocs',
                                     description='Surrogate-based layout optimization of pi noise filters.')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v for progress, -vv for debug output')
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('optimize', 'run BOCS trials'), ('baseline', 'run random-search trials')):
        p = sub.add_parser(name, help=help_text)
        _add_run_options(p)
        p.add_argument('--out', required=True, help='directory for run logs')
        p.add_argument('--resume', action='store_true', help='continue the trials logged in --out')

    p = sub.add_parser('enumerate', help='rank all canonical designs')
    _add_run_options(p)
    p.add_argument('--out', required=True)
    p.add_argument('--bin-width', type=float, default=1.0, help='histogram bin width in dB')

    p = sub.add_parser('evaluate', help='evaluate one design')
    _add_run_options(p)
    p.add_argument('--bits', required=True, help='22-character 0/1 design string')
    p.add_argument('--layout-out', help='write the design layout (placements and conductor cells) as JSON')

    p = sub.add_parser('report', help='write CSV series from a run directory')
    p.add_argument('run_dir')
    p.add_argument('--out', help='output directory (default: the run directory)')
    p.add_argument('--rank-table', help='rank_table.csv from the enumerate subcommand')

    p = sub.add_parser('serve-mock', help='serve the mock sampler')
    p.add_argument('--host', default='127.0.0.1')
    p.add_argument('--port', type=int, default=8765)
    p.add_argument('--backend', choices=mock_sampler.BACKENDS, default='exhaustive')
    p.add_argument('--fault', choices=mock_sampler.FAULTS)
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    return cfg.with_overrides(
        solver=args.solver, endpoint=args.endpoint, n_trials=args.n_trials, seed=args.seed,
        n_iterations=args.n_iterations, n_initial=args.n_initial, workers=args.workers)


def _dispatch(args: argparse.Namespace):
    if args.command in ('optimize', 'baseline'):
        cfg = _run_config(args)
        stage = interface_funcs.optimize if args.command == 'optimize' else interface_funcs.baseline
        histories = stage(cfg, args.out, resume=args.resume)
        for h in histories:
            print(f'trial {h.trial:02d}: best {h.best.y:.4f} ({h.best.x})')
    elif args.command == 'enumerate':
        table = interface_funcs.rank_designs(_run_config(args), args.out, args.bin_width)
        print(f'{len(table)} designs, best {table.best.s21_db:.4f} dB ({table.best.bits})')
    elif args.command == 'evaluate':
        obs = interface_funcs.query(args.bits, _run_config(args))
        print(f'branch={obs.branch.value} z={obs.z} y={obs.y!r}')
        if args.layout_out:
            write_json(args.layout_out, interface_funcs.layout(args.bits, _run_config(args)))
    elif args.command == 'report':
        for path in interface_funcs.report(args.run_dir, args.out, args.rank_table):
            print(path)
    elif args.command == 'serve-mock':
        mock_sampler.serve(args.host, args.port, backend=args.backend, fault=args.fault)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level, format='%(levelname)s %(name)s: %(message)s')

    try:
        _dispatch(args)
    except (ConfigError, EncodingError, FileNotFoundError) as e:
        print(f'error: {e}', file=sys.stderr)
        return 2
    except TrialAborted as e:
        print(f'error: {e}; resume with --resume (checkpoint {e.checkpoint})', file=sys.stderr)
        return 1
    except (SolverError, SurrogateError, CircuitModelError, RunLogError) as e:
        print(f'error: {e}', file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
