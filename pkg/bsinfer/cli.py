"""Command line interface.

Commands:

* ``fit``: fits the model to a CSV file and prints estimates with standard errors.
* ``test``: likelihood ratio test of a null hypothesis with Bartlett-corrected
  statistics and an optional parametric bootstrap.
* ``simulate``: runs simulation experiments from presets or an experiment file and
  writes ``rates.csv`` (or ``discrepancy.csv``) with ``manifest.json``.
* ``simulate-data``: writes a synthetic CSV drawn from the model.

Errors are reported on standard error as one line ``bsinfer: error[<kind>]: <text>``
and mapped to exit codes (see ``ExitCode``).
"""

import argparse
import json
import logging
import sys
import time
from datetime import datetime, timezone
from os import getenv
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from bsinfer import __version__
from bsinfer.basic_types import ExitCode
from bsinfer.bsdist import SinhNormalParams, sn_sample
from bsinfer.config import Experiment, ExperimentSet, load_config_file
from bsinfer.core import (BartlettFactorError, BootstrapError, ConfigModelBase, ConvergenceError,
                          DegenerateDataError, ExperimentAbortedError, HypothesisError, InputError,
                          RankDeficiencyError)
from bsinfer.correction import AlphaFixed, BetaFull, BetaSubset, HypothesisSpec
from bsinfer.mle import FitOptions, fit_full
from bsinfer.model import Dataset
from bsinfer.montecarlo import normal_true_level, quantile_discrepancy, run_null_rejection, run_power
from bsinfer.presets import figure_experiments, table8_grid, table_experiments
from bsinfer.testing import bootstrap_test, lr_test
from bsinfer.utils import derive_stream, file_checksum, fresh_seed

logger = logging.getLogger(__name__)

INTERCEPT = 'intercept'

_debug = getenv('BSINFER_DEBUG') == '1'

# First matching class wins, subclasses go before their bases.
_ERROR_KINDS: Tuple[Tuple[type, str, ExitCode], ...] = (
    (RankDeficiencyError, 'rank_deficiency', ExitCode.RANK_DEFICIENT),
    (DegenerateDataError, 'degenerate_data', ExitCode.NOT_CONVERGED),
    (ConvergenceError, 'convergence', ExitCode.NOT_CONVERGED),
    (ExperimentAbortedError, 'experiment_aborted', ExitCode.ABORTED),
    (BootstrapError, 'bootstrap', ExitCode.ABORTED),
    (HypothesisError, 'hypothesis', ExitCode.BAD_INPUT),
    (BartlettFactorError, 'bartlett_factor', ExitCode.BAD_INPUT),
    (InputError, 'input', ExitCode.BAD_INPUT),
    (ValidationError, 'validation', ExitCode.BAD_INPUT),
    (ValueError, 'value', ExitCode.BAD_INPUT),
)


class RunManifest(ConfigModelBase):
    """Provenance record written next to every output file.

    The seed falls back to the ``BSINFER_SEED`` environment variable when it is
    not given on the command line.

    Attributes:
        command: Subcommand name.
        arguments: Full argument list.
        seed: Seed of the random streams.
        version: ``bsinfer`` version.
        started: UTC start time in ISO format.
        elapsed: Wall-clock duration in seconds.
        input_checksum: ``sha256:<hex>`` of the input file, if any.
    """
    command: str
    arguments: List[str]
    seed: Optional[int] = None
    version: str = __version__
    started: str = ''
    elapsed: float = 0.0
    input_checksum: Optional[str] = None


def _new_manifest(args: argparse.Namespace, argv: Sequence[str]) -> RunManifest:
    fields = {'command': args.command, 'arguments': list(argv),
              'started': datetime.now(timezone.utc).isoformat(timespec='seconds')}

    if not hasattr(args, 'seed'):
        # explicit None keeps BSINFER_SEED out of seedless commands
        fields['seed'] = None
    elif args.seed is not None:
        fields['seed'] = args.seed

    manifest = RunManifest(**fields)

    if manifest.seed is None and hasattr(args, 'seed'):
        manifest.seed = fresh_seed()
        logger.info('No seed given, drew %d', manifest.seed)

    return manifest


def _write_json(path: Path, payload: dict) -> None:
    with path.open('w', encoding='utf8') as f:
        json.dump(payload, f, indent=2)
        f.write('\n')


def _parse_derivation(spec: str) -> Tuple[str, List[str]]:
    name, sep, expression = spec.partition('=')
    factors = [factor.strip() for factor in expression.split('*')]

    if not sep or not name.strip() or not all(factors):
        raise InputError(f'Derived column must look like name=a*b, got \'{spec}\'')

    return name.strip(), factors


def read_frame(path: Path) -> pd.DataFrame:
    """Reads a numeric CSV file with a header row.

    Raises:
        InputError: If the file is missing, empty, or holds a missing or
            non-numeric value, whose row and column are named.
    """
    if not path.is_file():
        raise InputError(f'No such file: {path}')

    try:
        frame = pd.read_csv(path, encoding='utf8')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise InputError(f'Can not read CSV file {path}: {e}') from e

    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad = np.argwhere(numeric.isna().to_numpy())

    if bad.size:
        row, col = bad[0]
        column = frame.columns[col]
        value = frame.iat[row, col]
        # header is line 1
        raise InputError(f'{path}: missing or non-numeric value {value!r} at line {row + 2}, column \'{column}\'')

    return numeric.astype(float)


def build_dataset(frame: pd.DataFrame, response: str, covariates: Optional[Sequence[str]] = None,
                  derive: Sequence[str] = (), log: bool = False, intercept: bool = True) -> Dataset:
    """Builds the regression input from a table.

    Args:
        frame: Numeric table.
        response: Response column name.
        covariates: Covariate column names, all columns but the response if not set.
        derive: Product columns ``name=a*b`` appended to the table, and to the
            covariates if those are not listed explicitly.
        log: The response holds lifetimes, model their logarithm.
        intercept: Prepend an intercept column named ``intercept``.

    Returns:
        ``Dataset`` instance, coefficients named after the columns.
    """
    frame = frame.copy()
    derived = []

    for spec in derive:
        name, factors = _parse_derivation(spec)
        missing = [factor for factor in factors if factor not in frame.columns]

        if missing:
            raise InputError(f'Derived column {name} uses unknown columns: {", ".join(missing)}')

        if name in frame.columns:
            raise InputError(f'Derived column {name} already exists')

        frame[name] = frame[factors].prod(axis=1)
        derived.append(name)

    if response not in frame.columns:
        raise InputError(f'Unknown response column: {response}')

    if covariates is None:
        covariates = [column for column in frame.columns if column != response]
    else:
        covariates = list(covariates) + [name for name in derived if name not in covariates]

    missing = [column for column in covariates if column not in frame.columns]

    if missing:
        raise InputError(f'Unknown covariate columns: {", ".join(missing)}')

    if response in covariates:
        raise InputError(f'Response column {response} is listed as a covariate')

    y = frame[response].to_numpy()

    if log:
        if np.any(y <= 0):
            raise InputError(f'Lifetimes in column {response} must be positive to take logarithms')

        y = np.log(y)

    X = frame[covariates].to_numpy()
    names = list(covariates)

    if intercept:
        if INTERCEPT in names:
            raise InputError(f'Column name {INTERCEPT} is reserved for the intercept')

        X = np.column_stack([np.ones(len(frame)), X])
        names = [INTERCEPT] + names

    if X.shape[1] == 0:
        raise InputError('Model has no coefficients')

    if len(frame) <= X.shape[1]:
        raise InputError(f'Need more rows than coefficients, got {len(frame)} rows and {X.shape[1]} coefficients')

    return Dataset(y, X, names=names)


def parse_null(spec: str, names: Sequence[str]) -> HypothesisSpec:
    """Parses ``name=value(,name=value)*`` or ``alpha=value`` into a hypothesis.

    Naming every coefficient gives a hypothesis on the whole coefficient vector.

    Raises:
        InputError: On syntax errors, unknown or repeated names.
    """
    restrictions = {}

    for item in spec.split(','):
        name, sep, value = item.partition('=')
        name = name.strip()

        if not sep or not name:
            raise InputError(f'Null hypothesis must look like name=value[,name=value], got \'{spec}\'')

        try:
            number = float(value)
        except ValueError:
            raise InputError(f'Not a number in null hypothesis: \'{value.strip()}\'') from None

        if name in restrictions:
            raise InputError(f'Coefficient {name} is restricted twice')

        restrictions[name] = number

    if 'alpha' in restrictions:
        if len(restrictions) > 1:
            raise InputError('Null hypothesis on alpha can not restrict coefficients too')

        if not restrictions['alpha'] > 0:
            raise InputError(f'Null value of alpha must be positive, got {restrictions["alpha"]}')

        return AlphaFixed(alpha0=restrictions['alpha'])

    unknown = [name for name in restrictions if name not in names]

    if unknown:
        raise InputError(f'Null hypothesis names unknown coefficients: {", ".join(unknown)}')

    indices = [names.index(name) for name in restrictions]

    if len(indices) == len(names):
        return BetaFull(values=[restrictions[name] for name in names])

    return BetaSubset(indices=indices, values=list(restrictions.values()))


def _load(args: argparse.Namespace) -> Tuple[Dataset, str]:
    path = Path(args.data)
    frame = read_frame(path)
    data = build_dataset(frame, args.response, args.covariates, args.derive, args.log, not args.no_intercept)
    return data, file_checksum(path)


def _format_fit(data: Dataset, fit_dict: dict) -> str:
    names = list(data.names) + ['alpha']
    estimates = fit_dict['beta'] + [fit_dict['alpha']]
    width = max(len(name) for name in names) + 2
    lines = [f'{"coefficient":<{width}}{"estimate":>14}  (std. error)']
    lines += [f'{name:<{width}}{value:>14.6g}  ({se:.4g})'
              for name, value, se in zip(names, estimates, fit_dict['std_errors'])]
    status = 'converged' if fit_dict['converged'] else 'NOT converged'
    lines.append(f'loglik {fit_dict["loglik"]:.6f}, {status} after {fit_dict["iterations"]} iterations')
    return '\n'.join(lines)


def _emit(args: argparse.Namespace, payload: dict, text: str, manifest: RunManifest) -> None:
    print(json.dumps(payload, indent=2) if args.json else text)

    if args.output:
        output = Path(args.output)
        _write_json(output, payload)
        _write_json(output.with_name(output.name + '.manifest.json'), manifest.dict())


def cmd_fit(args: argparse.Namespace, manifest: RunManifest) -> int:
    started = time.perf_counter()
    data, manifest.input_checksum = _load(args)
    result = fit_full(data, FitOptions())
    payload = dict(result.to_dict(), names=list(data.names), n=data.n)
    manifest.elapsed = time.perf_counter() - started
    _emit(args, payload, _format_fit(data, payload), manifest)
    return ExitCode.OK if result.converged else ExitCode.NOT_CONVERGED


def _format_test(payload: dict, hypothesis: str) -> str:
    lines = [f'H0: {hypothesis}  (q = {payload["df"]})',
             f'Bartlett B = {payload["bartlett"]["B"]:.6g}, c = {payload["bartlett"]["c"]:.6g}',
             f'{"statistic":<12}{"value":>12}{"p-value":>12}']

    for name in ('lr', 'lr_b', 'lr_b_star', 'lr_b_2star'):
        lines.append(f'{name:<12}{payload[name]:>12.6g}{payload["p_values"][name]:>12.4g}')

    boot = payload.get('bootstrap')

    if boot:
        lines.append(f'bootstrap (B = {boot["B"]}): p-value {boot["p_value"]:.4g}, critical values '
                     + ', '.join(f'{level}: {value:.4g}' for level, value in boot['critical_values'].items()))

    return '\n'.join(lines)


def cmd_test(args: argparse.Namespace, manifest: RunManifest) -> int:
    started = time.perf_counter()
    data, manifest.input_checksum = _load(args)
    h = parse_null(args.null, data.names)
    opts = FitOptions()
    report = lr_test(data, h, opts, evaluate_at=args.evaluate_at)
    payload = report.to_dict()
    payload['hypothesis'] = h.describe(data.names)
    payload['names'] = list(data.names)

    if args.bootstrap is not None:
        boot = bootstrap_test(data, h, args.bootstrap, manifest.seed, opts, observed=report, workers=args.threads)
        payload['bootstrap'] = boot.to_dict()

    manifest.elapsed = time.perf_counter() - started
    _emit(args, payload, _format_test(payload, payload['hypothesis']), manifest)
    return ExitCode.OK


def _experiment_frame(experiment: Experiment) -> Tuple[str, pd.DataFrame]:
    cfg = experiment.config

    if experiment.run == 'discrepancy':
        return 'discrepancy', quantile_discrepancy(cfg, experiment.grid)

    result = run_power(cfg) if experiment.run == 'power' else run_null_rejection(cfg)
    frame = result.to_frame()
    frame.insert(0, 'replications', result.replications_used)
    return 'rates', frame


def _table8_frame() -> pd.DataFrame:
    rows = [{'n': n, 'level': gamma, 'rate': 100.0 * normal_true_level(n, gamma)} for n, gamma in table8_grid()]
    return pd.DataFrame(rows, columns=['n', 'level', 'rate'])


def _experiment_set(args: argparse.Namespace) -> ExperimentSet:
    if args.config:
        return load_config_file(Path(args.config))
    elif args.figure is not None:
        return figure_experiments(args.figure)

    return table_experiments(args.table)


def cmd_simulate(args: argparse.Namespace, manifest: RunManifest) -> int:
    started = time.perf_counter()
    output_dir = Path(args.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    if args.config:
        manifest.input_checksum = file_checksum(Path(args.config))

    frames: Dict[str, List[pd.DataFrame]] = {}

    if args.table == 8:
        frames['rates'] = [_table8_frame()]
    else:
        experiment_set = _experiment_set(args)
        overrides = {'replications': args.replications, 'seed': manifest.seed, 'workers': args.threads,
                     'progress': args.progress}
        names = [args.experiment] if args.experiment else experiment_set.names()
        experiments = [experiment_set.get_experiment(name, overrides) for name in names]

        for experiment in experiments:
            logger.info('Running experiment %s', experiment.name)
            kind, frame = _experiment_frame(experiment)
            frame.insert(0, 'experiment', experiment.name)
            frames.setdefault(kind, []).append(frame)

    for kind, parts in frames.items():
        table = pd.concat(parts, ignore_index=True)
        table.to_csv(output_dir / f'{kind}.csv', index=False)
        print(table.to_string(index=False))

    manifest.elapsed = time.perf_counter() - started
    _write_json(output_dir / 'manifest.json', manifest.dict())
    return ExitCode.OK


def _float_list(value: str) -> List[float]:
    try:
        return [float(item) for item in value.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma separated numbers, got \'{value}\'') from None


def cmd_simulate_data(args: argparse.Namespace, manifest: RunManifest) -> int:
    beta = np.asarray(args.beta)
    p = len(beta)

    if args.n <= p:
        raise InputError(f'Need more rows than coefficients, got n={args.n}, p={p}')

    if not args.alpha > 0:
        raise InputError(f'alpha must be positive, got {args.alpha}')

    covariates = derive_stream(manifest.seed, 0).uniform(size=(args.n, p - 1))
    mean = beta[0] + covariates @ beta[1:]
    y = mean + sn_sample(SinhNormalParams(alpha=args.alpha), args.n, derive_stream(manifest.seed, 1))
    frame = pd.DataFrame(covariates, columns=[f'x{j}' for j in range(1, p)])
    response = 't' if args.lifetime else 'y'
    frame.insert(0, response, np.exp(y) if args.lifetime else y)

    output = Path(args.output)
    frame.to_csv(output, index=False, float_format='%.12g')
    _write_json(output.with_name(output.name + '.manifest.json'), manifest.dict())
    logger.info('Wrote %d rows to %s', args.n, output)
    return ExitCode.OK


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('data', help='CSV file with a header row')
    parser.add_argument('--response', '-r', required=True, help='response column')
    parser.add_argument('--covariates', '-x', nargs='+', default=None,
                        help='covariate columns, all other columns by default')
    parser.add_argument('--derive', action='append', default=[], metavar='NAME=A*B',
                        help='add a product column, e.g. an interaction (repeatable)')
    parser.add_argument('--log', action='store_true', help='response holds lifetimes, model their logarithm')
    parser.add_argument('--no-intercept', action='store_true', help='do not add an intercept column')
    parser.add_argument('--json', action='store_true', help='print JSON instead of a table')
    parser.add_argument('--output', '-o', default=None, help='also write JSON and its manifest to this file')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='bsinfer', description='Birnbaum-Saunders regression inference')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--verbose', '-v', action='count', default=0, help='-v for info, -vv for debug logging')
    subparsers = parser.add_subparsers(dest='command', required=True)

    fit = subparsers.add_parser('fit', help='fit the model to a CSV file')
    _add_model_arguments(fit)

    test = subparsers.add_parser('test', help='likelihood ratio test with Bartlett corrections')
    _add_model_arguments(test)
    test.add_argument('--null', required=True, help='null hypothesis, e.g. "x4=0,x5=0" or "alpha=0.5"')
    test.add_argument('--bootstrap', type=int, default=None, metavar='B', help='bootstrap replicates')
    test.add_argument('--seed', type=int, default=None, help='bootstrap seed, BSINFER_SEED or entropy by default')
    test.add_argument('--threads', type=int, default=1, help='worker processes for the bootstrap')
    test.add_argument('--evaluate-at', choices=['restricted', 'full'], default='restricted',
                      help='estimate the Bartlett term is evaluated at')

    simulate = subparsers.add_parser('simulate', help='run Monte Carlo experiments')
    source = simulate.add_mutually_exclusive_group(required=True)
    source.add_argument('--table', type=int, default=None, help='published table preset')
    source.add_argument('--figure', type=int, default=None, help='published figure preset')
    source.add_argument('--config', default=None, help='JSON or YAML experiment file')
    simulate.add_argument('--experiment', default=None, help='run only this experiment')
    simulate.add_argument('--replications', type=int, default=None, help='override replication counts')
    simulate.add_argument('--seed', type=int, default=None, help='seed, BSINFER_SEED or entropy by default')
    simulate.add_argument('--threads', type=int, default=1, help='worker processes')
    simulate.add_argument('--progress', action='store_true', help='show progress bars')
    simulate.add_argument('--output-dir', default='.', help='directory for rates.csv and manifest.json')

    simulate_data = subparsers.add_parser('simulate-data', help='write a synthetic CSV drawn from the model')
    simulate_data.add_argument('output', help='CSV file to write')
    simulate_data.add_argument('--n', type=int, required=True, help='number of rows')
    simulate_data.add_argument('--beta', type=_float_list, required=True,
                               help='comma separated coefficients, intercept first')
    simulate_data.add_argument('--alpha', type=float, required=True, help='shape parameter')
    simulate_data.add_argument('--seed', type=int, default=None, help='seed, BSINFER_SEED or entropy by default')
    simulate_data.add_argument('--lifetime', action='store_true', help='write lifetimes t = exp(y) in column t')

    return parser


_COMMANDS = {
    'fit': cmd_fit,
    'test': cmd_test,
    'simulate': cmd_simulate,
    'simulate-data': cmd_simulate_data,
}


def _setup_logging(verbosity: int) -> None:
    if _debug or verbosity >= 2:
        level = logging.DEBUG
    elif verbosity == 1:
        level = logging.INFO
    else:
        level = logging.WARNING

    logging.basicConfig(level=level, stream=sys.stderr, format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def _report_error(error: Exception) -> int:
    for error_type, kind, code in _ERROR_KINDS:
        if isinstance(error, error_type):
            text = ' '.join(str(error).split())
            print(f'bsinfer: error[{kind}]: {text}', file=sys.stderr)
            return code

    raise error


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``bsinfer`` command.

    Args:
        argv: Arguments without the program name, ``sys.argv[1:]`` if not set.

    Returns:
        Process exit code.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return ExitCode.OK if e.code == 0 else ExitCode.BAD_INPUT

    _setup_logging(args.verbose)

    try:
        manifest = _new_manifest(args, argv)
        return _COMMANDS[args.command](args, manifest)
    except Exception as e:
        return _report_error(e)
