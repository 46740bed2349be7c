"""Experiment presets reproducing the published simulation study.

Each table is an ``ExperimentSet`` built from a dict in the experiment file
format (see ``bsinfer.config``). Data are generated with an intercept and
``U(0, 1)`` covariates, coefficients equal to 1 and errors ``SN(alpha, 0, 2)``;
levels are 10%, 5% and 1% and the default replication count is 10,000.
Table 8 needs no simulation, it lists exact sizes of the likelihood ratio test
on a normal mean.
"""

from typing import Dict, List, Tuple

from bsinfer.basic_types import JSONDict
from bsinfer.config import DEFAULT_GRID, ExperimentSet, experiment_set_from_dict
from bsinfer.core import InputError

TABLES = (1, 2, 4, 5, 6, 7, 8)
FIGURES = (1,)
TABLE8_SIZES = (5, 8, 12, 20, 50)
TABLE8_LEVELS = (0.01, 0.05, 0.10)

_BASE = {'abstract': True, 'alpha': 0.5, 'replications': 10000}


def _trailing_pair(p: int) -> JSONDict:
    return {'kind': 'beta_subset', 'indices': [p - 2, p - 1]}


def _table1() -> JSONDict:
    # H0: beta_(p-1) = beta_p = 0, n = 30, alpha = 0.5
    configs = {'table1': dict(_BASE, n=30)}

    for p in range(3, 10):
        configs[f'table1_p{p}'] = {'extends': 'table1', 'p': p, 'hypothesis': _trailing_pair(p)}

    return configs


def _table2() -> JSONDict:
    # H0: beta5 = beta6 = 0, p = 6, alpha = 0.5
    configs = {'table2': dict(_BASE, p=6, hypothesis=_trailing_pair(6))}

    for n in (20, 30, 40, 50, 100, 200):
        configs[f'table2_n{n}'] = {'extends': 'table2', 'n': n}

    return configs


def _table4() -> JSONDict:
    # H1: beta3 = beta4 = delta, p = 4, alpha = 0.5
    configs = {'table4': dict(_BASE, p=4, run='power', hypothesis=_trailing_pair(4),
                              statistics=['lr_b', 'lr_b_star'])}

    for n in (30, 50, 100):
        for delta in (0.1, 0.2, 0.3, 0.4, 0.5):
            configs[f'table4_n{n}_delta{delta:g}'] = {'extends': 'table4', 'n': n, 'delta': delta}

    return configs


def _table5() -> JSONDict:
    # H0: alpha = alpha0, n = 30
    configs = {'table5': dict(_BASE, n=30)}

    for alpha0 in (0.5, 1.0):
        for p in (2, 3, 4):
            configs[f'table5_alpha{alpha0:g}_p{p}'] = {
                'extends': 'table5', 'p': p, 'alpha': alpha0,
                'hypothesis': {'kind': 'alpha', 'alpha0': alpha0},
            }

    return configs


def _table6() -> JSONDict:
    # H0: beta3 = beta4 = 0, p = 4, n = 25, bootstrap with 600 replicates
    configs = {'table6': dict(_BASE, n=25, p=4, hypothesis=_trailing_pair(4), bootstrap_B=600)}

    for alpha in (0.1, 0.3, 0.5, 0.7, 0.9, 1.2, 2, 10, 50, 100):
        configs[f'table6_alpha{alpha:g}'] = {'extends': 'table6', 'alpha': alpha}

    return configs


def _table7() -> JSONDict:
    # H0: beta2 = beta4 = 0, p = 4, n = 20, correlated third and fourth covariates
    configs = {'table7': dict(_BASE, n=20, p=4, bootstrap_B=600,
                              hypothesis={'kind': 'beta_subset', 'indices': [1, 3]})}

    for rho in (0.0, 0.5, 0.9):
        configs[f'table7_rho{rho:g}'] = {'extends': 'table7', 'design': {'kind': 'collinear', 'rho': rho}}

    return configs


def _figure1() -> JSONDict:
    return {'figure1': {'n': 30, 'p': 6, 'alpha': 0.5, 'replications': 10000, 'run': 'discrepancy',
                        'grid': list(DEFAULT_GRID), 'hypothesis': _trailing_pair(6)}}


_TABLE_BUILDERS = {1: _table1, 2: _table2, 4: _table4, 5: _table5, 6: _table6, 7: _table7}


def table_experiments(table: int) -> ExperimentSet:
    """Returns the experiments of a simulated table.

    Raises:
        InputError: If the table has no simulation experiments.
    """
    builder = _TABLE_BUILDERS.get(table)

    if builder is None:
        raise InputError(f'No simulation preset for table {table}, available: {sorted(_TABLE_BUILDERS)}')

    return experiment_set_from_dict(builder(), source=f'preset table {table}')


def figure_experiments(figure: int) -> ExperimentSet:
    """Returns the experiments of a figure.

    Raises:
        InputError: If the figure number is unknown.
    """
    if figure not in FIGURES:
        raise InputError(f'No preset for figure {figure}, available: {list(FIGURES)}')

    return experiment_set_from_dict(_figure1(), source=f'preset figure {figure}')


def table8_grid() -> List[Tuple[int, float]]:
    """Sample sizes and nominal levels of the exact normal-mean table."""
    return [(n, gamma) for n in TABLE8_SIZES for gamma in TABLE8_LEVELS]


# Published two-decimal values in percent, used as a reference in tests and reports.
TABLE8_PUBLISHED: Dict[Tuple[int, float], float] = {
    (5, 0.01): 2.91, (5, 0.05): 9.79, (5, 0.10): 16.54,
    (8, 0.01): 1.97, (8, 0.05): 7.64, (8, 0.10): 13.72,
    (12, 0.01): 1.58, (12, 0.05): 6.64, (12, 0.10): 12.35,
    (20, 0.01): 1.32, (20, 0.05): 5.93, (20, 0.10): 11.35,
    (50, 0.01): 1.12, (50, 0.05): 5.36, (50, 0.10): 10.52,
}
