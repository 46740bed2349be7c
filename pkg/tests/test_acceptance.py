"""Reproductions of published rejection rates, run with ``pytest --runslow``.

Tolerances are a few combined Monte Carlo standard errors, those of the
simulated rates and those of the published 10,000 replication rates, plus a
slack for the design draw, which the rates are conditional on.
"""

import os

import pandas as pd
import pytest

from bsinfer.basic_types import Statistic
from bsinfer.cli import main
from bsinfer.montecarlo import SimConfig, run_null_rejection, run_power
from bsinfer.presets import table_experiments

pytestmark = pytest.mark.slow

WORKERS = os.cpu_count() or 1
PUBLISHED_REPLICATIONS = 10000
LEVELS = (0.10, 0.05, 0.01)
LR, LR_B, LR_B_STAR, LR_BOOT = Statistic.LR, Statistic.LR_B, Statistic.LR_B_STAR, Statistic.LR_BOOT


def tolerance(rate: float, replications: int, slack: float, width: float = 3.0) -> float:
    """Allowed deviation in percentage points around a reference ``rate`` in percent."""
    share = rate / 100.0
    variance = share * (1.0 - share) * (1.0 / replications + 1.0 / PUBLISHED_REPLICATIONS)
    return width * 100.0 * variance ** 0.5 + slack


def preset(table: int, name: str, **overrides) -> SimConfig:
    resolved = table_experiments(table).resolve(name)
    resolved.pop('run', None)
    resolved.update(seed=2024, workers=WORKERS)
    resolved.update(overrides)
    return SimConfig.parse_obj(resolved)


def check(result, expected, replications, slack=0.5, width=3.0):
    for (stat, level), reference in expected.items():
        allowed = tolerance(reference, replications, slack, width)
        assert result.rejection_rates[(stat, level)] == pytest.approx(reference, abs=allowed)


def test_tolerance_combines_both_standard_errors():
    single = 3.0 * 100.0 * (0.05 * 0.95 / 10000) ** 0.5
    assert tolerance(5.0, 10000, slack=0.0) == pytest.approx(single * 2.0 ** 0.5)
    assert tolerance(5.0, 10000, slack=0.5) == pytest.approx(single * 2.0 ** 0.5 + 0.5)


def test_table1_three_coefficients():
    result = run_null_rejection(preset(1, 'table1_p3'))
    check(result, {
        (LR, 0.10): 12.69, (LR_B, 0.10): 10.36, (LR_B_STAR, 0.10): 10.22,
        (LR, 0.05): 6.51, (LR_B, 0.05): 4.98, (LR_B_STAR, 0.05): 4.90,
        (LR, 0.01): 1.75, (LR_B, 0.01): 1.25, (LR_B_STAR, 0.01): 1.23,
    }, 10000)


def test_table2_large_sample():
    result = run_null_rejection(preset(2, 'table2_n200'))
    check(result, {(LR, 0.10): 10.92, (LR_B, 0.10): 10.14, (LR_B_STAR, 0.10): 10.12}, 10000)
    check(result, {(stat, level): 100.0 * level for stat in (LR, LR_B, LR_B_STAR) for level in LEVELS}, 10000)


def test_table4_power():
    result = run_power(preset(4, 'table4_n50_delta0.5'))
    check(result, {(LR_B, 0.05): 72.39}, 10000, slack=1.0)


def test_table6_bootstrap():
    replications = 1000
    result = run_null_rejection(preset(6, 'table6_alpha0.5', replications=replications, bootstrap_B=199))
    check(result, {(LR_BOOT, 0.05): 5.12}, replications, width=4.0)


def test_table7_collinear_design():
    cfg = preset(7, 'table7_rho0.9', bootstrap_B=None, statistics=['lr', 'lr_b', 'lr_b_star'])
    result = run_null_rejection(cfg)
    check(result, {(LR, 0.10): 15.73, (LR_B, 0.10): 11.14, (LR_B_STAR, 0.10): 10.77}, 10000, slack=1.5)


def test_table1_command(tmp_path):
    argv = ['simulate', '--table', '1', '--replications', '2000', '--seed', '7', '--threads', str(WORKERS),
            '--output-dir', str(tmp_path)]
    assert main(argv) == 0
    rates = pd.read_csv(tmp_path / 'rates.csv')
    assert len(rates) == 63
    assert set(rates['replications']) == {2000}
