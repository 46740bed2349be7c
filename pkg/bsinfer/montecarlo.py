"""Seeded Monte Carlo experiments on the size and power of the likelihood ratio tests.

An experiment draws one design matrix and holds it fixed over all replications,
so rates are conditional on the design. Every random quantity comes from its own
counter-based stream addressed by an integer key:

* ``(seed, 0)``: the design matrix,
* ``(seed, 1, r, a)``: the response of replication ``r``, attempt ``a``,
* ``(seed, 2, r, a, b, c)``: bootstrap replicate ``b``, attempt ``c`` inside it.

Results are therefore identical for any number of worker processes.
"""

import logging
import time
from dataclasses import dataclass
from functools import partial
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, PositiveFloat, PositiveInt, conint, confloat, root_validator, validator

from bsinfer.basic_types import Statistic
from bsinfer.bsdist import SinhNormalParams, sn_sample
from bsinfer.core import (BartlettFactorError, BootstrapError, ConfigModelBase, ConvergenceError,
                          DegenerateDataError, DomainError, ExperimentAbortedError, HypothesisError)
from bsinfer.correction import AlphaFixed, BetaFull, BetaSubset, HypothesisSpec
from bsinfer.mle import FitOptions
from bsinfer.model import Dataset
from bsinfer.specfun import chisq_quantile, student_t_cdf
from bsinfer.testing import bootstrap_test, lr_test
from bsinfer.utils import derive_stream, fresh_seed, parallel_map

logger = logging.getLogger(__name__)

DESIGN_STREAM = 0
RESPONSE_STREAM = 1
BOOTSTRAP_STREAM = 2
REDRAW_SHARE = 0.01

_CHI_SQUARE_STATISTICS = (Statistic.LR, Statistic.LR_B, Statistic.LR_B_STAR, Statistic.LR_B_2STAR)


class UniformDesign(BaseModel):
    """Intercept column followed by independent ``U(0, 1)`` covariates."""
    kind: str = Field(default='uniform', const=True)

    class Config:
        extra = 'forbid'


class CollinearDesign(BaseModel):
    """Four column design with a correlated normal pair, see ``make_collinear_design``.

    Attributes:
        rho: Correlation of the third and fourth covariates.
    """
    kind: str = Field(default='collinear', const=True)
    rho: confloat(gt=-1, lt=1)

    class Config:
        extra = 'forbid'


DesignSpec = Union[UniformDesign, CollinearDesign]


class SimConfig(ConfigModelBase):
    """Monte Carlo experiment description.

    Data are generated with all coefficients equal to 1 except the restricted
    ones, which take their null values plus ``delta``. For a hypothesis on the
    shape, data are generated with shape ``alpha + delta`` and ``alpha`` must
    equal the null value.

    Attributes:
        n: Number of observations.
        p: Number of coefficients, the intercept included.
        alpha: Shape of the generating model.
        hypothesis: Null hypothesis under test.
        levels: Nominal levels.
        replications: Number of Monte Carlo replications.
        seed: Seed of all random streams, drawn from system entropy if not set
            (``BSINFER_SEED`` environment variable is read first).
        design: Design matrix generator.
        delta: Departure from the null hypothesis, 0 for null rejection rates.
        bootstrap_B: Number of bootstrap replicates, no bootstrap test if not set.
        statistics: Statistics to tally.
        workers: Number of worker processes.
        progress: Show a progress bar.
    """
    n: conint(ge=2)
    p: PositiveInt
    alpha: PositiveFloat
    hypothesis: HypothesisSpec
    levels: List[confloat(gt=0, lt=1)] = [0.10, 0.05, 0.01]
    replications: conint(ge=100) = 10000
    seed: Optional[conint(ge=0)] = None
    design: DesignSpec = UniformDesign()
    delta: confloat(ge=0) = 0.0
    bootstrap_B: Optional[conint(ge=19)] = None
    statistics: List[Statistic] = [Statistic.LR, Statistic.LR_B, Statistic.LR_B_STAR]
    workers: PositiveInt = 1
    progress: bool = False

    @validator('levels', 'statistics')
    def not_empty(cls, v: list, field) -> list:
        if not v:
            raise ValueError(f'{field.name} must not be empty')

        return list(dict.fromkeys(v))

    @root_validator(skip_on_failure=True)
    def consistent(cls, values: dict) -> dict:
        n, p, h = values['n'], values['p'], values['hypothesis']

        if n <= p:
            raise ValueError(f'Need more observations than coefficients, got n={n}, p={p}')

        try:
            h.check(p)
        except HypothesisError as e:
            raise ValueError(str(e)) from e

        if h.q(p) < 1:
            raise ValueError('Null hypothesis imposes no restrictions')

        if isinstance(h, AlphaFixed) and values['alpha'] != h.alpha0:
            raise ValueError(f'Generating shape {values["alpha"]} differs from the null value {h.alpha0}')

        if isinstance(values['design'], CollinearDesign) and p != 4:
            raise ValueError(f'Collinear design has 4 columns, got p={p}')

        statistics = values['statistics']

        if values['bootstrap_B'] is not None and Statistic.LR_BOOT not in statistics:
            values['statistics'] = statistics + [Statistic.LR_BOOT]
        elif values['bootstrap_B'] is None and Statistic.LR_BOOT in statistics:
            raise ValueError('Statistic lr_boot needs bootstrap_B')

        return values


@dataclass(frozen=True)
class SimResult:
    """Monte Carlo experiment outcome.

    Attributes:
        rejection_rates: Rejection rates in percent by ``(statistic, level)``.
        mc_standard_errors: Monte Carlo standard errors ``100 sqrt(r (1 - r) / R)``
            of the rates, same keys.
        replications_used: Number of replications tallied.
        redraws: Number of responses discarded because a fit failed.
        elapsed: Wall-clock duration in seconds.
        seed: Seed the experiment ran with.
    """
    rejection_rates: Dict[Tuple[Statistic, float], float]
    mc_standard_errors: Dict[Tuple[Statistic, float], float]
    replications_used: int
    redraws: int
    elapsed: float
    seed: int

    def to_frame(self) -> pd.DataFrame:
        """Returns a ``statistic, level, rate, mc_se`` table, one row per rate."""
        rows = [{'statistic': stat.value, 'level': level, 'rate': rate,
                 'mc_se': self.mc_standard_errors[(stat, level)]}
                for (stat, level), rate in self.rejection_rates.items()]
        return pd.DataFrame(rows, columns=['statistic', 'level', 'rate', 'mc_se'])


class _Replication(NamedTuple):
    values: Dict[Statistic, float]
    bootstrap_rejections: Optional[Dict[float, bool]]
    attempts: int


def make_collinear_design(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Design with an intercept, a ``U(0, 1)`` covariate and a correlated normal pair.

    The pair is bivariate normal with unit variances and correlation ``rho``,
    obtained from independent normals through the Cholesky factor of its
    covariance matrix.

    Args:
        n: Number of rows.
        rho: Correlation, ``|rho| < 1``.
        rng: Random stream.

    Returns:
        Matrix of shape ``(n, 4)``.
    """
    if not -1.0 < rho < 1.0:
        raise DomainError(f'Correlation must lie in (-1, 1), got {rho}')

    cov = np.array([[1.0, rho], [rho, 1.0]])
    pair = rng.standard_normal((n, 2)) @ np.linalg.cholesky(cov).T
    return np.column_stack([np.ones(n), rng.uniform(size=n), pair])


def make_design(cfg: SimConfig, seed: int) -> Dataset:
    """Draws the experiment design from the stream ``(seed, 0)``."""
    rng = derive_stream(seed, DESIGN_STREAM)

    if isinstance(cfg.design, CollinearDesign):
        X = make_collinear_design(cfg.n, cfg.design.rho, rng)
    else:
        X = np.column_stack([np.ones(cfg.n), rng.uniform(size=(cfg.n, cfg.p - 1))])

    return Dataset(np.zeros(cfg.n), X)


def true_parameters(cfg: SimConfig) -> Tuple[np.ndarray, float]:
    """Coefficients and shape of the generating model."""
    h = cfg.hypothesis
    beta = np.ones(cfg.p)

    if isinstance(h, BetaSubset):
        beta[h.indices] = np.asarray(h.values) + cfg.delta
    elif isinstance(h, BetaFull):
        beta = np.asarray(h.values, dtype=float) + cfg.delta
    elif isinstance(h, AlphaFixed):
        return beta, h.alpha0 + cfg.delta

    return beta, cfg.alpha


def _replicate(index: int, cfg: SimConfig, design: Dataset, seed: int, opts: FitOptions,
               max_attempts: int) -> _Replication:
    beta, alpha = true_parameters(cfg)
    mean = design.X @ beta
    params = SinhNormalParams(alpha=alpha, mu=0.0, sigma=2.0)
    error = None

    for attempt in range(max_attempts):
        rng = derive_stream(seed, RESPONSE_STREAM, index, attempt)
        data = design.with_response(mean + sn_sample(params, cfg.n, rng))

        try:
            report = lr_test(data, cfg.hypothesis, opts)
            boot = None

            if cfg.bootstrap_B is not None:
                boot_seed = (seed, BOOTSTRAP_STREAM, index, attempt)
                boot = bootstrap_test(data, cfg.hypothesis, cfg.bootstrap_B, boot_seed, opts, levels=cfg.levels,
                                      observed=report).rejections

            return _Replication(values=report.statistics(), bootstrap_rejections=boot, attempts=attempt)
        except (ConvergenceError, DegenerateDataError, BartlettFactorError, BootstrapError) as e:
            error = e
            logger.debug('Replication %d attempt %d discarded: %s', index, attempt, e)

    raise ExperimentAbortedError(f'Replication {index} failed {max_attempts} times, last error: {error}')


def _simulate(cfg: SimConfig) -> Tuple[List[_Replication], int, float]:
    seed = fresh_seed() if cfg.seed is None else cfg.seed
    started = time.perf_counter()
    design = make_design(cfg, seed)
    max_redraws = max(1, int(REDRAW_SHARE * cfg.replications))
    logger.info('Experiment n=%d p=%d alpha=%g delta=%g, %d replications, seed %d',
                cfg.n, cfg.p, cfg.alpha, cfg.delta, cfg.replications, seed)

    task = partial(_replicate, cfg=cfg, design=design, seed=seed, opts=FitOptions(), max_attempts=max_redraws + 1)
    replications = parallel_map(task, range(cfg.replications), workers=cfg.workers, progress=cfg.progress,
                                desc='replications')
    redraws = sum(rep.attempts for rep in replications)

    if redraws > max_redraws:
        raise ExperimentAbortedError(f'Experiment needed {redraws} redraws for {cfg.replications} replications, '
                                     f'more than the allowed {max_redraws} (seed {seed})')

    elapsed = time.perf_counter() - started
    logger.info('Experiment finished in %.1f s with %d redraws', elapsed, redraws)
    return replications, seed, elapsed


def _tally(cfg: SimConfig, statistics: Sequence[Statistic], replications: List[_Replication], seed: int,
           elapsed: float) -> SimResult:
    total = len(replications)
    q = cfg.hypothesis.q(cfg.p)
    rates = {}
    errors = {}

    for stat in statistics:
        for level in cfg.levels:
            if stat is Statistic.LR_BOOT:
                count = sum(rep.bootstrap_rejections[level] for rep in replications)
            else:
                critical = chisq_quantile(1.0 - level, q)
                count = sum(rep.values[stat] > critical for rep in replications)

            share = count / total
            rates[(stat, level)] = 100.0 * share
            errors[(stat, level)] = 100.0 * np.sqrt(share * (1.0 - share) / total)

    return SimResult(rejection_rates=rates, mc_standard_errors=errors, replications_used=total,
                     redraws=sum(rep.attempts for rep in replications), elapsed=elapsed, seed=seed)


def run_null_rejection(cfg: SimConfig) -> SimResult:
    """Estimates null rejection rates of the selected statistics.

    Raises:
        DomainError: If ``cfg.delta`` is not 0.
        ExperimentAbortedError: If more than 1% of the responses had to be redrawn.
    """
    if cfg.delta != 0:
        raise DomainError(f'Null rejection rates need delta = 0, got {cfg.delta}')

    replications, seed, elapsed = _simulate(cfg)
    return _tally(cfg, cfg.statistics, replications, seed, elapsed)


def run_power(cfg: SimConfig) -> SimResult:
    """Estimates rejection rates with the restricted coefficients shifted by ``cfg.delta``.

    The uncorrected statistic is left out, its size distortion makes its raw
    power meaningless. With ``delta = 0`` the rates equal the null rates.

    Raises:
        HypothesisError: If the hypothesis does not restrict a coefficient subset.
    """
    if not isinstance(cfg.hypothesis, BetaSubset):
        raise HypothesisError('Power experiments need a hypothesis on a coefficient subset')

    statistics = [stat for stat in cfg.statistics if stat is not Statistic.LR]
    replications, seed, elapsed = _simulate(cfg)
    return _tally(cfg, statistics, replications, seed, elapsed)


def quantile_discrepancy(cfg: SimConfig, grid: Sequence[float]) -> pd.DataFrame:
    """Relative discrepancies between simulated and asymptotic null quantiles.

    Args:
        cfg: Experiment description with ``delta = 0``.
        grid: Probabilities in ``(0, 1)``.

    Returns:
        Table with columns ``probability``, ``asymptotic_quantile`` and one
        column per chi-square referenced statistic holding
        ``(empirical - asymptotic) / asymptotic``.
    """
    if cfg.delta != 0:
        raise DomainError(f'Quantile discrepancies need delta = 0, got {cfg.delta}')

    grid = [float(prob) for prob in grid]

    if not grid or any(not 0.0 < prob < 1.0 for prob in grid):
        raise DomainError(f'Grid probabilities must lie in (0, 1), got {grid}')

    replications, _, _ = _simulate(cfg)
    q = cfg.hypothesis.q(cfg.p)
    asymptotic = np.array([chisq_quantile(prob, q) for prob in grid])
    table = pd.DataFrame({'probability': grid, 'asymptotic_quantile': asymptotic})

    for stat in cfg.statistics:
        if stat not in _CHI_SQUARE_STATISTICS:
            continue

        values = np.array([rep.values[stat] for rep in replications])
        table[stat.value] = (np.quantile(values, grid) - asymptotic) / asymptotic

    return table


def normal_true_level(n: int, gamma: float) -> float:
    """Exact size of the nominal ``gamma`` likelihood ratio test on a normal mean.

    For ``H0: mu = mu0`` with unknown variance the test rejects when the t
    statistic exceeds ``k = sqrt((exp(c / n) - 1) (n - 1))``, ``c`` being the
    upper ``gamma`` quantile of the chi-square distribution with one degree of
    freedom, so the size is ``2 P(t_(n-1) > k)``.

    Args:
        n: Sample size, at least 2.
        gamma: Nominal level in ``(0, 1)``.

    Returns:
        True level as a probability.
    """
    if n < 2:
        raise DomainError(f'Sample size must be at least 2, got {n}')

    if not 0.0 < gamma < 1.0:
        raise DomainError(f'Nominal level must lie in (0, 1), got {gamma}')

    c = chisq_quantile(1.0 - gamma, 1)
    k = np.sqrt(np.expm1(c / n) * (n - 1))
    return 2.0 * student_t_cdf(-k, n - 1)
