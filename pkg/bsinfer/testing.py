"""Likelihood ratio tests: the plain statistic, its Bartlett-corrected variants and the parametric bootstrap."""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from bsinfer.basic_types import SeedKey, Statistic
from bsinfer.bsdist import SinhNormalParams, sn_sample
from bsinfer.core import BootstrapError, ConvergenceError, DegenerateDataError, DomainError, HypothesisError
from bsinfer.correction import BartlettFactor, HypothesisSpec, bartlett_B
from bsinfer.mle import FitOptions, FitResult, fit_full, fit_restricted
from bsinfer.model import Dataset, Theta
from bsinfer.specfun import chisq_sf
from bsinfer.utils import derive_stream, parallel_map

logger = logging.getLogger(__name__)

# Statistics above -LR_NEGATIVE_TOL and below 0 are round-off and clamped to 0.
LR_NEGATIVE_TOL = 1e-8
MIN_BOOTSTRAP = 19
BOOTSTRAP_REDRAW_SHARE = 0.1
DEFAULT_LEVELS = (0.10, 0.05, 0.01)


@dataclass(frozen=True)
class TestReport:
    """Likelihood ratio test outcome.

    Attributes:
        lr: Likelihood ratio statistic ``2 (l(theta_hat) - l(theta_tilde))``.
        lr_b: Bartlett-corrected statistic ``LR / c``.
        lr_b_star: ``LR exp(-B / q)``, never negative.
        lr_b_2star: ``LR (1 - B / q)``.
        df: Degrees of freedom, the number of restrictions.
        p_lr: Upper chi-square tail probability of ``lr``.
        p_lr_b: Same for ``lr_b``.
        p_lr_b_star: Same for ``lr_b_star``.
        p_lr_b_2star: Same for ``lr_b_2star``.
        bartlett: Correction term and factor.
        theta_hat: Unrestricted estimate.
        theta_tilde: Restricted estimate.
    """
    __test__ = False

    lr: float
    lr_b: float
    lr_b_star: float
    lr_b_2star: float
    df: int
    p_lr: float
    p_lr_b: float
    p_lr_b_star: float
    p_lr_b_2star: float
    bartlett: BartlettFactor
    theta_hat: Theta
    theta_tilde: Theta

    def statistics(self) -> Dict[Statistic, float]:
        return {
            Statistic.LR: self.lr,
            Statistic.LR_B: self.lr_b,
            Statistic.LR_B_STAR: self.lr_b_star,
            Statistic.LR_B_2STAR: self.lr_b_2star,
        }

    def p_values(self) -> Dict[Statistic, float]:
        return {
            Statistic.LR: self.p_lr,
            Statistic.LR_B: self.p_lr_b,
            Statistic.LR_B_STAR: self.p_lr_b_star,
            Statistic.LR_B_2STAR: self.p_lr_b_2star,
        }

    def to_dict(self) -> dict:
        result = {stat.value: value for stat, value in self.statistics().items()}
        result['df'] = self.df
        result['p_values'] = {stat.value: value for stat, value in self.p_values().items()}
        result['bartlett'] = self.bartlett.to_dict()
        result['theta_hat'] = self.theta_hat.to_dict()
        result['theta_tilde'] = self.theta_tilde.to_dict()
        return result


@dataclass(frozen=True)
class BootstrapReport:
    """Parametric bootstrap test outcome.

    Attributes:
        lr_observed: Likelihood ratio statistic of the observed sample.
        replicates: Bootstrap statistics, one per replicate.
        critical_values: Estimated ``1 - level`` quantiles of the statistic by nominal level.
        rejections: Whether ``lr_observed`` exceeds the critical value, by nominal level.
        p_value: ``(1 + #{replicates >= lr_observed}) / (B + 1)``.
        B: Number of bootstrap replicates.
        seed: Seed or key tuple of the bootstrap random streams.
        redraws: Number of pseudo-samples discarded because a fit failed.
    """
    lr_observed: float
    replicates: np.ndarray
    critical_values: Dict[float, float]
    rejections: Dict[float, bool]
    p_value: float
    B: int
    seed: SeedKey
    redraws: int = field(default=0)

    def to_dict(self) -> dict:
        return {
            'lr_observed': self.lr_observed,
            'p_value': self.p_value,
            'critical_values': {f'{level:g}': value for level, value in self.critical_values.items()},
            'rejections': {f'{level:g}': value for level, value in self.rejections.items()},
            'B': self.B,
            'seed': self.seed if isinstance(self.seed, int) else list(self.seed),
            'redraws': self.redraws,
        }


def _fit_pair(data: Dataset, h: HypothesisSpec, opts: FitOptions) -> Tuple[FitResult, FitResult, float]:
    """Fits the restricted and full models and returns them with the clamped statistic.

    Raises:
        ConvergenceError: If either fit does not converge or the statistic is
            negative beyond round-off.
    """
    restricted = fit_restricted(data, h, opts)

    if not restricted.converged:
        raise ConvergenceError(f'Restricted fit did not converge, gradient {restricted.grad_norm:.3g}')

    full = fit_full(data, opts)

    if not full.converged or full.loglik < restricted.loglik - LR_NEGATIVE_TOL:
        logger.debug('Restarting full fit from the restricted estimate')
        retry = fit_full(data, opts, start=restricted.theta_hat)

        if retry.converged and (not full.converged or retry.loglik > full.loglik):
            full = retry

    if not full.converged:
        raise ConvergenceError(f'Full fit did not converge, gradient {full.grad_norm:.3g}')

    lr = 2.0 * (full.loglik - restricted.loglik)

    if lr < -LR_NEGATIVE_TOL:
        raise ConvergenceError(f'Likelihood ratio statistic is negative: {lr:.3g}')

    return full, restricted, max(lr, 0.0)


def lr_test(data: Dataset, h: HypothesisSpec, opts: Optional[FitOptions] = None,
            evaluate_at: str = 'restricted') -> TestReport:
    """Likelihood ratio test with Bartlett-corrected statistics.

    Args:
        data: Regression input.
        h: Null hypothesis.
        opts: Optimizer settings, defaults if not set.
        evaluate_at: Estimate the Bartlett term is evaluated at, ``restricted``
            (default) or ``full``.

    Returns:
        ``TestReport`` instance.

    Raises:
        ConvergenceError: If a fit fails.
        BartlettFactorError: If the correction factor is not positive.
        HypothesisError: If the hypothesis is empty or does not fit the design.
    """
    if evaluate_at not in ('restricted', 'full'):
        raise ValueError(f'evaluate_at must be \'restricted\' or \'full\', got \'{evaluate_at}\'')

    opts = opts or FitOptions()
    h.check(data.p)
    q = h.q(data.p)

    if q < 1:
        raise HypothesisError('Null hypothesis imposes no restrictions')

    full, restricted, lr = _fit_pair(data, h, opts)
    alpha = restricted.theta_hat.alpha if evaluate_at == 'restricted' else full.theta_hat.alpha
    bartlett = bartlett_B(h, alpha, data.X)
    lr_b = bartlett.corrected(lr)
    lr_b_star = bartlett.star(lr)
    lr_b_2star = bartlett.two_star(lr)

    return TestReport(lr=lr, lr_b=lr_b, lr_b_star=lr_b_star, lr_b_2star=lr_b_2star, df=q,
                      p_lr=chisq_sf(lr, q), p_lr_b=chisq_sf(lr_b, q), p_lr_b_star=chisq_sf(lr_b_star, q),
                      p_lr_b_2star=chisq_sf(lr_b_2star, q), bartlett=bartlett,
                      theta_hat=full.theta_hat, theta_tilde=restricted.theta_hat)


def _bootstrap_replicate(index: int, data: Dataset, h: HypothesisSpec, theta: Theta, seed: SeedKey,
                         opts: FitOptions, max_attempts: int) -> Tuple[Optional[float], int]:
    """Computes one bootstrap statistic, redrawing the pseudo-sample when a fit fails.

    Attempt ``a`` of replicate ``b`` draws from the stream ``(seed, b, a)``.

    Returns:
        Tuple of the statistic (``None`` if every attempt failed) and the number of
        discarded pseudo-samples.
    """
    mean = data.X @ theta.beta
    params = SinhNormalParams(alpha=theta.alpha, mu=0.0, sigma=2.0)

    for attempt in range(max_attempts):
        rng = derive_stream(seed, index, attempt)
        sample = data.with_response(mean + sn_sample(params, data.n, rng))

        try:
            return _fit_pair(sample, h, opts)[2], attempt
        except (ConvergenceError, DegenerateDataError) as e:
            logger.debug('Bootstrap replicate %d attempt %d discarded: %s', index, attempt, e)

    return None, max_attempts


def bootstrap_critical_value(replicates: np.ndarray, level: float) -> float:
    """Order statistic ``q`` with ``#{replicates <= q} / B = 1 - level``, rounded up to the next replicate."""
    ordered = np.sort(replicates)
    rank = int(math.ceil((1.0 - level) * len(ordered) - 1e-9))
    return float(ordered[min(max(rank, 1), len(ordered)) - 1])


def bootstrap_test(data: Dataset, h: HypothesisSpec, B: int, seed: SeedKey, opts: Optional[FitOptions] = None,
                   levels: Sequence[float] = DEFAULT_LEVELS, observed: Optional[TestReport] = None,
                   workers: int = 1) -> BootstrapReport:
    """Parametric bootstrap likelihood ratio test.

    Pseudo-samples are drawn from the model at the restricted estimate of the
    observed sample; each gives a statistic by refitting both models. The test
    rejects at level ``gamma`` when the observed statistic exceeds the estimated
    ``1 - gamma`` quantile of the bootstrap statistics. Results depend only on
    ``(data, h, B, seed)``, not on ``workers``.

    Args:
        data: Regression input.
        h: Null hypothesis.
        B: Number of bootstrap replicates, at least 19.
        seed: Seed or key tuple of the bootstrap random streams.
        opts: Optimizer settings, defaults if not set.
        levels: Nominal levels for critical values.
        observed: Test report of ``data``, computed if not given.
        workers: Number of worker processes.

    Returns:
        ``BootstrapReport`` instance.

    Raises:
        BootstrapError: If more than 10% of the pseudo-samples had to be redrawn.
    """
    if B < MIN_BOOTSTRAP:
        raise DomainError(f'Bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {B}')

    for level in levels:
        if not 0.0 < level < 1.0:
            raise DomainError(f'Nominal levels must lie in (0, 1), got {level}')

    opts = opts or FitOptions()
    observed = observed or lr_test(data, h, opts)
    max_redraws = max(1, int(BOOTSTRAP_REDRAW_SHARE * B))
    task = partial(_bootstrap_replicate, data=data, h=h, theta=observed.theta_tilde, seed=seed, opts=opts,
                   max_attempts=max_redraws + 1)
    outcomes = parallel_map(task, range(B), workers=workers)

    redraws = sum(attempts for _, attempts in outcomes)

    if redraws > max_redraws or any(value is None for value, _ in outcomes):
        raise BootstrapError(f'Bootstrap needed {redraws} redraws for {B} replicates, '
                             f'more than the allowed {max_redraws} (seed {seed})')

    replicates = np.array([value for value, _ in outcomes])
    exceed = int(np.sum(replicates >= observed.lr))
    critical_values = {level: bootstrap_critical_value(replicates, level) for level in levels}
    rejections = {level: bool(observed.lr > value) for level, value in critical_values.items()}
    report = BootstrapReport(lr_observed=observed.lr, replicates=replicates, critical_values=critical_values,
                             rejections=rejections, p_value=(1.0 + exceed) / (B + 1.0), B=B, seed=seed,
                             redraws=redraws)
    logger.info('Bootstrap with %d replicates: p-value %.4g, %d redraws', B, report.p_value, redraws)
    return report
