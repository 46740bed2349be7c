"""Birnbaum-Saunders and sinh-normal distribution primitives.

If ``T ~ BS(alpha, eta)`` then ``y = log(T)`` follows the sinh-normal law
``SN(alpha, log(eta), 2)``. Functions accept scalars or ``numpy`` arrays and
return values of the same shape, scalars being returned as ``float``.
"""

from typing import Union

import numpy as np
from pydantic import BaseModel, validator
from scipy import special

from bsinfer.core import DomainError

_SQRT_2PI = np.sqrt(2.0 * np.pi)
_MIN_SURVIVAL = 1e-300

RealOrArray = Union[float, np.ndarray]


class BSParams(BaseModel):
    """Birnbaum-Saunders distribution parameters.

    Attributes:
        alpha: Shape parameter.
        eta: Scale parameter, equal to the median of the distribution.
    """
    alpha: float
    eta: float

    class Config:
        allow_mutation = False

    @validator('alpha', 'eta')
    def positive(cls, value: float, field) -> float:
        if not value > 0 or not np.isfinite(value):
            raise ValueError(f'{field.name} must be positive and finite, got {value}')

        return value


class SinhNormalParams(BaseModel):
    """Sinh-normal distribution parameters.

    Attributes:
        alpha: Shape parameter.
        mu: Location parameter, the center of symmetry.
        sigma: Scale parameter, equal to 2 in the regression model.
    """
    alpha: float
    mu: float = 0.0
    sigma: float = 2.0

    class Config:
        allow_mutation = False

    @validator('alpha', 'sigma')
    def positive(cls, value: float, field) -> float:
        if not value > 0 or not np.isfinite(value):
            raise ValueError(f'{field.name} must be positive and finite, got {value}')

        return value

    @validator('mu')
    def finite(cls, value: float) -> float:
        if not np.isfinite(value):
            raise ValueError(f'mu must be finite, got {value}')

        return value


def _unwrap(value: np.ndarray) -> RealOrArray:
    return float(value) if value.ndim == 0 else value


def _positive_times(t: RealOrArray) -> np.ndarray:
    t = np.asarray(t, dtype=float)

    if np.any(~(t > 0)):
        raise DomainError('Birnbaum-Saunders functions are defined for t > 0 only')

    return t


def _standardized(t: np.ndarray, params: BSParams) -> np.ndarray:
    ratio = np.sqrt(t / params.eta)
    return (ratio - 1.0 / ratio) / params.alpha


def bs_cdf(t: RealOrArray, params: BSParams) -> RealOrArray:
    """Birnbaum-Saunders distribution function ``Phi[(sqrt(t/eta) - sqrt(eta/t)) / alpha]``."""
    t = _positive_times(t)
    return _unwrap(special.ndtr(_standardized(t, params)))


def bs_pdf(t: RealOrArray, params: BSParams) -> RealOrArray:
    """Birnbaum-Saunders density function.

    Args:
        t: Positive lifetimes.
        params: Distribution parameters.

    Returns:
        ``phi(a_t) * (t^(-3/2) * (t + eta)) / (2 * alpha * sqrt(eta))`` with
        ``a_t`` the standardized argument of ``bs_cdf``.
    """
    t = _positive_times(t)
    a_t = _standardized(t, params)
    jacobian = (t + params.eta) / (2.0 * params.alpha * np.sqrt(params.eta) * t ** 1.5)
    return _unwrap(np.exp(-0.5 * a_t * a_t) / _SQRT_2PI * jacobian)


def bs_hazard(t: RealOrArray, params: BSParams) -> RealOrArray:
    """Birnbaum-Saunders hazard function ``f(t) / (1 - F(t))``.

    The survival function is evaluated as ``Phi(-a_t)`` so that the ratio keeps
    full precision in the upper tail.

    Raises:
        DomainError: If the survival function falls below ``1e-300`` at some ``t``.
    """
    t = _positive_times(t)
    survival = special.ndtr(-_standardized(t, params))

    if np.any(survival < _MIN_SURVIVAL):
        raise DomainError('Birnbaum-Saunders survival function underflows, hazard is not representable')

    return _unwrap(np.asarray(bs_pdf(t, params)) / survival)


def bs_mean(params: BSParams) -> float:
    """Mean ``eta * (1 + alpha^2 / 2)`` of the Birnbaum-Saunders distribution."""
    return params.eta * (1.0 + 0.5 * params.alpha ** 2)


def bs_variance(params: BSParams) -> float:
    """Variance ``(alpha * eta)^2 * (1 + 5 * alpha^2 / 4)`` of the Birnbaum-Saunders distribution."""
    return (params.alpha * params.eta) ** 2 * (1.0 + 1.25 * params.alpha ** 2)


def sn_pdf(y: RealOrArray, params: SinhNormalParams) -> RealOrArray:
    """Sinh-normal density function.

    ``f(y) = 2 / (alpha * sigma * sqrt(2 pi)) * cosh(u) * exp(-(2 / alpha^2) * sinh(u)^2)``
    with ``u = (y - mu) / sigma``. With ``sigma = 2`` its logarithm equals the
    per-observation term of the regression log-likelihood.
    """
    u = (np.asarray(y, dtype=float) - params.mu) / params.sigma
    xi2 = (2.0 / params.alpha) * np.sinh(u)
    # log-domain evaluation, cosh(u) * exp(-xi2^2 / 2) underflows to 0 instead of inf * 0
    log_cosh = np.logaddexp(u, -u) - np.log(2.0)
    log_density = np.log(2.0 / (params.alpha * params.sigma * _SQRT_2PI)) + log_cosh - 0.5 * xi2 * xi2
    return _unwrap(np.exp(log_density))


def sn_sample(params: SinhNormalParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draws sinh-normal variates by the exact inverse transform.

    ``Z = (2 / alpha) * sinh((y - mu) / sigma)`` is standard normal, hence
    ``y = mu + sigma * arcsinh(alpha * Z / 2)``.

    Args:
        params: Distribution parameters.
        count: Number of draws.
        rng: Random stream, consumed by ``count`` standard normal draws.

    Returns:
        Vector of ``count`` draws.
    """
    if count < 1:
        raise DomainError(f'Sample size must be positive, got {count}')

    z = rng.standard_normal(count)
    return params.mu + params.sigma * np.arcsinh(0.5 * params.alpha * z)
