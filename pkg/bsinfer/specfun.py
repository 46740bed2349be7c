"""Special functions and the shape-dependent coefficient functions of the model.

The coefficient functions ``psi0..psi3`` and ``delta0..delta3`` depend on the
shape parameter only. ``psi0`` is evaluated as the scaled complementary error
function ``erfcx(sqrt(2)/alpha)``: the equivalent product
``{1 - erf(sqrt(2)/alpha)} * exp(2/alpha^2)`` overflows in double precision for
alpha below about 0.17.
"""

import math
from typing import NamedTuple, Tuple

from scipy import special

from bsinfer.core import DomainError

_SQRT2 = math.sqrt(2.0)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT_PI_2 = math.sqrt(math.pi / 2.0)


class PsiSet(NamedTuple):
    """Values of the four ``psi`` coefficient functions at a given shape."""
    psi0: float
    psi1: float
    psi2: float
    psi3: float


class DeltaSet(NamedTuple):
    """Values of the four ``delta`` coefficient functions at a given shape.

    ``delta1``, ``delta2`` and ``delta3`` are the coefficients of ``p``, ``p^2``
    and ``tr(Z_d^(2))`` in the Bartlett term; ``delta2 = 2 * delta0^2``.
    """
    delta0: float
    delta1: float
    delta2: float
    delta3: float


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)

    if not alpha > 0 or not math.isfinite(alpha):
        raise DomainError(f'Shape parameter must be positive and finite, got {alpha}')

    return alpha


def erf_family(x: float) -> Tuple[float, float, float]:
    """Error function, its complement and the scaled complement.

    Args:
        x: Finite real argument.

    Returns:
        Tuple ``(erf(x), erfc(x), erfcx(x))`` with ``erfcx(x) = exp(x^2) * erfc(x)``,
        evaluated without overflow for large ``x``.
    """
    x = float(x)

    if not math.isfinite(x):
        raise DomainError(f'erf_family needs a finite argument, got {x}')

    return float(special.erf(x)), float(special.erfc(x)), float(special.erfcx(x))


def psi_set(alpha: float) -> PsiSet:
    """Evaluates ``psi0..psi3`` at the given shape.

    ``psi1`` scales the information on the regression coefficients
    (``K(beta) = psi1 * X'X / 4``), ``psi2`` enters the fourth order cumulants
    and ``psi3 = -psi1' / 4``.

    Args:
        alpha: Positive shape parameter.

    Returns:
        ``PsiSet`` instance.
    """
    alpha = _check_alpha(alpha)
    a2 = alpha * alpha
    a3 = a2 * alpha
    psi0 = float(special.erfcx(_SQRT2 / alpha))
    psi1 = 2.0 + 4.0 / a2 - (_SQRT_2PI / alpha) * psi0
    psi2 = -0.25 * (2.0 + 7.0 / a2 - _SQRT_PI_2 * (0.5 / alpha + 6.0 / a3) * psi0)
    psi3 = 3.0 / a3 - (_SQRT_2PI / (4.0 * a2)) * (1.0 + 4.0 / a2) * psi0
    return PsiSet(psi0=psi0, psi1=psi1, psi2=psi2, psi3=psi3)


def delta_set(alpha: float) -> DeltaSet:
    """Evaluates ``delta0..delta3`` at the given shape.

    Args:
        alpha: Positive shape parameter.

    Returns:
        ``DeltaSet`` instance.
    """
    alpha = _check_alpha(alpha)
    psi = psi_set(alpha)
    a2 = alpha * alpha
    delta0 = (2.0 + a2) / (psi.psi1 * a2)
    delta1 = 4.0 * delta0 * (2.0 / (2.0 + a2) + delta0 - 2.0 * alpha * psi.psi3 / psi.psi1)
    delta2 = 2.0 * delta0 * delta0
    delta3 = 4.0 * psi.psi2 / (psi.psi1 * psi.psi1)
    return DeltaSet(delta0=delta0, delta1=delta1, delta2=delta2, delta3=delta3)


def normal_cdf(x: float) -> float:
    """Standard normal distribution function."""
    return float(special.ndtr(x))


def normal_quantile(p: float) -> float:
    """Standard normal quantile function, defined on the open interval (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f'Normal quantile needs 0 < p < 1, got {p}')

    return float(special.ndtri(p))


def _check_df(df: float) -> float:
    df = float(df)

    if not df >= 1 or not math.isfinite(df):
        raise DomainError(f'Degrees of freedom must be at least 1, got {df}')

    return df


def chisq_cdf(x: float, df: float) -> float:
    """Chi-square distribution function via the regularized lower incomplete gamma.

    Args:
        x: Non-negative argument.
        df: Degrees of freedom, at least 1.

    Returns:
        ``P(chi2_df <= x)``.
    """
    df = _check_df(df)

    if not x >= 0:
        raise DomainError(f'Chi-square distribution function needs x >= 0, got {x}')

    return float(special.gammainc(df / 2.0, x / 2.0))


def chisq_sf(x: float, df: float) -> float:
    """Upper tail ``P(chi2_df > x)``, accurate where the distribution function is close to 1.

    Negative arguments are allowed and give 1, so that p-values of statistics
    that can go negative (``LR_b**``) are well defined.
    """
    df = _check_df(df)

    if x <= 0:
        return 1.0

    return float(special.gammaincc(df / 2.0, x / 2.0))


def chisq_quantile(p: float, df: float) -> float:
    """Chi-square quantile, the exact inverse of ``chisq_cdf``.

    Args:
        p: Probability in ``[0, 1)``.
        df: Degrees of freedom, at least 1.

    Returns:
        ``x`` such that ``chisq_cdf(x, df) = p``.
    """
    df = _check_df(df)

    if not 0.0 <= p < 1.0:
        raise DomainError(f'Chi-square quantile needs 0 <= p < 1, got {p}')

    if p == 0.0:
        return 0.0

    return 2.0 * float(special.gammaincinv(df / 2.0, p))


def student_t_cdf(x: float, df: float) -> float:
    """Student t distribution function (regularized incomplete beta based).

    Args:
        x: Real argument.
        df: Degrees of freedom, at least 1.

    Returns:
        ``P(t_df <= x)``.
    """
    df = _check_df(df)
    return float(special.stdtr(df, x))
