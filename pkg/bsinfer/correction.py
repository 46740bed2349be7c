"""Bartlett correction of the likelihood ratio statistic.

Under the null hypothesis ``E(LR) = q + B(theta) + O(n^-2)``, where
``B = eps_k - eps_(k-q)`` is the difference of the order ``1/n`` terms of the
expected log-likelihood ratio computed over all ``k = p + 1`` parameters and over
the nuisance parameters only. For the Birnbaum-Saunders regression the full term
has the closed form::

    eps(alpha, p, X) = {1/3 + delta1(alpha) p + delta2(alpha) p^2} / n + delta3(alpha) tr(Z_d^(2))

with ``Z`` the hat matrix of ``X``. The correction factor is ``c = 1 + B / q``.

Besides the closed forms the module contains ``lawley_epsilon_oracle``, which
builds the same quantity by direct summation of the cumulant expansion and is
used to verify them.
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, PositiveFloat, conint, validator

from bsinfer.basic_types import ArrayLike
from bsinfer.core import BartlettFactorError, DomainError, HypothesisError
from bsinfer.model import check_full_rank, hat_stats
from bsinfer.specfun import delta_set, psi_set
from bsinfer.utils import as_float_array


class HypothesisBase(BaseModel):
    """Base model for null hypotheses.

    Attributes:
        kind: Str hypothesis class identifier, its constant default value must be
            set in subclasses. Used to tell the classes apart when hypotheses are
            parsed from JSON or YAML dicts.
    """
    kind: str

    class Config:
        allow_mutation = False
        extra = 'forbid'

    @validator('kind')
    def match_kind(cls, v: str) -> str:
        """Validates hypothesis class identifier.

        Args:
            v: Str ``kind`` field value.

        Returns:
            Unchanged str ``kind`` field value.
        """
        kind = cls.__fields__['kind'].default

        if v != kind:
            raise ValueError(f'Not valid hypothesis kind \'{v}\', should be \'{kind}\'')

        return v

    def q(self, p: int) -> int:
        """Returns the number of restrictions imposed on a model with ``p`` coefficients."""
        raise NotImplementedError

    def check(self, p: int) -> None:
        """Checks consistency with a model with ``p`` coefficients.

        Raises:
            HypothesisError: If the hypothesis does not fit the model dimensions.
        """
        raise NotImplementedError

    def describe(self, names: Sequence[str]) -> str:
        """Human readable form of the hypothesis, coefficients named by ``names``."""
        raise NotImplementedError


class AlphaFixed(HypothesisBase):
    """``H0: alpha = alpha0``, the coefficients are nuisance parameters.

    Attributes:
        alpha0: Shape value under the null hypothesis.
    """
    kind: str = Field(default='alpha', const=True)
    alpha0: PositiveFloat

    def q(self, p: int) -> int:
        return 1

    def check(self, p: int) -> None:
        pass

    def describe(self, names: Sequence[str]) -> str:
        return f'alpha = {self.alpha0:g}'


class BetaSubset(HypothesisBase):
    """``H0: beta_j = value_j`` for ``j`` in a subset of coefficient positions.

    The remaining coefficients and the shape are nuisance parameters. Any set of
    positions is allowed, not only trailing ones.

    Attributes:
        indices: Distinct 0-based positions of the restricted coefficients.
        values: Restricted values in the order of ``indices``, zeros by default.
    """
    kind: str = Field(default='beta_subset', const=True)
    indices: List[conint(ge=0)]
    values: Optional[List[float]] = None

    @validator('indices')
    def distinct_indices(cls, v: List[int]) -> List[int]:
        if len(set(v)) != len(v):
            raise ValueError(f'Restricted coefficient positions must be distinct, got {v}')

        return v

    @validator('values', always=True)
    def match_values(cls, v: Optional[List[float]], values: dict) -> List[float]:
        indices = values.get('indices')

        if indices is None:
            return v

        if v is None:
            return [0.0] * len(indices)

        if len(v) != len(indices):
            raise ValueError(f'Got {len(v)} restricted values for {len(indices)} positions')

        return v

    def q(self, p: int) -> int:
        return len(self.indices)

    def check(self, p: int) -> None:
        out_of_range = [j for j in self.indices if j >= p]

        if out_of_range:
            raise HypothesisError(f'Restricted positions {out_of_range} out of range for {p} coefficients')

    def describe(self, names: Sequence[str]) -> str:
        return ', '.join(f'{names[j]} = {v:g}' for j, v in zip(self.indices, self.values))


class BetaFull(HypothesisBase):
    """``H0: beta = values``, the shape is the only nuisance parameter.

    Attributes:
        values: Values of all coefficients under the null hypothesis.
    """
    kind: str = Field(default='beta_full', const=True)
    values: List[float]

    def q(self, p: int) -> int:
        return p

    def check(self, p: int) -> None:
        if len(self.values) != p:
            raise HypothesisError(f'Got {len(self.values)} values for {p} coefficients')

    def describe(self, names: Sequence[str]) -> str:
        return ', '.join(f'{name} = {v:g}' for name, v in zip(names, self.values))


HypothesisSpec = Union[AlphaFixed, BetaSubset, BetaFull]


@dataclass(frozen=True)
class BartlettFactor:
    """Bartlett correction term and factor.

    Attributes:
        B: Order ``1/n`` term of the null expectation of the statistic.
        q: Number of restrictions.
        alpha: Shape value the term was evaluated at.
        n: Number of observations of the design.
        p: Number of columns of the design.
    """
    B: float
    q: int
    alpha: float
    n: int
    p: int

    @property
    def c(self) -> float:
        """Correction factor ``1 + B / q``."""
        return 1.0 + self.B / self.q

    def corrected(self, lr: float) -> float:
        """Returns ``LR_b = LR / c``.

        Raises:
            BartlettFactorError: If ``c <= 0``.
        """
        if not self.c > 0:
            raise BartlettFactorError(f'Bartlett factor c = {self.c:.6g} is not positive '
                                      f'(alpha = {self.alpha:.6g}, design {self.n}x{self.p})')

        return lr / self.c

    def star(self, lr: float) -> float:
        """Returns ``LR_b* = LR exp(-B / q)``, never negative."""
        return lr * np.exp(-self.B / self.q)

    def two_star(self, lr: float) -> float:
        """Returns ``LR_b** = LR (1 - B / q)``."""
        return lr * (1.0 - self.B / self.q)

    def to_dict(self) -> dict:
        return {'B': self.B, 'c': self.c, 'q': self.q}


def epsilon_alpha(alpha: float, p: int, n: int) -> float:
    """Contribution ``{1/3 + delta1 p + delta2 p^2} / n`` of the unknown shape."""
    delta = delta_set(alpha)
    return (1.0 / 3.0 + delta.delta1 * p + delta.delta2 * p * p) / n


def epsilon_beta(alpha: float, X: ArrayLike) -> float:
    """Term ``delta3 tr(Z_d^(2))``, the value of the expansion with the shape known."""
    return delta_set(alpha).delta3 * hat_stats(X).trace_zd2


def epsilon_general(alpha: float, X: ArrayLike) -> float:
    """Order ``1/n`` term of ``2 E[l(theta_hat) - l(theta)]`` for the full parameter vector.

    It depends on the design only through its dimensions and the squared
    leverages, and does not depend on the coefficients.

    Args:
        alpha: Positive shape value.
        X: Full column rank design matrix.

    Returns:
        ``epsilon_alpha(alpha, p, n) + epsilon_beta(alpha, X)``.
    """
    X = as_float_array(X, 'X', ndim=2)
    n, p = X.shape
    return epsilon_alpha(alpha, p, n) + epsilon_beta(alpha, X)


def bartlett_B(h: HypothesisSpec, alpha: float, X: ArrayLike) -> BartlettFactor:
    """Computes the Bartlett term for a null hypothesis.

    Args:
        h: Null hypothesis.
        alpha: Shape value, usually the restricted estimate.
        X: Full column rank design matrix.

    Returns:
        ``BartlettFactor`` instance.

    Raises:
        HypothesisError: If the hypothesis is empty or inconsistent with ``X``.
        RankDeficiencyError: If ``X`` is not of full column rank.
    """
    X = as_float_array(X, 'X', ndim=2)
    n, p = X.shape
    h.check(p)
    q = h.q(p)

    if q < 1:
        raise HypothesisError('Null hypothesis imposes no restrictions')

    delta = delta_set(alpha)

    if isinstance(h, AlphaFixed):
        check_full_rank(X)
        B = epsilon_alpha(alpha, p, n)
    elif isinstance(h, BetaSubset):
        remaining = np.delete(X, h.indices, axis=1)
        trace_diff = hat_stats(X).trace_zd2 - hat_stats(remaining).trace_zd2
        B = (delta.delta1 * q + delta.delta2 * q * (2 * p - q)) / n + delta.delta3 * trace_diff
    elif isinstance(h, BetaFull):
        B = (delta.delta1 * p + delta.delta2 * p * p) / n + delta.delta3 * hat_stats(X).trace_zd2
    else:
        raise HypothesisError(f'Unknown hypothesis type: {type(h).__name__}')

    return BartlettFactor(B=float(B), q=q, alpha=float(alpha), n=n, p=p)


def _cumulants(alpha: float, xtx: np.ndarray, x4: np.ndarray, n: int):
    """Joint cumulants of log-likelihood derivatives of orders 2, 3 and 4.

    The last parameter position is the shape. Entries mixing an odd number of
    shape indices with coefficient indices vanish, as do third order cumulants
    of coefficients only.
    """
    p = xtx.shape[0]
    k = p + 1
    a = p
    psi = psi_set(alpha)

    k2 = np.zeros((k, k))
    k2[:p, :p] = -0.25 * psi.psi1 * xtx
    k2[a, a] = -2.0 * n / alpha ** 2

    k3 = np.zeros((k, k, k))
    mixed3 = (2.0 + alpha ** 2) / alpha ** 3 * xtx
    k3[:p, :p, a] = mixed3
    k3[:p, a, :p] = mixed3
    k3[a, :p, :p] = mixed3
    k3[a, a, a] = 10.0 * n / alpha ** 3

    k4 = np.zeros((k, k, k, k))
    k4[:p, :p, :p, :p] = psi.psi2 * x4
    mixed4 = -3.0 * (2.0 + alpha ** 2) / alpha ** 4 * xtx
    k4[:p, :p, a, a] = mixed4
    k4[:p, a, :p, a] = mixed4
    k4[:p, a, a, :p] = mixed4
    k4[a, :p, :p, a] = mixed4
    k4[a, :p, a, :p] = mixed4
    k4[a, a, :p, :p] = mixed4
    k4[a, a, a, a] = -54.0 * n / alpha ** 4

    return k2, k3, k4


def _first_derivative(func, x: float, h: float) -> np.ndarray:
    def central(step: float) -> np.ndarray:
        return (func(x + step) - func(x - step)) / (2.0 * step)

    return (4.0 * central(0.5 * h) - central(h)) / 3.0


def _second_derivative(func, x: float, h: float) -> np.ndarray:
    f0 = func(x)

    def central(step: float) -> np.ndarray:
        return (func(x + step) - 2.0 * f0 + func(x - step)) / (step * step)

    return (4.0 * central(0.5 * h) - central(h)) / 3.0


def lawley_epsilon_oracle(alpha: float, X: ArrayLike, indices: Optional[Iterable[int]] = None,
                          max_dim: int = 5) -> float:
    """Order ``1/n`` term of the expected log-likelihood ratio by direct cumulant summation.

    Sums ``lambda_rstu - lambda_rstuvw`` over every index combination of the
    selected parameters, using the cumulants of the model and their shape
    derivatives (coefficient derivatives vanish since no cumulant depends on the
    coefficients). Shape derivatives are Richardson-extrapolated central
    differences, so the result does not rely on the ``delta`` functions.

    Args:
        alpha: Positive shape value.
        X: Full column rank design matrix.
        indices: Parameter positions to sum over, ``0..p-1`` for coefficients and
            ``p`` for the shape. All ``p + 1`` positions by default. A subset gives
            the term of the model where the other parameters are known, the inverse
            information being taken from the corresponding sub-block.
        max_dim: Largest allowed number of parameters ``p + 1``. Cost grows as
            its sixth power.

    Returns:
        Value of the expansion term.
    """
    X = as_float_array(X, 'X', ndim=2)
    check_full_rank(X)
    n, p = X.shape
    k = p + 1

    if k > max_dim:
        raise DomainError(f'Direct summation is limited to {max_dim} parameters, got {k}')

    if not alpha > 0:
        raise DomainError(f'Shape parameter must be positive, got {alpha}')

    selected = sorted(set(range(k) if indices is None else indices))

    if not selected or selected[0] < 0 or selected[-1] >= k:
        raise DomainError(f'Parameter positions must be a non-empty subset of 0..{p}, got {selected}')

    xtx = X.T @ X
    x4 = np.einsum('ir,is,it,iu->rstu', X, X, X, X)

    k2, k3, k4 = _cumulants(alpha, xtx, x4, n)
    k_inv = np.zeros((k, k))
    block = np.ix_(selected, selected)
    k_inv[block] = np.linalg.inv(k2[block])

    h1 = 1e-4 * max(1.0, alpha)
    h2 = 1e-3 * max(1.0, alpha)
    h1, h2 = min(h1, 0.25 * alpha), min(h2, 0.25 * alpha)

    def k2_of(a: float) -> np.ndarray:
        return _cumulants(a, xtx, x4, n)[0]

    def k3_of(a: float) -> np.ndarray:
        return _cumulants(a, xtx, x4, n)[1]

    # d2[r, s, t] = d k_rs / d theta_t, d3[r, s, t, u] = d k_rst / d theta_u,
    # dd2[r, s, t, u] = d2 k_rs / d theta_t d theta_u; non-zero in shape slots only
    d2 = np.zeros((k, k, k))
    d2[:, :, p] = _first_derivative(k2_of, alpha, h1)
    d3 = np.zeros((k, k, k, k))
    d3[:, :, :, p] = _first_derivative(k3_of, alpha, h1)
    dd2 = np.zeros((k, k, k, k))
    dd2[:, :, p, p] = _second_derivative(k2_of, alpha, h2)

    def total(spec: str, *operands: np.ndarray) -> float:
        return float(np.einsum(spec, *operands, optimize=True))

    lambda4 = (total('rs,tu,rstu', k_inv, k_inv, k4) / 4.0
               - total('rs,tu,rstu', k_inv, k_inv, d3)
               + total('rs,tu,rtsu', k_inv, k_inv, dd2))

    triple = (k_inv, k_inv, k_inv)
    lambda6 = (total('rs,tu,vw,rtv,suw', *triple, k3, k3) / 6.0
               - total('rs,tu,vw,rtv,swu', *triple, k3, d2)
               + total('rs,tu,vw,rtu,svw', *triple, k3, k3) / 4.0
               - total('rs,tu,vw,rtu,swv', *triple, k3, d2)
               + total('rs,tu,vw,rtv,swu', *triple, d2, d2)
               + total('rs,tu,vw,rtu,swv', *triple, d2, d2))

    return lambda4 - lambda6
