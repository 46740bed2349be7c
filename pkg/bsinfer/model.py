"""The log-linear Birnbaum-Saunders regression model.

``y_i = x_i' beta + eps_i`` with ``eps_i ~ SN(alpha, 0, 2)``, where ``y_i`` is the
logarithm of the i-th lifetime. The module holds the regression input
(``Dataset``), the parameter point (``Theta``) and the likelihood machinery:
log-likelihood, analytic score, expected information and hat matrix functionals.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from bsinfer.basic_types import ArrayLike
from bsinfer.core import RankDeficiencyError
from bsinfer.specfun import psi_set
from bsinfer.utils import as_float_array

RANK_TOL = 1e-10
_LOG_8PI = np.log(8.0 * np.pi)
_LOG2 = np.log(2.0)


def check_full_rank(X: np.ndarray) -> None:
    """Checks that the design has full column rank.

    Rank is the number of diagonal entries of the column-pivoted QR factor whose
    magnitude exceeds ``RANK_TOL`` relative to the largest one.

    Raises:
        RankDeficiencyError: If the rank is smaller than the number of columns.
    """
    n, p = X.shape

    if p == 0:
        return

    if n < p:
        raise RankDeficiencyError(f'Design with {n} rows can not have full column rank {p}')

    r = linalg.qr(X, mode='r', pivoting=True)[0]
    diag = np.abs(np.diag(r))

    if diag[0] == 0:
        raise RankDeficiencyError('Design matrix is identically zero')

    rank = int(np.sum(diag > RANK_TOL * diag[0]))

    if rank < p:
        raise RankDeficiencyError(f'Design matrix has rank {rank} < {p} columns')


class Dataset:
    """Regression input: log-lifetimes and a full column rank design matrix.

    Arrays are copied and made read-only at construction, so a ``Dataset`` is
    immutable and can be shared between fits.

    Attributes:
        y: Response vector of length ``n``.
        X: Design matrix of shape ``(n, p)``.
        names: Coefficient names, one per design column.
    """
    def __init__(self, y: ArrayLike, X: ArrayLike, names: Optional[Sequence[str]] = None) -> None:
        X = as_float_array(X, 'X', ndim=2)
        y = as_float_array(y, 'y', ndim=1)
        n, p = X.shape

        if y.shape[0] != n:
            raise ValueError(f'Response has {y.shape[0]} values, design has {n} rows')

        if p < 1:
            raise ValueError('Design matrix must have at least one column')

        if n <= p:
            raise ValueError(f'Need more observations than coefficients, got n={n}, p={p}')

        check_full_rank(X)

        names = [f'x{j + 1}' for j in range(p)] if names is None else [str(name) for name in names]

        if len(names) != p or len(set(names)) != p:
            raise ValueError(f'Expected {p} distinct coefficient names, got {names}')

        y.flags.writeable = False
        X.flags.writeable = False
        self.y = y
        self.X = X
        self.names: Tuple[str, ...] = tuple(names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_response(self, y: ArrayLike) -> 'Dataset':
        """Returns a dataset with a new response and the same, already validated, design."""
        y = as_float_array(y, 'y', ndim=1)

        if y.shape[0] != self.n:
            raise ValueError(f'Response has {y.shape[0]} values, design has {self.n} rows')

        y.flags.writeable = False
        data = object.__new__(Dataset)
        data.y = y
        data.X = self.X
        data.names = self.names
        return data

    def __repr__(self) -> str:
        return f'Dataset(n={self.n}, p={self.p}, names={list(self.names)})'


@dataclass(frozen=True)
class Theta:
    """Parameter point ``(beta, alpha)`` of the regression model."""
    beta: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float).reshape(-1)

        if not np.all(np.isfinite(beta)):
            raise ValueError('beta contains non-finite values')

        if not self.alpha > 0 or not np.isfinite(self.alpha):
            raise ValueError(f'alpha must be positive and finite, got {self.alpha}')

        beta.flags.writeable = False
        object.__setattr__(self, 'beta', beta)
        object.__setattr__(self, 'alpha', float(self.alpha))

    @property
    def p(self) -> int:
        return self.beta.shape[0]

    def as_vector(self) -> np.ndarray:
        """Returns ``(beta_1, ..., beta_p, alpha)``."""
        return np.append(self.beta, self.alpha)

    def to_dict(self) -> dict:
        return {'beta': self.beta.tolist(), 'alpha': self.alpha}


class HatStats(NamedTuple):
    """Hat matrix functionals of a design.

    Attributes:
        trace_zd2: ``tr(Z_d^(2))``, the sum of squared leverages.
        leverages: Diagonal of the hat matrix ``Z = X (X'X)^-1 X'``.
    """
    trace_zd2: float
    leverages: np.ndarray


def _check_dims(theta: Theta, data: Dataset) -> None:
    if theta.p != data.p:
        raise ValueError(f'Parameter has {theta.p} coefficients, design has {data.p} columns')


def residuals(beta: np.ndarray, data: Dataset) -> np.ndarray:
    """Returns ``y - X beta``."""
    return data.y - data.X @ beta


def _log_cosh(u: np.ndarray) -> np.ndarray:
    u = np.abs(u)
    return u + np.log1p(np.exp(-2.0 * u)) - _LOG2


def xi_vectors(theta: Theta, data: Dataset) -> Tuple[np.ndarray, np.ndarray]:
    """Computes ``xi1 = (2/alpha) cosh(r/2)`` and ``xi2 = (2/alpha) sinh(r/2)`` for residuals ``r``.

    Args:
        theta: Parameter point.
        data: Regression input.

    Returns:
        Tuple of vectors ``(xi1, xi2)``, ``xi1^2 - xi2^2 = 4 / alpha^2``.
    """
    _check_dims(theta, data)
    half = 0.5 * residuals(theta.beta, data)
    scale = 2.0 / theta.alpha
    return scale * np.cosh(half), scale * np.sinh(half)


def loglik(theta: Theta, data: Dataset) -> float:
    """Log-likelihood ``-(n/2) log(8 pi) + sum(log xi1) - sum(xi2^2) / 2``.

    ``log xi1`` is evaluated in the log domain, so the value stays finite for
    residuals of any representable size.
    """
    _check_dims(theta, data)
    half = 0.5 * residuals(theta.beta, data)
    xi2 = (2.0 / theta.alpha) * np.sinh(half)
    log_xi1 = np.log(2.0 / theta.alpha) + _log_cosh(half)
    return float(-0.5 * data.n * _LOG_8PI + np.sum(log_xi1) - 0.5 * np.dot(xi2, xi2))


def score(theta: Theta, data: Dataset) -> np.ndarray:
    """Analytic score vector.

    The first ``p`` entries are ``X's / 2`` with ``s_i = xi_i1 xi_i2 - xi_i2 / xi_i1``,
    evaluated as ``(2 / alpha^2) sinh(r_i) - tanh(r_i / 2)``. The last entry is
    the shape score ``-n / alpha + sum(xi_i2^2) / alpha``.

    Args:
        theta: Parameter point.
        data: Regression input.

    Returns:
        Vector of length ``p + 1``.
    """
    _check_dims(theta, data)
    r = residuals(theta.beta, data)
    alpha = theta.alpha
    s = (2.0 / alpha ** 2) * np.sinh(r) - np.tanh(0.5 * r)
    xi2 = (2.0 / alpha) * np.sinh(0.5 * r)
    u_alpha = (-data.n + np.dot(xi2, xi2)) / alpha
    return np.append(0.5 * (data.X.T @ s), u_alpha)


def loglik_and_score(beta: np.ndarray, alpha: float, data: Dataset) -> Tuple[float, np.ndarray]:
    """Log-likelihood and score at raw ``(beta, alpha)`` values, shared residual pass.

    Used by the optimizer, which probes trial points that need not be valid
    ``Theta`` instances: a non-positive or overflowing point gives ``-inf``.

    Returns:
        Tuple ``(loglik, score)``, the score being of length ``p + 1``.
    """
    if not alpha > 0 or not np.isfinite(alpha):
        return -np.inf, np.full(data.p + 1, np.nan)

    with np.errstate(over='ignore', invalid='ignore'):
        r = residuals(beta, data)
        half = 0.5 * r
        xi2 = (2.0 / alpha) * np.sinh(half)
        sum_xi2 = np.dot(xi2, xi2)
        value = -0.5 * data.n * _LOG_8PI + data.n * np.log(2.0 / alpha) + np.sum(_log_cosh(half)) - 0.5 * sum_xi2
        s = (2.0 / alpha ** 2) * np.sinh(r) - np.tanh(half)
        grad = np.append(0.5 * (data.X.T @ s), (sum_xi2 - data.n) / alpha)

    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return -np.inf, grad

    return float(value), grad


def fisher_info(theta: Theta, data: Dataset) -> np.ndarray:
    """Expected information, block diagonal ``diag{psi1(alpha) X'X / 4, 2n / alpha^2}``."""
    _check_dims(theta, data)
    p = data.p
    info = np.zeros((p + 1, p + 1))
    info[:p, :p] = 0.25 * psi_set(theta.alpha).psi1 * (data.X.T @ data.X)
    info[p, p] = 2.0 * data.n / theta.alpha ** 2
    return info


def alpha_hat(beta: np.ndarray, data: Dataset) -> float:
    """Shape maximizing the likelihood for fixed ``beta``: ``sqrt((4/n) sum(sinh^2(r_i / 2)))``."""
    half = 0.5 * residuals(beta, data)
    return float(np.sqrt(4.0 * np.mean(np.sinh(half) ** 2)))


def hat_stats(X: ArrayLike) -> HatStats:
    """Leverages and ``tr(Z_d^(2))`` from the thin orthogonal factor of the design.

    Raises:
        RankDeficiencyError: If ``X`` is not of full column rank.
    """
    X = as_float_array(X, 'X', ndim=2)
    check_full_rank(X)

    if X.shape[1] == 0:
        return HatStats(trace_zd2=0.0, leverages=np.zeros(X.shape[0]))

    q = np.linalg.qr(X, mode='reduced')[0]
    leverages = np.einsum('ij,ij->i', q, q)
    return HatStats(trace_zd2=float(np.dot(leverages, leverages)), leverages=leverages)
