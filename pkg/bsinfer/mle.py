"""Full and restricted maximum likelihood estimation.

The likelihood is maximized by a BFGS quasi-Newton scheme with analytic
gradients and a backtracking Armijo line search. The shape enters the
optimizer as ``log(alpha)``, so iterates can never leave the parameter space.
The inverse expected information at the starting point is the initial inverse
Hessian approximation, which makes the first step a scoring step.
"""

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import PositiveFloat, PositiveInt, confloat
from scipy import linalg

from bsinfer.core import ConfigModelBase, ConvergenceError, DegenerateDataError, HypothesisError
from bsinfer.correction import AlphaFixed, BetaFull, BetaSubset, HypothesisSpec
from bsinfer.model import Dataset, Theta, alpha_hat, loglik, loglik_and_score, score
from bsinfer.specfun import psi_set

logger = logging.getLogger(__name__)

ALPHA_FLOOR = 1e-8
ARMIJO_C1 = 1e-4
# Relaxed gradient threshold accepted when the line search stalls at round-off level.
STALL_FACTOR = 100.0
_MAX_BACKTRACKS = 60

_Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class FitOptions(ConfigModelBase):
    """Likelihood maximization settings.

    Attributes:
        grad_tol: Convergence threshold: the fit stops when the largest absolute
            gradient entry is below ``grad_tol * max(1, |loglik|)``.
        max_iter: Maximal number of BFGS iterations.
        ls_shrink: Step length reduction factor of the backtracking line search.
    """
    grad_tol: PositiveFloat = 1e-8
    max_iter: PositiveInt = 200
    ls_shrink: confloat(gt=0, lt=1) = 0.5


@dataclass(frozen=True)
class FitResult:
    """Outcome of a likelihood maximization.

    Attributes:
        theta_hat: Estimated parameter point, restricted components included.
        loglik: Log-likelihood at ``theta_hat``.
        converged: Whether the gradient threshold ``tolerance`` was reached.
        iterations: Number of accepted BFGS steps.
        grad_norm: Largest absolute gradient entry over the free parameters,
            with the shape measured on the log scale.
        tolerance: Gradient threshold the convergence flag refers to.
        std_errors: Standard errors of ``(beta, alpha)`` from the inverse expected
            information, zero for components fixed by a hypothesis.
    """
    theta_hat: Theta
    loglik: float
    converged: bool
    iterations: int
    grad_norm: float
    tolerance: float
    std_errors: np.ndarray

    def to_dict(self) -> dict:
        return {
            'beta': self.theta_hat.beta.tolist(),
            'alpha': self.theta_hat.alpha,
            'std_errors': self.std_errors.tolist(),
            'loglik': self.loglik,
            'converged': self.converged,
            'iterations': self.iterations,
            'grad_norm': self.grad_norm,
        }


class _Outcome(NamedTuple):
    z: np.ndarray
    value: float
    grad: np.ndarray
    iterations: int
    converged: bool
    tolerance: float


def _line_search(objective: _Objective, z: np.ndarray, value: float, direction: np.ndarray,
                 slope: float, shrink: float) -> Optional[Tuple[np.ndarray, float, np.ndarray]]:
    step = 1.0

    for _ in range(_MAX_BACKTRACKS):
        trial = z + step * direction
        trial_value, trial_grad = objective(trial)

        if np.isfinite(trial_value) and trial_value <= value + ARMIJO_C1 * step * slope:
            return trial, trial_value, trial_grad

        step *= shrink

    return None


def _minimize(objective: _Objective, z0: np.ndarray, h0: np.ndarray, opts: FitOptions) -> _Outcome:
    """Minimizes ``objective`` by BFGS with Armijo backtracking.

    The inverse Hessian update is skipped when the curvature condition fails and
    reset to ``h0`` when it stops producing descent directions. A stalled line
    search resets the approximation once; a second stall ends the run, which
    counts as converged when the gradient is below ``STALL_FACTOR`` times the
    threshold.
    """
    z = z0.copy()
    value, grad = objective(z)

    if not np.isfinite(value):
        raise ConvergenceError('Objective is not finite at the starting point')

    h = h0.copy()
    fresh = True
    iterations = 0

    while True:
        tolerance = opts.grad_tol * max(1.0, abs(value))
        grad_norm = float(np.max(np.abs(grad)))

        if grad_norm < tolerance:
            return _Outcome(z, value, grad, iterations, True, tolerance)

        if iterations >= opts.max_iter:
            return _Outcome(z, value, grad, iterations, False, tolerance)

        direction = -h @ grad
        slope = float(grad @ direction)

        if not slope < 0:
            h = h0.copy()
            fresh = True
            direction = -h @ grad
            slope = float(grad @ direction)

        step = _line_search(objective, z, value, direction, slope, opts.ls_shrink)

        if step is None:
            if not fresh:
                h = h0.copy()
                fresh = True
                continue

            relaxed = STALL_FACTOR * tolerance
            return _Outcome(z, value, grad, iterations, grad_norm < relaxed, relaxed)

        z_new, value_new, grad_new = step
        s = z_new - z
        y = grad_new - grad
        sy = float(s @ y)

        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            left = np.eye(len(z)) - rho * np.outer(s, y)
            h = left @ h @ left.T + rho * np.outer(s, s)

        z, value, grad = z_new, value_new, grad_new
        fresh = False
        iterations += 1


def _beta_info_inverse(alpha: float, X: np.ndarray) -> np.ndarray:
    """Inverse of the coefficient block ``psi1(alpha) X'X / 4`` of the expected information."""
    info = 0.25 * psi_set(alpha).psi1 * (X.T @ X)
    return linalg.cho_solve(linalg.cho_factor(info), np.eye(X.shape[1]))


def _std_errors(theta: Theta, data: Dataset, fixed: Tuple[int, ...] = (), alpha_fixed: bool = False) -> np.ndarray:
    """Standard errors from the inverse expected information of the free parameters.

    The information is block diagonal, so the coefficient and shape blocks are
    inverted separately.
    """
    p = data.p
    errors = np.zeros(p + 1)
    free = [j for j in range(p) if j not in fixed]

    if free:
        errors[free] = np.sqrt(np.diag(_beta_info_inverse(theta.alpha, data.X[:, free])))

    if not alpha_fixed:
        errors[p] = theta.alpha / np.sqrt(2.0 * data.n)

    return errors


def ols_init(data: Dataset) -> Theta:
    """Starting point of the iterations.

    Coefficients are least squares estimates computed from the thin QR
    factorization of the design; the shape is the closed-form estimate given those
    coefficients, clamped from below at ``ALPHA_FLOOR``.

    Args:
        data: Regression input.

    Returns:
        ``Theta`` instance.
    """
    q, r = np.linalg.qr(data.X, mode='reduced')
    beta = linalg.solve_triangular(r, q.T @ data.y)
    alpha = max(alpha_hat(beta, data), ALPHA_FLOOR)
    return Theta(beta=beta, alpha=alpha)


def _fit_free(data: Dataset, opts: FitOptions, start: Theta) -> Tuple[_Outcome, Theta]:
    p = data.p

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        alpha = np.exp(z[p])
        value, grad = loglik_and_score(z[:p], alpha, data)
        grad = -grad
        grad[p] *= alpha
        return -value, grad

    h0 = np.zeros((p + 1, p + 1))
    h0[:p, :p] = _beta_info_inverse(start.alpha, data.X)
    h0[p, p] = 1.0 / (2.0 * data.n)
    z0 = np.append(start.beta, np.log(start.alpha))
    outcome = _minimize(objective, z0, h0, opts)
    theta = Theta(beta=outcome.z[:p], alpha=float(np.exp(outcome.z[p])))

    # closed-form shape for the final coefficients, kept when the point stays stationary
    polished = Theta(beta=theta.beta, alpha=alpha_hat(theta.beta, data))
    value, grad = objective(np.append(polished.beta, np.log(polished.alpha)))

    if np.isfinite(value) and value <= outcome.value and np.max(np.abs(grad)) <= max(
            outcome.tolerance, np.max(np.abs(outcome.grad))):
        z = np.append(polished.beta, np.log(polished.alpha))
        outcome = outcome._replace(z=z, value=value, grad=grad)
        theta = polished

    return outcome, theta


def _report(outcome: _Outcome, theta: Theta, data: Dataset, label: str, **fixed) -> FitResult:
    grad_norm = float(np.max(np.abs(outcome.grad))) if outcome.grad.size else 0.0
    result = FitResult(theta_hat=theta, loglik=float(-outcome.value), converged=bool(outcome.converged),
                       iterations=outcome.iterations, grad_norm=grad_norm, tolerance=outcome.tolerance,
                       std_errors=_std_errors(theta, data, **fixed))

    if result.converged:
        logger.debug('%s fit converged in %d iterations, loglik %.10g, gradient %.3g',
                     label, result.iterations, result.loglik, result.grad_norm)
    else:
        logger.warning('%s fit did not converge after %d iterations, gradient %.3g > %.3g',
                       label, result.iterations, result.grad_norm, result.tolerance)

    return result


def fit_full(data: Dataset, opts: Optional[FitOptions] = None, start: Optional[Theta] = None) -> FitResult:
    """Maximizes the likelihood over all parameters.

    Args:
        data: Regression input.
        opts: Optimizer settings, defaults if not set.
        start: Starting point, ``ols_init(data)`` if not set.

    Returns:
        ``FitResult`` instance. Non-convergence is reported by its ``converged``
        flag, never silently.

    Raises:
        DegenerateDataError: If the response lies in the column space of the
            design, where the likelihood is unbounded.
    """
    opts = opts or FitOptions()

    if start is None:
        start = ols_init(data)

        if start.alpha <= ALPHA_FLOOR:
            raise DegenerateDataError('Response lies in the column space of the design, '
                                      'likelihood is unbounded as alpha goes to 0')

    outcome, theta = _fit_free(data, opts, start)
    return _report(outcome, theta, data, 'Full')


def _fit_alpha_fixed(data: Dataset, alpha0: float, opts: FitOptions) -> FitResult:
    p = data.p

    def objective(beta: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = loglik_and_score(beta, alpha0, data)
        return -value, -grad[:p]

    start = ols_init(data)
    outcome = _minimize(objective, start.beta, _beta_info_inverse(alpha0, data.X), opts)
    theta = Theta(beta=outcome.z, alpha=alpha0)
    return _report(outcome, theta, data, 'Restricted', alpha_fixed=True)


def _fit_beta_full(data: Dataset, values: np.ndarray, opts: FitOptions) -> FitResult:
    alpha = alpha_hat(values, data)

    if not alpha > ALPHA_FLOOR:
        raise DegenerateDataError('Response equals the restricted linear predictor, '
                                  'likelihood is unbounded as alpha goes to 0')

    theta = Theta(beta=values, alpha=alpha)
    value = loglik(theta, data)
    # shape score on the log scale, zero up to round-off at the closed-form maximizer
    grad = np.array([score(theta, data)[-1] * alpha])
    outcome = _Outcome(z=np.append(values, np.log(alpha)), value=-value, grad=grad, iterations=0,
                       converged=True, tolerance=opts.grad_tol * max(1.0, abs(value)))
    return _report(outcome, theta, data, 'Restricted', fixed=tuple(range(data.p)))


def _fit_beta_subset(data: Dataset, h: BetaSubset, opts: FitOptions) -> FitResult:
    p = data.p
    indices = tuple(h.indices)
    values = np.asarray(h.values, dtype=float)

    if not indices:
        return fit_full(data, opts)

    if len(indices) == p:
        beta = np.zeros(p)
        beta[list(indices)] = values
        return _fit_beta_full(data, beta, opts)

    free = [j for j in range(p) if j not in indices]
    offset = data.y - data.X[:, list(indices)] @ values
    reduced = Dataset(offset, data.X[:, free], names=[data.names[j] for j in free])
    result = fit_full(reduced, opts)

    beta = np.zeros(p)
    beta[free] = result.theta_hat.beta
    beta[list(indices)] = values
    theta = Theta(beta=beta, alpha=result.theta_hat.alpha)
    return FitResult(theta_hat=theta, loglik=result.loglik, converged=result.converged,
                     iterations=result.iterations, grad_norm=result.grad_norm, tolerance=result.tolerance,
                     std_errors=_std_errors(theta, data, fixed=indices))


def fit_restricted(data: Dataset, h: HypothesisSpec, opts: Optional[FitOptions] = None) -> FitResult:
    """Maximizes the likelihood under a null hypothesis.

    Fixed shape: the coefficients are optimized with the shape held at ``alpha0``.
    Fixed coefficient subset: the remaining coefficients and the shape are fitted
    to the offset response ``y - X_2 beta_2``. All coefficients fixed: the shape
    is the closed-form maximizer, no iterations are needed.

    Args:
        data: Regression input.
        h: Null hypothesis.
        opts: Optimizer settings, defaults if not set.

    Returns:
        ``FitResult`` instance with the restricted components set to their null
        values and zero standard errors.
    """
    opts = opts or FitOptions()
    h.check(data.p)

    if isinstance(h, AlphaFixed):
        return _fit_alpha_fixed(data, h.alpha0, opts)
    elif isinstance(h, BetaSubset):
        return _fit_beta_subset(data, h, opts)
    elif isinstance(h, BetaFull):
        return _fit_beta_full(data, np.asarray(h.values, dtype=float), opts)
    else:
        raise HypothesisError(f'Unknown hypothesis type: {type(h).__name__}')
