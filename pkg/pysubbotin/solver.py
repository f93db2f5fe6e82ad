import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from .constants.constants import LAMBDA_MIN_RATIO, LASSO_INITIAL_STEP, LASSO_MAX_ITER, LASSO_SHRINK, LASSO_TOL, \
    N_LAMBDAS, QUANTILE_WIDTH
from .core import ShapeParam, as_shape
from .errors import InvalidParameterError, NumericalDivergenceError, SolverError, SubbotinError

logger = logging.getLogger(__name__)

# a backtracking search that shrinks the step this far without a finite trial objective has diverged
_MIN_STEP = 1e-30


def signed_power(r: np.ndarray, k: int) -> np.ndarray:
    # sign(r) * |r|^k through the log-magnitude so huge residuals overflow to inf instead of wrapping
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    nonzero = r != 0
    with np.errstate(over='ignore'):
        out[nonzero] = np.sign(r[nonzero]) * np.exp(k * np.log(np.abs(r[nonzero])))
    return out


def abs_power(r: np.ndarray, k: int) -> np.ndarray:
    # |r|^k through the log-magnitude, overflowing to inf
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    nonzero = r != 0
    with np.errstate(over='ignore'):
        out[nonzero] = np.exp(k * np.log(np.abs(r[nonzero])))
    return out


class SmoothLoss(ABC):
    """A smooth per-observation loss rho(r) of the residual r = y - X beta.

    The engine minimizes mean(rho(r)) + lambda * |beta|_1.
    """

    @abstractmethod
    def value(self, residual: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def derivative(self, residual: np.ndarray) -> np.ndarray:
        pass

    def mean(self, residual: np.ndarray) -> float:
        return float(np.mean(self.value(residual)))


class PowerLoss(SmoothLoss):
    # rho(r) = |r|^nu / nu, the node-wise Extreme Lasso loss; nu is even
    def __init__(self, nu: Union[ShapeParam, int]):
        self.nu = as_shape(nu).nu

    def value(self, residual):
        return abs_power(residual, self.nu) / self.nu

    def derivative(self, residual):
        return signed_power(residual, self.nu - 1)

    def __repr__(self):
        return f"PowerLoss(nu={self.nu})"


class SmoothedCheckLoss(SmoothLoss):
    """Check loss of quantile level tau with a quadratic patch of half-width `width` around zero.

    Outside the patch it equals tau * r for r > width and (tau - 1) * r for r < -width,
    inside it is r^2 / (4 width) + (tau - 1/2) r + width / 4, which joins both pieces with
    a continuous derivative.
    """

    def __init__(self, tau: float, width: float = QUANTILE_WIDTH):
        if not 0 < tau < 1:
            raise InvalidParameterError(f"quantile level must be in (0, 1), got {tau}")
        if not width > 0:
            raise InvalidParameterError(f"smoothing width must be positive, got {width}")
        self.tau = float(tau)
        self.width = float(width)

    def value(self, residual):
        r = np.asarray(residual, dtype=float)
        h = self.width
        inside = r * r / (4 * h) + (self.tau - 0.5) * r + h / 4
        return np.where(r > h, self.tau * r, np.where(r < -h, (self.tau - 1) * r, inside))

    def derivative(self, residual):
        r = np.asarray(residual, dtype=float)
        h = self.width
        return np.where(r > h, self.tau, np.where(r < -h, self.tau - 1, r / (2 * h) + self.tau - 0.5))

    def __repr__(self):
        return f"SmoothedCheckLoss(tau={self.tau}, width={self.width})"


@dataclass(frozen=True)
class LassoConfig:
    lambda_: float
    nu: ShapeParam
    tol: float = LASSO_TOL
    max_iter: int = LASSO_MAX_ITER
    shrink: float = LASSO_SHRINK
    initial_step: float = LASSO_INITIAL_STEP

    def __post_init__(self):
        object.__setattr__(self, 'nu', as_shape(self.nu))
        _check_settings(self.lambda_, self.tol, self.max_iter, self.shrink, self.initial_step)


@dataclass(frozen=True, eq=False)
class FitResult:
    coefficients: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool

    def support(self, zero_tol: float = 0.0) -> np.ndarray:
        return np.flatnonzero(np.abs(self.coefficients) > zero_tol)


def _check_settings(lambda_, tol, max_iter, shrink, initial_step):
    if not (np.isfinite(lambda_) and lambda_ >= 0):
        raise InvalidParameterError(f"lambda must be a finite non-negative number, got {lambda_}")
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise InvalidParameterError(f"max_iter must be positive, got {max_iter}")
    if not 0 < shrink < 1:
        raise InvalidParameterError(f"backtracking shrink factor must be in (0, 1), got {shrink}")
    if not initial_step > 0:
        raise InvalidParameterError(f"initial step must be positive, got {initial_step}")


def _check_dims(X, y, beta=None):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or y.ndim != 1:
        raise InvalidParameterError(f"expected a design matrix and a response vector, got shapes {X.shape} and {y.shape}")
    if X.shape[0] != y.shape[0]:
        raise InvalidParameterError(f"design has {X.shape[0]} rows but response has {y.shape[0]}")
    if X.shape[0] == 0:
        raise InvalidParameterError("can't fit on zero observations")
    if beta is None:
        return X, y, None
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != X.shape[1]:
        raise InvalidParameterError(f"coefficient vector has {beta.shape[0]} entries, design has {X.shape[1]} columns")
    return X, y, beta


def soft_threshold(z, t):
    if np.any(np.asarray(t) < 0):
        raise InvalidParameterError(f"threshold must be non-negative, got {t}")
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0)
    return float(out) if np.ndim(out) == 0 else out


def _gradient(X, residual, loss: SmoothLoss) -> np.ndarray:
    return -(X.T @ loss.derivative(residual)) / X.shape[0]


def _kkt(beta, grad, lambda_) -> float:
    # l-inf distance from -grad to lambda times the subdifferential of |beta|_1
    if beta.size == 0:
        return 0.0
    active = beta != 0
    gap = np.where(active, np.abs(grad + lambda_ * np.sign(beta)), np.maximum(np.abs(grad) - lambda_, 0.0))
    return float(np.max(gap))


def objective(beta, X, y, lambda_: float, nu: Union[ShapeParam, int]) -> float:
    X, y, beta = _check_dims(X, y, beta)
    return PowerLoss(nu).mean(y - X @ beta) + lambda_ * float(np.sum(np.abs(beta)))


def loss_gradient(beta, X, y, nu: Union[ShapeParam, int]) -> np.ndarray:
    X, y, beta = _check_dims(X, y, beta)
    return _gradient(X, y - X @ beta, PowerLoss(nu))


def kkt_residual(beta, X, y, lambda_: float, nu: Union[ShapeParam, int]) -> float:
    X, y, beta = _check_dims(X, y, beta)
    return _kkt(beta, _gradient(X, y - X @ beta, PowerLoss(nu)), lambda_)


def lambda_max_for_loss(X, y, loss: SmoothLoss) -> float:
    # smallest lambda at which beta = 0 satisfies the optimality condition
    X, y, _ = _check_dims(X, y)
    if X.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(_gradient(X, y, loss))))


def lambda_max(X, y, nu: Union[ShapeParam, int]) -> float:
    return lambda_max_for_loss(X, y, PowerLoss(nu))


def default_lambdas(lambda_max_value: float, n_lambdas: int = N_LAMBDAS,
                    min_ratio: float = LAMBDA_MIN_RATIO) -> np.ndarray:
    if n_lambdas < 1:
        raise InvalidParameterError(f"grid needs at least one point, got {n_lambdas}")
    if not 0 < min_ratio < 1:
        raise InvalidParameterError(f"min_ratio must be in (0, 1), got {min_ratio}")
    if lambda_max_value <= 0:
        return np.zeros(1)
    return np.geomspace(lambda_max_value, min_ratio * lambda_max_value, n_lambdas)


def fit_with_loss(X, y, loss: SmoothLoss, lambda_: float, warm_start: Optional[np.ndarray] = None,
                  tol: float = LASSO_TOL, max_iter: int = LASSO_MAX_ITER, shrink: float = LASSO_SHRINK,
                  initial_step: float = LASSO_INITIAL_STEP) -> FitResult:
    """Purpose: minimizes mean(loss(y - X beta)) + lambda * |beta|_1 by proximal gradient descent.

    Each iteration takes beta <- soft_threshold(beta - s * grad, s * lambda), halving s (by `shrink`)
    until the quadratic majorization of the smooth part holds at the candidate. A step accepted
    without shrinking lets the next iteration try s / shrink.

    Args:
        X: N x d design matrix.
        y: response vector of length N.
        loss: the smooth loss.
        lambda_: l1 penalty weight.
        warm_start: starting coefficients, zeros when omitted.
        tol: stop once the KKT residual or the largest coefficient change falls to tol.
        max_iter: iteration cap; hitting it returns the last iterate with converged=False.
        shrink: backtracking factor in (0, 1).
        initial_step: first trial step size.

    returns:
        (FitResult) the final iterate and its certificate.

    Raises:
        NumericalDivergenceError: the objective became non-finite.
    """
    _check_settings(lambda_, tol, max_iter, shrink, initial_step)
    X, y, _ = _check_dims(X, y)
    beta = np.zeros(X.shape[1]) if warm_start is None else _check_dims(X, y, warm_start)[2].copy()

    residual = y - X @ beta
    smooth = loss.mean(residual)
    if not np.isfinite(smooth):
        raise NumericalDivergenceError(f"objective is not finite at the starting point ({loss!r})")
    total = smooth + lambda_ * float(np.sum(np.abs(beta)))
    step = initial_step
    grad = _gradient(X, residual, loss)
    kkt = _kkt(beta, grad, lambda_)

    iterations = 0
    while kkt > tol and iterations < max_iter:
        iterations += 1
        shrunk = False
        while True:
            candidate = soft_threshold(beta - step * grad, step * lambda_)
            diff = candidate - beta
            cand_residual = y - X @ candidate
            cand_smooth = loss.mean(cand_residual)
            bound = smooth + float(grad @ diff) + float(diff @ diff) / (2 * step)
            if np.isfinite(cand_smooth) and cand_smooth <= bound + 1e-12 * max(1.0, abs(smooth)):
                break
            step *= shrink
            shrunk = True
            if step < _MIN_STEP:
                raise NumericalDivergenceError(
                    f"backtracking found no finite descent step after {iterations} iterations ({loss!r})")

        cand_total = cand_smooth + lambda_ * float(np.sum(np.abs(candidate)))
        if not np.isfinite(cand_total):
            raise NumericalDivergenceError(f"objective became non-finite at iteration {iterations} ({loss!r})")
        logger.debug("iteration %d: objective %.12g -> %.12g (decrease %.3g, step %.3g)",
                     iterations, total, cand_total, total - cand_total, step)
        assert cand_total <= total + 1e-10 * max(1.0, abs(total)), "proximal step increased the objective"

        change = float(np.max(np.abs(diff))) if diff.size else 0.0
        beta, residual, smooth, total = candidate, cand_residual, cand_smooth, cand_total
        grad = _gradient(X, residual, loss)
        kkt = _kkt(beta, grad, lambda_)
        if not shrunk:
            step /= shrink
        if change <= tol:
            break

    converged = kkt <= 10 * tol
    if not converged:
        if iterations >= max_iter:
            logger.warning("solver hit max_iter=%d at lambda=%.6g with kkt residual %.3g (%r)",
                           max_iter, lambda_, kkt, loss)
        else:
            logger.debug("solver stalled at lambda=%.6g with kkt residual %.3g after %d iterations (%r)",
                         lambda_, kkt, iterations, loss)
    return FitResult(beta, float(total), iterations, kkt, converged)


def fit(X, y, config: LassoConfig, warm_start: Optional[np.ndarray] = None) -> FitResult:
    return fit_with_loss(X, y, PowerLoss(config.nu), config.lambda_, warm_start, config.tol, config.max_iter,
                         config.shrink, config.initial_step)


def _check_lambdas(lambdas: Sequence[float]) -> np.ndarray:
    lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
    if lambdas.size == 0:
        raise InvalidParameterError("lambda grid is empty")
    if np.any(lambdas < 0) or not np.all(np.isfinite(lambdas)):
        raise InvalidParameterError("lambda grid must hold finite non-negative values")
    if np.any(np.diff(lambdas) >= 0):
        raise InvalidParameterError("lambda grid must be strictly descending")
    return lambdas


def path_with_loss(X, y, loss: SmoothLoss, lambdas: Optional[Sequence[float]] = None,
                   **settings) -> List[FitResult]:
    if lambdas is None:
        lambdas = default_lambdas(lambda_max_for_loss(X, y, loss))
    lambdas = _check_lambdas(lambdas)
    results = []
    warm = None
    for lam in lambdas:
        try:
            result = fit_with_loss(X, y, loss, float(lam), warm, **settings)
        except SubbotinError as e:
            raise SolverError(str(e), lambda_=float(lam)) from e
        results.append(result)
        warm = result.coefficients
    return results


def path(X, y, nu: Union[ShapeParam, int], lambdas: Optional[Sequence[float]] = None,
         **settings) -> List[FitResult]:
    """Purpose: fits the Extreme Lasso along a descending lambda grid, warm-starting each fit.

    Args:
        X: N x d design matrix.
        y: response vector.
        nu: shape parameter of the power loss.
        lambdas: strictly descending non-negative grid; default_lambdas(lambda_max) when omitted.
        settings: solver settings passed to every fit (tol, max_iter, shrink, initial_step).

    returns:
        (list of FitResult) one per lambda, in grid order.

    Raises:
        SolverError: a fit failed; carries the offending lambda.
    """
    return path_with_loss(X, y, PowerLoss(nu), lambdas, **settings)
