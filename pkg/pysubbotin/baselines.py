import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize, special, stats

from .constants.constants import CDF_CLIP, GEV_MAX_EVALUATIONS, GEV_MIN_SAMPLES, GUMBEL_SHAPE_TOL, QUANTILE_WIDTH, \
    ZERO_TOL
from .core import Dataset, Graph, standardize
from .errors import GevFitError, InvalidParameterError
from .estimator import DEFAULT_COMBINATION, CombinationRule, edge_path_with_loss, fit_graph, \
    fit_graph_with_loss, fit_neighborhood_with_loss, oracle_tune_with_loss, parallel_map
from .solver import SmoothedCheckLoss

logger = logging.getLogger(__name__)

GAUSSIAN_NU = 2


def gaussian_ns(data: Dataset, lambda_: float, rule: Union[CombinationRule, str] = DEFAULT_COMBINATION,
                zero_tol: float = ZERO_TOL, threads: int = 1, **settings) -> Graph:
    # neighborhood selection with squared loss: the nu = 2 member of the family
    return fit_graph(data, lambda_, GAUSSIAN_NU, rule, zero_tol, threads, **settings)


def check_loss(residual, tau: float) -> np.ndarray:
    r = np.asarray(residual, dtype=float)
    return r * (tau - (r < 0))


def quantile_neighborhood(data: Dataset, i: int, tau: float, lambda_: float, width: float = QUANTILE_WIDTH,
                          warm_start: Optional[np.ndarray] = None, **settings) -> np.ndarray:
    """Purpose: penalized quantile regression of column i on the other columns.

    Minimizes mean(rho_tau(y - X beta)) + lambda * |beta|_1 where rho_tau is the check loss
    smoothed over a band of half-width `width` around zero.

    Args:
        data: a standardized dataset.
        i: the response node.
        tau: quantile level in (0, 1).
        lambda_: l1 penalty weight.
        width: smoothing half-width.
        warm_start: starting coefficients.

    returns:
        (np.ndarray) p - 1 coefficients over the nodes j != i.
    """
    return fit_neighborhood_with_loss(data, i, SmoothedCheckLoss(tau, width), lambda_, warm_start, **settings)


def quantile_graph(data: Dataset, tau: float, lambda_: float, rule: Union[CombinationRule, str] = DEFAULT_COMBINATION,
                   width: float = QUANTILE_WIDTH, zero_tol: float = ZERO_TOL, threads: int = 1, **settings) -> Graph:
    return fit_graph_with_loss(data, lambda_, SmoothedCheckLoss(tau, width), rule, zero_tol, threads, **settings)


def quantile_edge_path(data: Dataset, tau: float, lambdas: Optional[Sequence[float]] = None,
                       rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, width: float = QUANTILE_WIDTH,
                       zero_tol: float = ZERO_TOL, threads: int = 1, **settings) -> List[Tuple[float, Graph]]:
    return edge_path_with_loss(data, SmoothedCheckLoss(tau, width), lambdas, rule, zero_tol, threads, **settings)


def quantile_oracle_tune(data: Dataset, tau: float, target_edges: int,
                         rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, width: float = QUANTILE_WIDTH,
                         zero_tol: float = ZERO_TOL, threads: int = 1, **settings) -> Tuple[float, Graph]:
    return oracle_tune_with_loss(data, SmoothedCheckLoss(tau, width), target_edges, rule, zero_tol, threads,
                                 **settings)


@dataclass(frozen=True)
class GevParams:
    location: float
    scale: float
    shape: float

    def __post_init__(self):
        if not all(np.isfinite([self.location, self.scale, self.shape])):
            raise InvalidParameterError(f"GEV parameters must be finite, got {self}")
        if not self.scale > 0:
            raise InvalidParameterError(f"GEV scale must be positive, got {self.scale}")

    @property
    def is_gumbel(self) -> bool:
        return abs(self.shape) < GUMBEL_SHAPE_TOL


def _frozen(params: GevParams):
    # scipy's genextreme shape c is the negated xi
    if params.is_gumbel:
        return stats.gumbel_r(loc=params.location, scale=params.scale)
    return stats.genextreme(c=-params.shape, loc=params.location, scale=params.scale)


def gev_cdf(x, params: GevParams):
    out = _frozen(params).cdf(x)
    return float(out) if np.ndim(out) == 0 else out


def gev_quantile(u, params: GevParams):
    out = _frozen(params).ppf(u)
    return float(out) if np.ndim(out) == 0 else out


def gev_negative_log_likelihood(samples: np.ndarray, location: float, scale: float, shape: float) -> float:
    if not scale > 0:
        return np.inf
    z = (np.asarray(samples, dtype=float) - location) / scale
    n = z.size
    if abs(shape) < GUMBEL_SHAPE_TOL:
        return float(n * np.log(scale) + np.sum(z) + np.sum(np.exp(-z)))
    expr = 1 + shape * z
    if np.any(expr <= 0):
        return np.inf
    return float(n * np.log(scale) + (1 + 1 / shape) * np.sum(np.log(expr)) + np.sum(expr ** (-1 / shape)))


def gev_pwm_estimate(samples: np.ndarray) -> GevParams:
    """Purpose: probability-weighted-moment estimates of the GEV parameters.

    Args:
        samples: at least 3 non-constant values.

    returns:
        (GevParams) estimates used to start the likelihood search.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    i = np.arange(n)
    b0 = x.mean()
    b1 = np.sum(i / (n - 1) * x) / n
    b2 = np.sum(i * (i - 1) / ((n - 1) * (n - 2)) * x) / n
    c = (2 * b1 - b0) / (3 * b2 - b0) - np.log(2) / np.log(3)
    k = 7.8590 * c + 2.9554 * c * c
    if abs(k) < GUMBEL_SHAPE_TOL:
        scale = (2 * b1 - b0) / np.log(2)
        return GevParams(b0 - np.euler_gamma * scale, scale, 0.0)
    gamma = special.gamma(1 + k)
    scale = (2 * b1 - b0) * k / (gamma * (1 - 2 ** (-k)))
    return GevParams(b0 + scale * (gamma - 1) / k, scale, -k)


def gev_fit(samples, column: Optional[int] = None) -> GevParams:
    """Purpose: maximum-likelihood GEV fit by Nelder-Mead, started from probability-weighted moments.

    The search runs over (location, log scale, shape); a shape within the Gumbel tolerance of
    zero evaluates the Gumbel likelihood.

    Args:
        samples: at least GEV_MIN_SAMPLES finite values, not all equal.
        column: attached to errors when fitting a dataset column.

    returns:
        (GevParams) fitted parameters.

    Raises:
        GevFitError: too few or constant samples, or the search did not converge.
    """
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.size < GEV_MIN_SAMPLES:
        raise GevFitError(f"need at least {GEV_MIN_SAMPLES} samples, got {x.size}", column=column)
    if not np.all(np.isfinite(x)):
        raise GevFitError("samples contain non-finite values", column=column)
    if np.ptp(x) == 0:
        raise GevFitError("samples are constant", column=column)

    try:
        start = gev_pwm_estimate(x)
    except InvalidParameterError:
        start = None
    if start is None or not np.isfinite(gev_negative_log_likelihood(x, start.location, start.scale, start.shape)):
        # the Gumbel member has unbounded support, so the likelihood is finite there
        scale = np.std(x) * np.sqrt(6) / np.pi
        logger.debug("GEV fit falls back to a moment-matched Gumbel start (column %s)", column)
        start = GevParams(np.mean(x) - np.euler_gamma * scale, scale, 0.0)

    def nll(params):
        return gev_negative_log_likelihood(x, params[0], np.exp(params[1]), params[2])

    result = optimize.minimize(nll, np.array([start.location, np.log(start.scale), start.shape]),
                               method='Nelder-Mead',
                               options={'maxfev': GEV_MAX_EVALUATIONS, 'maxiter': GEV_MAX_EVALUATIONS,
                                        'xatol': 1e-8, 'fatol': 1e-10})
    if not result.success or not np.isfinite(result.fun):
        raise GevFitError(f"likelihood search did not converge: {result.message}",
                          diagnostics={'evaluations': int(result.nfev), 'message': str(result.message),
                                       'last': result.x.tolist(), 'start': [start.location, start.scale, start.shape]},
                          column=column)
    location, log_scale, shape = result.x
    return GevParams(float(location), float(np.exp(log_scale)), float(shape))


def block_maxima(data: Dataset, block_size: int) -> np.ndarray:
    # trailing rows that don't fill a block are dropped
    if block_size < 1:
        raise InvalidParameterError(f"block size must be positive, got {block_size}")
    if data.n < 2 * block_size:
        raise InvalidParameterError(f"need at least two blocks: n={data.n} < 2 * block_size={2 * block_size}")
    n_blocks = data.n // block_size
    return data.values[:n_blocks * block_size].reshape(n_blocks, block_size, data.p).max(axis=1)


def copula_transform(data: Dataset, block_size: int, threads: int = 1) -> Dataset:
    """Purpose: normal scores of GEV-fitted block maxima.

    Args:
        data: raw observations, n >= 2 * block_size.
        block_size: rows per consecutive block.
        threads: worker threads over columns.

    returns:
        (Dataset) one row per block; column j holds Phi^-1(clip(GEV-CDF_j(maxima))).

    Raises:
        GevFitError: a column's GEV fit failed; the error names the column.
    """
    maxima = block_maxima(data, block_size)
    params = parallel_map(lambda j: gev_fit(maxima[:, j], column=j), range(data.p), threads)
    u = np.column_stack([gev_cdf(maxima[:, j], params[j]) for j in range(data.p)])
    return Dataset(stats.norm.ppf(np.clip(u, CDF_CLIP, 1 - CDF_CLIP)))


def copula_blockmax_graph(data: Dataset, block_size: int, lambda_: float,
                          rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
                          threads: int = 1, **settings) -> Graph:
    scores = standardize(copula_transform(data, block_size, threads))
    return gaussian_ns(scores, lambda_, rule, zero_tol, threads, **settings)
