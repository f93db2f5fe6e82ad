import logging
import math
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .constants.constants import N_LAMBDAS, STABILITY_REPLICATES, STABILITY_THRESHOLD_EXTREMES, \
    STABILITY_THRESHOLD_SUBBOTIN, ZERO_TOL
from .core import Dataset, Graph, ShapeParam, as_shape, standardize
from .errors import InvalidParameterError, SubbotinError, error_category
from .estimator import DEFAULT_COMBINATION, CombinationRule, fit_graph, global_lambda_max, parallel_map
from .sampler import make_rng
from .solver import PowerLoss, default_lambdas

logger = logging.getLogger(__name__)

GraphFitter = Callable[[Dataset], Graph]


@dataclass(frozen=True, eq=False)
class StabilityProfile:
    p: int
    frequencies: np.ndarray
    replicates: int
    nu: Optional[ShapeParam]
    lambda_: float

    def __post_init__(self):
        freq = np.array(self.frequencies, dtype=float)
        if freq.shape != (self.p, self.p):
            raise InvalidParameterError(f"frequencies must be {self.p} x {self.p}, got {freq.shape}")
        if np.any(freq < 0) or np.any(freq > 1):
            raise InvalidParameterError("selection frequencies must lie in [0, 1]")
        if not np.array_equal(freq, freq.T):
            raise InvalidParameterError("selection frequencies must be symmetric")
        if np.any(np.diag(freq) != 0):
            raise InvalidParameterError("selection frequencies must have a zero diagonal")
        if self.replicates < 1:
            raise InvalidParameterError(f"replicates must be positive, got {self.replicates}")
        freq.flags.writeable = False
        object.__setattr__(self, 'frequencies', freq)
        if self.nu is not None:
            object.__setattr__(self, 'nu', as_shape(self.nu))

    def frequency(self, i: int, j: int) -> float:
        return float(self.frequencies[i, j])

    def stable_edge_count(self, threshold: float) -> int:
        return select_stable_graph(self, threshold).edge_count


class StabilityChoice(NamedTuple):
    nu: ShapeParam
    lambda_: float
    graph: Graph
    profiles: List[StabilityProfile]


def stationary_block_bootstrap(data: Dataset, mean_block_len: float, rng: np.random.Generator) -> Dataset:
    """Purpose: resamples the rows of a dataset in blocks of random length.

    Block lengths are geometric with the given mean and blocks start at uniform positions,
    wrapping around the end of the series. A block-start flag is drawn per output row: a flagged
    row jumps to a fresh uniform position, an unflagged one continues after its predecessor.

    Args:
        data: the dataset to resample, n >= 2.
        mean_block_len: expected block length, at least 1; 1 gives the iid row bootstrap.
        rng: random stream.

    returns:
        (Dataset) n resampled rows, unstandardized.
    """
    n = data.n
    if n < 2:
        raise InvalidParameterError(f"block bootstrap needs at least 2 observations, got {n}")
    if not mean_block_len >= 1:
        raise InvalidParameterError(f"mean block length must be at least 1, got {mean_block_len}")
    starts = rng.integers(0, n, size=n)
    new_block = rng.random(n) < 1.0 / mean_block_len
    new_block[0] = True
    block_first_row = np.maximum.accumulate(np.where(new_block, np.arange(n), 0))
    indices = (starts[block_first_row] + np.arange(n) - block_first_row) % n
    return Dataset(data.values[indices])


def default_block_len(n: int) -> float:
    return float(math.ceil(math.sqrt(n)))


def profile_for_fitter(data: Dataset, fitter: GraphFitter, replicates: int = STABILITY_REPLICATES, seed: int = 0,
                       key: Sequence[int] = (), mean_block_len: Optional[float] = None, threads: int = 1,
                       nu: Optional[Union[ShapeParam, int]] = None, lambda_: float = 0.0) -> StabilityProfile:
    """Purpose: estimates how often each edge is selected by a graph fitter across block-bootstrap resamples.

    Replicate r resamples with the stream make_rng(seed, *key, r), so frequencies don't depend on
    the order replicates run in. A replicate whose fit fails counts as selecting no edges.

    Args:
        data: the dataset to resample.
        fitter: maps a resample to an estimated graph.
        replicates: number of resamples, at least 2.
        seed: base seed.
        key: extra derivation indices, e.g. (nu-index, lambda-index).
        mean_block_len: expected block length, ceil(sqrt(n)) when omitted.
        threads: worker threads over replicates.
        nu: recorded on the profile.
        lambda_: recorded on the profile.

    returns:
        (StabilityProfile) per-edge selection frequencies.
    """
    if replicates < 2:
        raise InvalidParameterError(f"stability selection needs at least 2 replicates, got {replicates}")
    block_len = default_block_len(data.n) if mean_block_len is None else mean_block_len

    def one(r):
        resample = stationary_block_bootstrap(data, block_len, make_rng(seed, *key, r))
        try:
            return fitter(resample).adjacency()
        except SubbotinError as e:
            logger.warning("stability replicate %d failed (%s): %s", r, error_category(e), e)
            return None

    counts = np.zeros((data.p, data.p))
    for adjacency in parallel_map(one, range(replicates), threads):
        if adjacency is not None:
            counts += adjacency
    return StabilityProfile(data.p, counts / replicates, replicates, nu, lambda_)


def edge_stability(data: Dataset, nu: Union[ShapeParam, int], lambda_: float,
                   replicates: int = STABILITY_REPLICATES, rule: Union[CombinationRule, str] = DEFAULT_COMBINATION,
                   seed: int = 0, key: Sequence[int] = (0, 0), mean_block_len: Optional[float] = None,
                   threads: int = 1, zero_tol: float = ZERO_TOL, **settings) -> StabilityProfile:
    def fitter(resample: Dataset) -> Graph:
        return fit_graph(standardize(resample), lambda_, nu, rule, zero_tol, **settings)

    return profile_for_fitter(data, fitter, replicates, seed, key, mean_block_len, threads, as_shape(nu), lambda_)


def _check_threshold(threshold: float):
    if not 0 < threshold <= 1:
        raise InvalidParameterError(f"stability threshold must be in (0, 1], got {threshold}")


def select_stable_graph(profile: StabilityProfile, threshold: float) -> Graph:
    _check_threshold(threshold)
    return Graph.from_adjacency(profile.frequencies >= threshold)


def _best(profiles: List[StabilityProfile], threshold: float) -> StabilityProfile:
    # most stable edges, then larger lambda, then smaller nu
    return max(profiles, key=lambda prof: (prof.stable_edge_count(threshold), prof.lambda_,
                                           -(prof.nu.nu if prof.nu is not None else 0)))


def tune(data: Dataset, nu_grid: Sequence[Union[ShapeParam, int]], lambda_grid: Optional[Sequence[float]] = None,
         replicates: int = STABILITY_REPLICATES, threshold: float = STABILITY_THRESHOLD_SUBBOTIN,
         rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, seed: int = 0,
         mean_block_len: Optional[float] = None, threads: int = 1, zero_tol: float = ZERO_TOL,
         n_lambdas: int = N_LAMBDAS, **settings) -> StabilityChoice:
    """Purpose: selects (nu, lambda) by stability selection over the grid product.

    Every grid point gets its own stability profile; the winner has the most edges at or above
    the threshold. Ties go to the larger lambda, then the smaller nu.

    Args:
        data: a standardized dataset.
        nu_grid: shape parameters to try; a single entry keeps nu fixed.
        lambda_grid: strictly descending lambdas; per nu, default_lambdas of the largest
            node-wise lambda_max when omitted.
        n_lambdas: size of the default grid.
        replicates: bootstrap resamples per grid point.
        threshold: stability threshold in (0, 1].
        rule: AND or OR combination.
        seed: base seed; grid point (a, b) replicate r uses the stream (seed, a, b, r).
        threads: worker threads over grid points.

    returns:
        (StabilityChoice) the chosen nu, lambda, stable graph and every profile in grid order.
    """
    if len(nu_grid) == 0:
        raise InvalidParameterError("nu grid is empty")
    if lambda_grid is not None and len(lambda_grid) == 0:
        raise InvalidParameterError("lambda grid is empty")
    _check_threshold(threshold)
    shapes = [as_shape(nu) for nu in nu_grid]

    tasks: List[Tuple[int, ShapeParam, int, float]] = []
    for a, nu in enumerate(shapes):
        lambdas = lambda_grid
        if lambdas is None:
            lambdas = default_lambdas(global_lambda_max(data, PowerLoss(nu)), n_lambdas)
        tasks.extend((a, nu, b, float(lam)) for b, lam in enumerate(lambdas))

    def one(task):
        a, nu, b, lam = task
        return edge_stability(data, nu, lam, replicates, rule, seed, (a, b), mean_block_len, 1, zero_tol, **settings)

    profiles = parallel_map(one, tasks, threads)
    best = _best(profiles, threshold)
    logger.info("stability tuning chose nu=%d lambda=%.6g with %d stable edges", best.nu.nu, best.lambda_,
                best.stable_edge_count(threshold))
    return StabilityChoice(best.nu, best.lambda_, select_stable_graph(best, threshold), profiles)


def tune_lambda_for_fitter(data: Dataset, make_fitter: Callable[[float], GraphFitter], lambda_grid: Sequence[float],
                           replicates: int = STABILITY_REPLICATES, threshold: float = STABILITY_THRESHOLD_EXTREMES,
                           seed: int = 0,
                           mean_block_len: Optional[float] = None,
                           threads: int = 1) -> Tuple[float, Graph, List[StabilityProfile]]:
    # lambda-only stability search for estimators without a shape parameter
    if len(lambda_grid) == 0:
        raise InvalidParameterError("lambda grid is empty")
    _check_threshold(threshold)

    def one(indexed):
        b, lam = indexed
        return profile_for_fitter(data, make_fitter(float(lam)), replicates, seed, (0, b), mean_block_len, 1,
                                  None, float(lam))

    profiles = parallel_map(one, list(enumerate(lambda_grid)), threads)
    best = _best(profiles, threshold)
    return best.lambda_, select_stable_graph(best, threshold), profiles
