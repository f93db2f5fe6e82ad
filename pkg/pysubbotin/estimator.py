import logging
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import numpy as np

from .constants.constants import BISECTION_DEPTH, DEFAULT_RULE, ZERO_TOL
from .core import Dataset, Graph, ShapeParam
from .errors import InvalidParameterError, SolverError, SubbotinError
from .solver import PowerLoss, SmoothLoss, default_lambdas, fit_with_loss, lambda_max_for_loss, path_with_loss

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


class CombinationRule(Enum):
    AND = "and"
    OR = "or"

    @staticmethod
    def parse(rule: Union["CombinationRule", str]) -> "CombinationRule":
        if isinstance(rule, CombinationRule):
            return rule
        try:
            return CombinationRule(str(rule).lower())
        except ValueError:
            raise InvalidParameterError(f"combination rule must be 'and' or 'or', got {rule!r}")


DEFAULT_COMBINATION = CombinationRule.parse(DEFAULT_RULE)


def parallel_map(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    # results come back in input order whatever the schedule
    items = list(items)
    if threads < 1:
        raise InvalidParameterError(f"threads must be at least 1, got {threads}")
    if threads == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))


def design_for_node(values: np.ndarray, i: int) -> Tuple[np.ndarray, np.ndarray]:
    # coefficient k of node i belongs to column k for k < i and to column k + 1 otherwise
    if not 0 <= i < values.shape[1]:
        raise InvalidParameterError(f"node {i} is out of range for {values.shape[1]} columns")
    return np.delete(values, i, axis=1), values[:, i]


def _node_error(e: SubbotinError, i: int, lambda_: Optional[float]) -> SolverError:
    cause = e.__cause__ if isinstance(e, SolverError) and e.__cause__ is not None else e
    lam = e.lambda_ if isinstance(e, SolverError) and e.lambda_ is not None else lambda_
    return SolverError(str(cause), lambda_=lam, node=i)


def global_lambda_max(data: Dataset, loss: SmoothLoss) -> float:
    return max((lambda_max_for_loss(*design_for_node(data.values, i), loss) for i in range(data.p)), default=0.0)


def fit_neighborhood_with_loss(data: Dataset, i: int, loss: SmoothLoss, lambda_: float,
                               warm_start: Optional[np.ndarray] = None, **settings) -> np.ndarray:
    X, y = design_for_node(data.values, i)
    try:
        return fit_with_loss(X, y, loss, lambda_, warm_start, **settings).coefficients
    except SubbotinError as e:
        raise _node_error(e, i, lambda_) from e


def fit_neighborhood(data: Dataset, i: int, lambda_: float, nu: Union[ShapeParam, int],
                     warm_start: Optional[np.ndarray] = None, **settings) -> np.ndarray:
    """Purpose: regresses column i on every other column with the Extreme Lasso.

    Args:
        data: a standardized dataset.
        i: the response node.
        lambda_: l1 penalty weight.
        nu: shape parameter of the power loss.
        warm_start: starting coefficients of length p - 1.
        settings: solver settings (tol, max_iter, shrink, initial_step).

    returns:
        (np.ndarray) p - 1 coefficients over the nodes j != i in increasing order;
            the nonzero entries are the estimated neighborhood of i.

    Raises:
        SolverError: the fit failed; carries the node and lambda.
    """
    return fit_neighborhood_with_loss(data, i, PowerLoss(nu), lambda_, warm_start, **settings)


def coefficient_matrix(neighborhoods: Sequence[np.ndarray]) -> np.ndarray:
    # row i, column j holds the coefficient of node j in the regression of node i
    p = len(neighborhoods)
    out = np.zeros((p, p))
    for i, coefficients in enumerate(neighborhoods):
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (p - 1,):
            raise InvalidParameterError(
                f"neighborhood of node {i} has shape {coefficients.shape}, expected ({p - 1},)")
        others = [j for j in range(p) if j != i]
        out[i, others] = coefficients
    return out


def assemble_graph(neighborhoods: Sequence[np.ndarray], rule: Union[CombinationRule, str] = DEFAULT_COMBINATION,
                   zero_tol: float = ZERO_TOL) -> Graph:
    rule = CombinationRule.parse(rule)
    selected = np.abs(coefficient_matrix(neighborhoods)) > zero_tol
    combined = selected & selected.T if rule is CombinationRule.AND else selected | selected.T
    return Graph.from_adjacency(combined)


def fit_neighborhoods_with_loss(data: Dataset, loss: SmoothLoss, lambda_: float,
                                warm_starts: Optional[Sequence[np.ndarray]] = None, threads: int = 1,
                                **settings) -> List[np.ndarray]:
    def one(i):
        warm = None if warm_starts is None else warm_starts[i]
        return fit_neighborhood_with_loss(data, i, loss, lambda_, warm, **settings)

    return parallel_map(one, range(data.p), threads)


def fit_neighborhoods(data: Dataset, lambda_: float, nu: Union[ShapeParam, int], threads: int = 1,
                      **settings) -> List[np.ndarray]:
    return fit_neighborhoods_with_loss(data, PowerLoss(nu), lambda_, threads=threads, **settings)


def fit_graph_with_loss(data: Dataset, lambda_: float, loss: SmoothLoss,
                        rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
                        threads: int = 1, **settings) -> Graph:
    return assemble_graph(fit_neighborhoods_with_loss(data, loss, lambda_, threads=threads, **settings),
                          rule, zero_tol)


def fit_graph(data: Dataset, lambda_: float, nu: Union[ShapeParam, int],
              rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
              threads: int = 1, **settings) -> Graph:
    return fit_graph_with_loss(data, lambda_, PowerLoss(nu), rule, zero_tol, threads, **settings)


def _neighborhood_paths(data: Dataset, loss: SmoothLoss, lambdas: np.ndarray, threads: int,
                        settings) -> List[List[np.ndarray]]:
    # result[k][i] is the coefficient vector of node i at lambdas[k]
    def one(i):
        X, y = design_for_node(data.values, i)
        try:
            return [r.coefficients for r in path_with_loss(X, y, loss, lambdas, **settings)]
        except SubbotinError as e:
            raise _node_error(e, i, None) from e

    per_node = parallel_map(one, range(data.p), threads)
    return [[per_node[i][k] for i in range(data.p)] for k in range(len(lambdas))]


def edge_path_with_loss(data: Dataset, loss: SmoothLoss, lambdas: Optional[Sequence[float]] = None,
                        rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
                        threads: int = 1, **settings) -> List[Tuple[float, Graph]]:
    lambdas = default_lambdas(global_lambda_max(data, loss)) if lambdas is None else np.asarray(lambdas, dtype=float)
    neighborhoods = _neighborhood_paths(data, loss, lambdas, threads, settings)
    graphs = [(float(lam), assemble_graph(nbhd, rule, zero_tol)) for lam, nbhd in zip(lambdas, neighborhoods)]
    for (lam_a, a), (lam_b, b) in zip(graphs, graphs[1:]):
        if b.edge_count < a.edge_count:
            logger.debug("edge count drops from %d to %d between lambda %.6g and %.6g", a.edge_count, b.edge_count,
                         lam_a, lam_b)
    return graphs


def edge_path(data: Dataset, nu: Union[ShapeParam, int], lambdas: Optional[Sequence[float]] = None,
              rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
              threads: int = 1, **settings) -> List[Tuple[float, Graph]]:
    """Purpose: computes the estimated graph along a descending lambda grid.

    Every node runs its own warm-started path; graphs are assembled per lambda.

    Args:
        data: a standardized dataset.
        nu: shape parameter.
        lambdas: strictly descending grid; by default 50 log-spaced values from the largest
            node-wise lambda_max down three decades.
        rule: AND or OR combination.
        zero_tol: coefficients at or below this magnitude count as zero.
        threads: worker threads for the node-wise paths.

    returns:
        (list of (float, Graph)) one pair per lambda, in grid order.
    """
    return edge_path_with_loss(data, PowerLoss(nu), lambdas, rule, zero_tol, threads, **settings)


def _closeness(target: int):
    # closest count, then fewer edges, then larger lambda
    return lambda candidate: (abs(candidate[1].edge_count - target), candidate[1].edge_count, -candidate[0])


def oracle_tune_with_loss(data: Dataset, loss: SmoothLoss, target_edges: int,
                          rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
                          threads: int = 1, lambdas: Optional[Sequence[float]] = None,
                          bisection_depth: int = BISECTION_DEPTH, **settings) -> Tuple[float, Graph]:
    if target_edges < 0:
        raise InvalidParameterError(f"target edge count can't be negative, got {target_edges}")
    lambdas = default_lambdas(global_lambda_max(data, loss)) if lambdas is None else np.asarray(lambdas, dtype=float)
    neighborhoods = _neighborhood_paths(data, loss, lambdas, threads, settings)
    candidates = [(float(lam), assemble_graph(nbhd, rule, zero_tol)) for lam, nbhd in zip(lambdas, neighborhoods)]
    best = min(candidates, key=_closeness(target_edges))
    if best[1].edge_count == target_edges:
        return best

    # first adjacent grid pair whose counts straddle the target
    for k in range(len(candidates) - 1):
        low, high = candidates[k][1].edge_count, candidates[k + 1][1].edge_count
        if low < target_edges < high:
            break
    else:
        return best

    lam_hi, lam_lo = float(lambdas[k]), float(lambdas[k + 1])
    warm = neighborhoods[k]
    for _ in range(bisection_depth):
        if lam_lo > 0:
            mid = float(np.sqrt(lam_hi * lam_lo))
        else:
            mid = lam_hi / 2
        nbhd = fit_neighborhoods_with_loss(data, loss, mid, warm, threads, **settings)
        graph = assemble_graph(nbhd, rule, zero_tol)
        candidates.append((mid, graph))
        if graph.edge_count == target_edges:
            break
        if graph.edge_count < target_edges:
            lam_hi, warm = mid, nbhd
        else:
            lam_lo = mid
    return min(candidates, key=_closeness(target_edges))


def oracle_tune(data: Dataset, nu: Union[ShapeParam, int], target_edges: int,
                rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, zero_tol: float = ZERO_TOL,
                threads: int = 1, lambdas: Optional[Sequence[float]] = None,
                bisection_depth: int = BISECTION_DEPTH, **settings) -> Tuple[float, Graph]:
    """Purpose: picks the lambda whose graph has the edge count closest to a known target.

    Scans the lambda grid, then bisects in log-lambda between the first pair of adjacent grid
    points whose counts straddle the target. Ties go to fewer edges, then to the larger lambda.

    Args:
        data: a standardized dataset.
        nu: shape parameter.
        target_edges: number of edges to match, usually the true edge count.
        rule: AND or OR combination.
        lambdas: grid to scan instead of the default one.
        bisection_depth: extra fits allowed between the straddling grid points.

    returns:
        (float, Graph) the chosen lambda and its graph.
    """
    return oracle_tune_with_loss(data, PowerLoss(nu), target_edges, rule, zero_tol, threads, lambdas,
                                 bisection_depth, **settings)
