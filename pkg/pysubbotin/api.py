from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .bench import PRESETS, Scenario, generate
from .constants.constants import STABILITY_REPLICATES, STABILITY_THRESHOLD_SUBBOTIN, ZERO_TOL
from .core import Dataset, Graph, ShapeParam, as_shape, standardize
from .errors import InvalidParameterError
from .estimator import DEFAULT_COMBINATION, CombinationRule, assemble_graph, coefficient_matrix, fit_neighborhoods, \
    oracle_tune
from .simgen import GraphKind
from .stability import StabilityChoice, tune

_PRESET_FOR_SCENARIO = {Scenario.SUBBOTIN: "table1", Scenario.BLOCK_MAXIMA: "table2", Scenario.POT: "table3"}


def _as_dataset(data: Union[Dataset, np.ndarray]) -> Dataset:
    if isinstance(data, Dataset):
        return data if data.standardized else standardize(data)
    return standardize(Dataset(np.asarray(data, dtype=float)))


def simulate(scenario: Union[Scenario, str] = Scenario.SUBBOTIN, p: int = 30, n: int = 2000, nu: int = 8,
             graph: Union[GraphKind, str] = GraphKind.SMALL_WORLD_CLIQUES, seed: int = 0, **overrides) -> Tuple[Dataset, Graph]:
    scenario = Scenario(scenario)
    config = PRESETS[_PRESET_FOR_SCENARIO[scenario]](p=p, n=n, replicates=1, seed=seed, nu_true=nu,
                                                     graph_kind=GraphKind(graph), **overrides)
    return generate(config, seed)


def estimate_graph(data: Union[Dataset, np.ndarray], nu: Union[ShapeParam, int] = 8, lambda_: Optional[float] = None,
                   rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, target_edges: Optional[int] = None,
                   zero_tol: float = ZERO_TOL, threads: int = 1) -> Tuple[float, Graph]:
    """Purpose: estimates the conditional-independence graph of a dataset.

    With lambda_ given, fits once. Without it, lambda is matched to target_edges when that is
    known, and chosen by stability selection otherwise.

    Args:
        data: a Dataset or an (n, p) array; raw data is standardized first.
        nu: shape parameter.
        lambda_: l1 penalty weight.
        rule: AND or OR combination.
        target_edges: edge count to match when lambda_ is omitted.

    returns:
        (float, Graph) the lambda used and the estimated graph.
    """
    data = _as_dataset(data)
    if lambda_ is not None:
        if target_edges is not None:
            raise InvalidParameterError("give either lambda_ or target_edges, not both")
        neighborhoods = fit_neighborhoods(data, lambda_, nu, threads)
        return float(lambda_), assemble_graph(neighborhoods, rule, zero_tol)
    if target_edges is not None:
        return oracle_tune(data, nu, target_edges, rule, zero_tol, threads)
    choice = tune(data, [nu], rule=rule, zero_tol=zero_tol, threads=threads)
    return choice.lambda_, choice.graph


def estimate_graph_stability(data: Union[Dataset, np.ndarray], nu_grid: Sequence[Union[ShapeParam, int]] = (4, 6, 8),
                             lambda_grid: Optional[Sequence[float]] = None, replicates: int = STABILITY_REPLICATES,
                             threshold: float = STABILITY_THRESHOLD_SUBBOTIN,
                             rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, seed: int = 0,
                             threads: int = 1) -> StabilityChoice:
    return tune(_as_dataset(data), nu_grid, lambda_grid, replicates, threshold, rule, seed, threads=threads)


class GraphEstimator:
    def __init__(self, nu: Union[ShapeParam, int] = 8, lambda_: Optional[float] = None,
                 rule: Union[CombinationRule, str] = DEFAULT_COMBINATION, target_edges: Optional[int] = None,
                 zero_tol: float = ZERO_TOL, threads: int = 1):
        self.nu = as_shape(nu)
        self.rule = CombinationRule.parse(rule)
        self.config = (lambda_, self.rule, target_edges, zero_tol, threads)
        self._lambda = None
        self._coefficients = None

    def __call__(self, data: Union[Dataset, np.ndarray]) -> Graph:
        lambda_, rule, target_edges, zero_tol, threads = self.config
        data = _as_dataset(data)
        lam, graph = estimate_graph(data, self.nu, lambda_, rule, target_edges, zero_tol, threads)
        self._lambda = lam
        self._coefficients = coefficient_matrix(fit_neighborhoods(data, lam, self.nu, threads))
        return graph

    def get_lambda(self) -> float:
        return self._lambda

    def get_coefficients(self) -> np.ndarray:
        return self._coefficients
