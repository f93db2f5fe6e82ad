# Domain types of the Subbotin graphical model and its densities.
#
# sign convention: ParamMatrix stores the matrix whose positive definiteness decides normalizability,
#   so an off-diagonal entry holds the negated conditional weight of the node-wise conditionals.
#   everything that needs the weights goes through ParamMatrix.weight / conditional_weights.
#
# node indices are 0-based everywhere.

from dataclasses import dataclass, field
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import special

from .constants.constants import PD_RELATIVE_THRESHOLD
from .errors import DegenerateColumnError, DomainError, InvalidParameterError, NormalizabilityError

ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]]]


@dataclass(frozen=True)
class ShapeParam:
    nu: int

    def __post_init__(self):
        nu = self.nu
        if isinstance(nu, ShapeParam):
            nu = nu.nu
        if isinstance(nu, float) and nu.is_integer():
            nu = int(nu)
        if isinstance(nu, bool) or not isinstance(nu, (int, np.integer)):
            raise InvalidParameterError(f"shape parameter must be an even integer, got {self.nu!r}")
        if nu < 2 or nu % 2 != 0:
            raise InvalidParameterError(f"shape parameter must be an even integer >= 2, got {nu}")
        object.__setattr__(self, 'nu', int(nu))

    def __int__(self):
        return self.nu

    def __str__(self):
        return str(self.nu)


def as_shape(nu: Union[ShapeParam, int]) -> ShapeParam:
    return nu if isinstance(nu, ShapeParam) else ShapeParam(nu)


@dataclass(frozen=True)
class Graph:
    p: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.p < 0:
            raise InvalidParameterError(f"node count can't be negative, got {self.p}")
        canonical = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidParameterError(f"self-loop on node {i} is not allowed")
            if not (0 <= i < self.p and 0 <= j < self.p):
                raise InvalidParameterError(f"edge ({i}, {j}) is out of range for {self.p} nodes")
            canonical.add((min(i, j), max(i, j)))
        object.__setattr__(self, 'p', int(self.p))
        object.__setattr__(self, 'edges', frozenset(canonical))

    def __len__(self):
        return len(self.edges)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> List[int]:
        return sorted([b if a == i else a for a, b in self.edges if i in (a, b)])

    def sorted_edges(self) -> List[Tuple[int, int]]:
        return sorted(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.p, self.p), dtype=bool)
        for i, j in self.edges:
            adj[i, j] = adj[j, i] = True
        return adj

    def relabel(self, permutation: Sequence[int]) -> "Graph":
        # node k of this graph becomes node permutation[k]
        return Graph(self.p, frozenset((permutation[i], permutation[j]) for i, j in self.edges))

    def is_subgraph_of(self, other: "Graph") -> bool:
        return self.p == other.p and self.edges <= other.edges

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.p))
        g.add_edges_from(self.sorted_edges())
        return g

    @staticmethod
    def from_networkx(g: nx.Graph, p: Optional[int] = None) -> "Graph":
        return Graph(g.number_of_nodes() if p is None else p, frozenset(g.edges()))

    @staticmethod
    def from_adjacency(adjacency: ArrayLike) -> "Graph":
        adj = np.asarray(adjacency)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InvalidParameterError(f"adjacency must be square, got shape {adj.shape}")
        mask = adj != 0
        rows, cols = np.nonzero(np.triu(mask | mask.T, k=1))
        return Graph(adj.shape[0], frozenset(zip(rows.tolist(), cols.tolist())))


@dataclass(frozen=True, eq=False)
class ParamMatrix:
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidParameterError(f"parameter matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("parameter matrix has non-finite entries")
        if not _is_symmetric(values):
            raise InvalidParameterError("parameter matrix must be symmetric")
        if np.any(np.diag(values) <= 0):
            raise InvalidParameterError("parameter matrix diagonal must be strictly positive")
        values = (values + values.T) / 2
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)

    def weight(self, i: int, j: int) -> float:
        # conditional weight theta_ij of the node-wise conditional of node i
        if i == j:
            return float(self.values[i, i])
        return -float(self.values[i, j])

    def conditional_weights(self) -> np.ndarray:
        weights = -self.values.copy()
        np.fill_diagonal(weights, 0.0)
        return weights

    def support(self, zero_tol: float = 0.0) -> Graph:
        off = np.abs(self.values) > zero_tol
        np.fill_diagonal(off, False)
        return Graph.from_adjacency(off)

    @staticmethod
    def from_conditional_weights(weights: ArrayLike) -> "ParamMatrix":
        """Purpose: builds a parameter matrix from node-wise conditional weights.

        Args:
            weights: p x p symmetric matrix; the diagonal holds theta_ii and the off-diagonal
                entries hold theta_ij as they appear in the conditional location sum.

        returns:
            (ParamMatrix) the matrix in normalizability sign convention.
        """
        w = np.array(weights, dtype=float)
        values = -w
        np.fill_diagonal(values, np.diag(w))
        return ParamMatrix(values)


@dataclass(frozen=True, eq=False)
class Dataset:
    values: np.ndarray
    standardized: bool = False
    column_means: Optional[np.ndarray] = None
    column_sds: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise InvalidParameterError(f"dataset must be a 2-D matrix, got {values.ndim} dimensions")
        if not np.all(np.isfinite(values)):
            raise DomainError("dataset has non-finite entries")
        if self.standardized and values.shape[0] >= 2:
            means = values.mean(axis=0)
            sds = values.std(axis=0, ddof=1)
            if np.any(np.abs(means) > 1e-8) or np.any(np.abs(sds - 1) > 1e-8):
                raise InvalidParameterError("dataset flagged standardized but columns are not centered and scaled")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)
        for name in ('column_means', 'column_sds'):
            stat = getattr(self, name)
            if stat is not None:
                stat = np.array(stat, dtype=float)
                stat.flags.writeable = False
                object.__setattr__(self, name, stat)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def destandardize(self) -> np.ndarray:
        if self.column_means is None or self.column_sds is None:
            return self.values.copy()
        return self.values * self.column_sds + self.column_means

    def permute_columns(self, permutation: Sequence[int]) -> "Dataset":
        # new column permutation[k] is old column k
        inverse = np.argsort(np.asarray(permutation))
        return Dataset(self.values[:, inverse], self.standardized,
                       None if self.column_means is None else self.column_means[inverse],
                       None if self.column_sds is None else self.column_sds[inverse])


def _is_symmetric(values: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    return bool(np.allclose(values, values.T, rtol=0.0, atol=1e-12 * scale))


def _as_vector(x: ArrayLike, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p:
        raise InvalidParameterError(f"observation has {x.shape[-1]} entries, expected {p}")
    return x


def log_normalizer(nu: Union[ShapeParam, int]) -> float:
    # log of the integral of exp(-|x|^nu) over the real line
    nu = as_shape(nu).nu
    return float(np.log(2.0) + special.gammaln(1.0 + 1.0 / nu))


def univariate_log_density(x: float, nu: Union[ShapeParam, int]) -> float:
    if not np.isfinite(x):
        raise DomainError(f"density is undefined at non-finite x={x}")
    nu = as_shape(nu).nu
    return float(-np.abs(x) ** nu - log_normalizer(nu))


def subbotin_moment(k: int, nu: Union[ShapeParam, int]) -> float:
    # E|X|^k of the standard Subbotin law
    nu = as_shape(nu).nu
    return float(np.exp(special.gammaln((k + 1.0) / nu) - special.gammaln(1.0 / nu)))


def conditional_location(i: int, x: ArrayLike, theta: ParamMatrix) -> Tuple[float, float]:
    x = _as_vector(x, theta.p)
    theta_ii = theta.values[i, i]
    if theta_ii <= 0:
        raise InvalidParameterError(f"theta_ii must be positive for node {i}")
    others = x.copy()
    others[i] = 0.0
    return float(-theta.values[i] @ others / theta_ii), float(1.0 / theta_ii)


def _q_terms(x: np.ndarray, theta: ParamMatrix, nu: int) -> np.ndarray:
    # per-node summands of Q, x has shape (..., p)
    lower = np.tril(theta.conditional_weights(), k=-1)
    b = x @ lower.T
    a = x * theta.diagonal
    return -(a - b) ** nu + b ** nu


def log_unnormalized_density(x: ArrayLike, theta: ParamMatrix, nu: Union[ShapeParam, int]):
    """Purpose: evaluates Q(x) = log(P(x) / P(0)) of the joint Subbotin graphical model.

    The sum runs over nodes in column order and each node only sees its predecessors,
    so the value depends on the node labelling unless theta makes it invariant.

    Args:
        x: an observation of length p, or a stack of observations with last axis p.
        theta: the parameter matrix.
        nu: the shape parameter.

    returns:
        (float) Q(x), or an array of values for stacked observations.
    """
    x = _as_vector(x, theta.p)
    total = _q_terms(x, theta, as_shape(nu).nu).sum(axis=-1)
    return float(total) if np.ndim(total) == 0 else total


def q_component(i: int, x: ArrayLike, theta: ParamMatrix, nu: Union[ShapeParam, int]) -> float:
    x = _as_vector(x, theta.p)
    nu = as_shape(nu).nu
    b = sum(theta.weight(i, j) * x[j] for j in range(i))
    a = theta.values[i, i] * x[i]
    return float(-(a - b) ** nu + b ** nu)


def check_normalizable(theta: Union[ParamMatrix, ArrayLike]) -> bool:
    if isinstance(theta, ParamMatrix):
        values = theta.values
    else:
        values = np.array(theta, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise InvalidParameterError(f"parameter matrix must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidParameterError("parameter matrix has non-finite entries")
        if not _is_symmetric(values):
            raise InvalidParameterError("parameter matrix must be symmetric")
    max_diag = float(np.max(np.diag(values)))
    if max_diag <= 0:
        return False
    min_eig = float(np.linalg.eigvalsh((values + values.T) / 2)[0])
    return min_eig > PD_RELATIVE_THRESHOLD * max_diag


def precision_from_theta(theta: ParamMatrix, nu: Union[ShapeParam, int]) -> np.ndarray:
    if not check_normalizable(theta):
        raise NormalizabilityError("theta is not positive definite, the joint distribution can't be normalized")
    nu = as_shape(nu).nu
    ratio = np.exp(special.gammaln(1.0 / nu) - special.gammaln(3.0 / nu))
    return ratio * theta.values


def standardize(data: Dataset) -> Dataset:
    if data.n < 2:
        raise InvalidParameterError(f"standardization needs at least 2 observations, got {data.n}")
    means = data.values.mean(axis=0)
    sds = data.values.std(axis=0, ddof=1)
    for j, sd in enumerate(sds):
        if not sd > 0:
            raise DegenerateColumnError(j)
    values = (data.values - means) / sds
    if data.column_means is not None and data.column_sds is not None:
        # compose with the earlier transform so destandardize recovers the raw scale
        means, sds = data.column_means + data.column_sds * means, data.column_sds * sds
    return Dataset(values, True, means, sds)
