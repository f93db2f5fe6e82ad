# Synthetic regimes with known ground-truth graphs: Subbotin Gibbs data, block maxima and peaks over threshold.
#
# random streams: graphs draw from make_rng(graph seed); data generators draw from make_rng(seed, 1, k)
# with k naming the purpose. Gibbs chains use one-element keys, so the streams never collide.

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import networkx as nx
import numpy as np
from scipy import stats

from .constants.constants import GEV_MEAN, HAWKES_DECAY, HAWKES_SPECTRAL_RADIUS, HAWKES_TARGET_RATE, MIN_OFFDIAGONAL, \
    PD_MARGIN, POT_THRESHOLD, REWIRE_PROB, THETA_MAGNITUDE, WEAK_CORRELATION
from .core import Dataset, Graph, ParamMatrix, ShapeParam, as_shape, check_normalizable, standardize
from .errors import DegenerateThetaError, InvalidParameterError, UnstableHawkesError
from .sampler import GibbsConfig, gibbs_sample, make_rng

logger = logging.getLogger(__name__)

_THETA_KEY = (1, 0)
_LATENT_KEY = (1, 1)
_FILLER_KEY = (1, 2)
_HAWKES_KEY = (1, 3)
_BACKGROUND_KEY = (1, 4)

# redraws of a filler row before the violating entries fall back to exact truncated draws
_MAX_REDRAWS = 50


class GraphKind(Enum):
    SMALL_WORLD_CLIQUES = "cliques"
    CHAIN = "chain"
    ERDOS_RENYI = "erdos_renyi"


class SignScheme(Enum):
    ALL_POSITIVE = "positive"
    RANDOM_SIGN = "random"


@dataclass(frozen=True)
class GraphSpec:
    kind: GraphKind
    p: int
    seed: int = 0
    cliques: int = 5
    edge_prob: float = 0.1
    rewire_prob: float = REWIRE_PROB

    def __post_init__(self):
        if not isinstance(self.kind, GraphKind):
            try:
                object.__setattr__(self, 'kind', GraphKind(self.kind))
            except ValueError:
                raise InvalidParameterError(f"unknown graph kind {self.kind!r}")
        if self.p < 1:
            raise InvalidParameterError(f"graph needs at least one node, got {self.p}")
        if self.kind is GraphKind.SMALL_WORLD_CLIQUES and not 1 <= self.cliques <= self.p:
            raise InvalidParameterError(f"clique count must be in [1, p={self.p}], got {self.cliques}")
        if self.kind is GraphKind.ERDOS_RENYI and not 0 < self.edge_prob < 1:
            raise InvalidParameterError(f"edge probability must be in (0, 1), got {self.edge_prob}")
        if not 0 <= self.rewire_prob <= 1:
            raise InvalidParameterError(f"rewiring probability must be in [0, 1], got {self.rewire_prob}")


@dataclass(frozen=True)
class ThetaSpec:
    magnitude: float = THETA_MAGNITUDE
    sign_scheme: SignScheme = SignScheme.ALL_POSITIVE
    pd_margin: float = PD_MARGIN

    def __post_init__(self):
        if not isinstance(self.sign_scheme, SignScheme):
            try:
                object.__setattr__(self, 'sign_scheme', SignScheme(self.sign_scheme))
            except ValueError:
                raise InvalidParameterError(f"unknown sign scheme {self.sign_scheme!r}")
        if not self.magnitude > 0:
            raise InvalidParameterError(f"edge magnitude must be positive, got {self.magnitude}")
        if not self.pd_margin > 0:
            raise InvalidParameterError(f"pd margin must be positive, got {self.pd_margin}")


@dataclass(frozen=True)
class HawkesParams:
    """Multivariate Hawkes process with kernel excitation * decay * exp(-decay * t) on graph edges.

    excitation is the branching ratio of one edge. When it is None it is set so that the
    branching matrix has the given spectral radius; when baseline is None the background rate
    is set so that the mean stationary event rate per node equals target_rate.
    """
    baseline: Optional[float] = None
    decay: float = HAWKES_DECAY
    excitation: Optional[float] = None
    spectral_radius: float = HAWKES_SPECTRAL_RADIUS
    target_rate: float = HAWKES_TARGET_RATE

    def __post_init__(self):
        if self.baseline is not None and not self.baseline > 0:
            raise InvalidParameterError(f"baseline rate must be positive, got {self.baseline}")
        if not self.decay > 0:
            raise InvalidParameterError(f"decay must be positive, got {self.decay}")
        if self.excitation is not None and self.excitation < 0:
            raise InvalidParameterError(f"excitation can't be negative, got {self.excitation}")
        if not 0 <= self.spectral_radius < 1:
            raise UnstableHawkesError(f"branching spectral radius must be in [0, 1), got {self.spectral_radius}")
        if not self.target_rate > 0:
            raise InvalidParameterError(f"target rate must be positive, got {self.target_rate}")

    def branching_matrix(self, graph: Graph) -> np.ndarray:
        adjacency = graph.adjacency().astype(float)
        if self.excitation is None:
            radius = _spectral_radius(adjacency)
            scale = self.spectral_radius / radius if radius > 0 else 0.0
        else:
            scale = self.excitation
        branching = scale * adjacency
        radius = _spectral_radius(branching)
        if radius >= 1:
            raise UnstableHawkesError(f"branching matrix has spectral radius {radius:.4g} >= 1")
        return branching

    def baseline_rate(self, graph: Graph) -> float:
        if self.baseline is not None:
            return self.baseline
        branching = self.branching_matrix(graph)
        amplification = np.linalg.solve(np.eye(graph.p) - branching, np.ones(graph.p))
        return float(self.target_rate / np.mean(amplification))


def _spectral_radius(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def _clique_graph(spec: GraphSpec, rng: np.random.Generator) -> Graph:
    membership = np.empty(spec.p, dtype=int)
    g = nx.Graph()
    g.add_nodes_from(range(spec.p))
    for c, nodes in enumerate(np.array_split(np.arange(spec.p), spec.cliques)):
        membership[nodes] = c
        g.add_edges_from(nx.complete_graph(nodes.tolist()).edges())

    def free_cross_pair():
        for _ in range(1000):
            i, j = rng.integers(0, spec.p, size=2)
            if membership[i] != membership[j] and not g.has_edge(i, j):
                return int(i), int(j)
        pairs = [(i, j) for i in range(spec.p) for j in range(i + 1, spec.p)
                 if membership[i] != membership[j] and not g.has_edge(i, j)]
        return pairs[rng.integers(len(pairs))] if pairs else None

    for i, j in sorted(g.edges()):
        if rng.random() < spec.rewire_prob:
            target = free_cross_pair()
            if target is not None:
                g.remove_edge(i, j)
                g.add_edge(*target)
    return Graph.from_networkx(g, spec.p)


def make_graph(spec: GraphSpec) -> Graph:
    """Purpose: builds the ground-truth graph of a benchmark scenario.

    Cliques partition the nodes into near-equal groups that are fully connected, then every
    within-clique edge moves to a free cross-clique pair with probability rewire_prob, which
    keeps the edge count. A chain links i to i + 1; Erdos-Renyi includes each pair independently.

    Args:
        spec: graph kind, size, seed and kind-specific parameters.

    returns:
        (Graph) the truth graph, deterministic per seed.
    """
    rng = make_rng(spec.seed)
    if spec.kind is GraphKind.SMALL_WORLD_CLIQUES:
        return _clique_graph(spec, rng)
    if spec.kind is GraphKind.CHAIN:
        return Graph.from_networkx(nx.path_graph(spec.p), spec.p)
    return Graph.from_networkx(nx.gnp_random_graph(spec.p, spec.edge_prob, seed=int(rng.integers(2 ** 32))),
                               spec.p)


def make_theta(graph: Graph, spec: ThetaSpec, rng: np.random.Generator) -> ParamMatrix:
    """Purpose: puts conditional weights of the given magnitude on the graph edges and repairs positive definiteness.

    With ALL_POSITIVE every conditional weight is +magnitude; RANDOM_SIGN flips each with
    probability 1/2. The diagonal is one. When the smallest eigenvalue is at or below
    pd_margin the diagonal is raised to reach it and the matrix is rescaled back to a unit
    diagonal.

    Args:
        graph: the truth graph.
        spec: magnitude, sign scheme and margin.
        rng: random stream for the signs.

    returns:
        (ParamMatrix) normalizable, unit diagonal, support equal to the graph edges.

    Raises:
        DegenerateThetaError: the repair shrank an edge weight below the minimum off-diagonal.
    """
    weights = np.zeros((graph.p, graph.p))
    for i, j in graph.sorted_edges():
        sign = 1.0
        if spec.sign_scheme is SignScheme.RANDOM_SIGN and rng.random() < 0.5:
            sign = -1.0
        weights[i, j] = weights[j, i] = sign * spec.magnitude
    values = np.eye(graph.p) - weights

    if graph.p > 0:
        min_eig = float(np.linalg.eigvalsh(values)[0])
        if min_eig <= spec.pd_margin:
            logger.debug("repairing theta: min eigenvalue %.4g <= margin %.4g", min_eig, spec.pd_margin)
            values = values + (spec.pd_margin - min_eig) * np.eye(graph.p)
            d = 1.0 / np.sqrt(np.diag(values))
            values = values * np.outer(d, d)

    for i, j in graph.sorted_edges():
        if abs(values[i, j]) < MIN_OFFDIAGONAL:
            raise DegenerateThetaError(
                f"repair shrank edge ({i}, {j}) to {values[i, j]:.3g}; lower the magnitude {spec.magnitude}")
    theta = ParamMatrix(values)
    if not check_normalizable(theta):
        raise DegenerateThetaError("repaired theta is still not positive definite")
    return theta


def _check_p(p: int, gspec: GraphSpec):
    if gspec.p != p:
        raise InvalidParameterError(f"graph spec has {gspec.p} nodes but {p} were requested")


def gen_subbotin(p: int, n: int, nu: Union[ShapeParam, int], gspec: GraphSpec, tspec: ThetaSpec = ThetaSpec(),
                 seed: int = 0, **gibbs) -> Tuple[Dataset, Graph]:
    # gibbs: burn_in / thinning overrides for the sampler
    _check_p(p, gspec)
    graph = make_graph(gspec)
    theta = make_theta(graph, tspec, make_rng(seed, *_THETA_KEY))
    data = gibbs_sample(theta, as_shape(nu), GibbsConfig(n_samples=n, seed=seed, **gibbs))
    return standardize(data), graph


def weak_correlation_cov(p: int, rho: float = WEAK_CORRELATION) -> np.ndarray:
    return (1 - rho) * np.eye(p) + rho * np.ones((p, p))


def truncated_weak_gaussian(caps: np.ndarray, rng: np.random.Generator, rho: float = WEAK_CORRELATION) -> np.ndarray:
    """Purpose: draws rows of the weak-correlation Gaussian with every entry strictly below its cap.

    Rows with a violation are redrawn whole; entries still violating after the redraw budget
    are replaced by exact draws of the standard normal truncated above at the cap.

    Args:
        caps: (rows, p) upper bounds.
        rng: random stream.
        rho: common off-diagonal correlation.

    returns:
        (np.ndarray) array of the caps' shape.
    """
    rows, p = caps.shape
    cov = weak_correlation_cov(p, rho)
    out = rng.multivariate_normal(np.zeros(p), cov, size=rows, method='cholesky')
    for _ in range(_MAX_REDRAWS):
        bad = np.any(out >= caps, axis=1)
        if not np.any(bad):
            return out
        out[bad] = rng.multivariate_normal(np.zeros(p), cov, size=int(bad.sum()), method='cholesky')
    violating = out >= caps
    if np.any(violating):
        upper = caps[violating]
        draws = stats.truncnorm.rvs(-np.inf, upper, random_state=rng)
        out[violating] = np.minimum(draws, np.nextafter(upper, -np.inf))
    return out


def gumbel_location(mean: float = GEV_MEAN) -> float:
    # unit-scale Gumbel with the requested mean
    return float(mean - np.euler_gamma)


def gen_block_maxima(p: int, n_blocks: int, block_size: int, gspec: GraphSpec, tspec: ThetaSpec = ThetaSpec(),
                     seed: int = 0, rho: float = WEAK_CORRELATION) -> Tuple[Dataset, Graph]:
    """Purpose: generates data whose per-block column maxima follow a Gumbel copula model of a sparse Gaussian.

    One latent row per block is drawn from a zero-mean Gaussian whose precision is the generated
    theta, pushed through the normal CDF and the unit Gumbel quantile with mean GEV_MEAN, and
    placed at a uniform position inside its block. The other block rows come from the
    weak-correlation Gaussian truncated below the block's maxima.

    Args:
        p: node count.
        n_blocks: number of blocks.
        block_size: rows per block, at least 2.
        gspec: truth graph spec.
        tspec: theta spec for the latent precision.
        seed: data seed.
        rho: filler correlation.

    returns:
        (Dataset, Graph) n_blocks * block_size raw rows and the truth graph.
    """
    _check_p(p, gspec)
    if block_size < 2:
        raise InvalidParameterError(f"block size must be at least 2, got {block_size}")
    if n_blocks < 1:
        raise InvalidParameterError(f"need at least one block, got {n_blocks}")
    graph = make_graph(gspec)
    theta = make_theta(graph, tspec, make_rng(seed, *_THETA_KEY))
    cov = np.linalg.inv(theta.values)
    cov = (cov + cov.T) / 2

    latent_rng = make_rng(seed, *_LATENT_KEY)
    z = latent_rng.multivariate_normal(np.zeros(p), cov, size=n_blocks, method='cholesky')
    u = stats.norm.cdf(z / np.sqrt(np.diag(cov)))
    maxima = stats.gumbel_r.ppf(u, loc=gumbel_location())
    positions = latent_rng.integers(0, block_size, size=n_blocks)

    filler_rng = make_rng(seed, *_FILLER_KEY)
    fillers = truncated_weak_gaussian(np.repeat(maxima, block_size - 1, axis=0), filler_rng, rho)

    values = np.empty((n_blocks * block_size, p))
    is_max = np.zeros(n_blocks * block_size, dtype=bool)
    is_max[np.arange(n_blocks) * block_size + positions] = True
    values[is_max] = maxima
    values[~is_max] = fillers
    return Dataset(values), graph


def simulate_hawkes(branching: np.ndarray, baseline: float, decay: float, horizon: float,
                    rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Purpose: simulates a multivariate Hawkes process with exponential kernels by Ogata thinning.

    Node j's intensity is baseline + sum over past events (t_k, m_k) of
    branching[j, m_k] * decay * exp(-decay * (t - t_k)). Between events the total intensity only
    decays, so its value right after the last event bounds it until the next candidate.

    Args:
        branching: p x p branching matrix, entry (j, m) is the mean number of node-j children of a node-m event.
        baseline: background rate per node.
        decay: kernel decay rate.
        horizon: simulate on [0, horizon).
        rng: random stream.

    returns:
        (np.ndarray, np.ndarray) event times and the node of each event.
    """
    p = branching.shape[0]
    times, nodes = [], []
    excitation = np.zeros(p)
    t = 0.0
    while True:
        bound = p * baseline + excitation.sum()
        wait = rng.exponential(1.0 / bound)
        t += wait
        if t >= horizon:
            break
        excitation *= np.exp(-decay * wait)
        intensity = baseline + excitation
        total = intensity.sum()
        if rng.random() * bound <= total:
            node = int(rng.choice(p, p=intensity / total))
            times.append(t)
            nodes.append(node)
            excitation += branching[:, node] * decay
    return np.asarray(times), np.asarray(nodes, dtype=int)


def positive_gumbel(rng: np.random.Generator, size: int) -> np.ndarray:
    # standard Gumbel conditioned on being positive, by inverting its CDF on (exp(-1), 1)
    u = rng.uniform(np.exp(-1.0), 1.0, size=size)
    return -np.log(-np.log(u))


def gen_pot(p: int, n: int, threshold: float = POT_THRESHOLD, gspec: Optional[GraphSpec] = None, seed: int = 0,
            hawkes: HawkesParams = HawkesParams(), rho: float = WEAK_CORRELATION) -> Tuple[Dataset, Graph]:
    """Purpose: generates peaks-over-threshold data whose extremes arrive as a Hawkes process on the truth graph.

    An event of node j at time t makes cell (floor(t), j) exceed the threshold by a positive
    Gumbel draw; several events in one cell keep the largest. Every other cell is drawn from the
    weak-correlation Gaussian truncated below the threshold.

    Args:
        p: node count.
        n: rows, the process runs on [0, n).
        threshold: extreme level, positive.
        gspec: truth graph spec, small-world cliques with default settings when omitted.
        seed: data seed.
        hawkes: process parameters.
        rho: background correlation.

    returns:
        (Dataset, Graph) n raw rows and the truth graph.

    Raises:
        UnstableHawkesError: the branching matrix has spectral radius >= 1.
    """
    if gspec is None:
        gspec = GraphSpec(GraphKind.SMALL_WORLD_CLIQUES, p, seed)
    _check_p(p, gspec)
    if not threshold > 0:
        raise InvalidParameterError(f"threshold must be positive, got {threshold}")
    if n < 1:
        raise InvalidParameterError(f"need at least one row, got {n}")
    graph = make_graph(gspec)
    branching = hawkes.branching_matrix(graph)
    baseline = hawkes.baseline_rate(graph)

    times, nodes = simulate_hawkes(branching, baseline, hawkes.decay, float(n), make_rng(seed, *_HAWKES_KEY))
    logger.debug("hawkes: %d events on %d rows (baseline %.4g)", len(times), n, baseline)

    values = truncated_weak_gaussian(np.full((n, p), float(threshold)), make_rng(seed, *_BACKGROUND_KEY), rho)
    if len(times):
        rows = np.minimum(np.floor(times).astype(int), n - 1)
        extremes = threshold + positive_gumbel(make_rng(seed, *_HAWKES_KEY, 1), len(times))
        is_extreme = np.zeros((n, p), dtype=bool)
        is_extreme[rows, nodes] = True
        values[is_extreme] = -np.inf
        np.maximum.at(values, (rows, nodes), extremes)
    return Dataset(values), graph
