import hashlib
import logging
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .constants.constants import GIBBS_BURN_IN, GIBBS_THINNING, N_LAMBDAS, POT_THRESHOLD, STABILITY_REPLICATES, \
    STABILITY_THRESHOLD_EXTREMES, STABILITY_THRESHOLD_SUBBOTIN, WEAK_CORRELATION
from .core import Dataset, Graph, standardize
from .baselines import GAUSSIAN_NU, copula_blockmax_graph, copula_transform, quantile_graph, quantile_oracle_tune
from .csv_wrapper import serialize_metadata, serialize_results, serialize_summary, to_jsonable, write_text
from .errors import InvalidParameterError, SubbotinError, error_category
from .estimator import DEFAULT_COMBINATION, CombinationRule, global_lambda_max, oracle_tune, parallel_map
from .simgen import GraphKind, GraphSpec, HawkesParams, ThetaSpec, gen_block_maxima, gen_pot, gen_subbotin
from .solver import PowerLoss, SmoothedCheckLoss, default_lambdas
from .stability import tune, tune_lambda_for_fitter

logger = logging.getLogger(__name__)


class Scenario(Enum):
    SUBBOTIN = "subbotin"
    BLOCK_MAXIMA = "block_maxima"
    POT = "pot"


class MethodKind(Enum):
    SUBBOTIN = "subbotin"
    GAUSSIAN_NS = "gaussian_ns"
    QUANTILE = "quantile"
    COPULA = "copula"


@dataclass(frozen=True)
class MethodSpec:
    name: str
    kind: MethodKind
    nu: Optional[int] = None
    nu_grid: Tuple[int, ...] = ()
    tau: Optional[float] = None
    block_size: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, MethodKind):
            try:
                object.__setattr__(self, 'kind', MethodKind(self.kind))
            except ValueError:
                raise InvalidParameterError(f"unknown method kind {self.kind!r}")
        if not self.name or ',' in self.name:
            raise InvalidParameterError(f"method name must be non-empty and comma-free, got {self.name!r}")
        object.__setattr__(self, 'nu_grid', tuple(self.nu_grid))
        if self.kind is MethodKind.SUBBOTIN and self.nu is None and not self.nu_grid:
            raise InvalidParameterError(f"method {self.name}: subbotin needs nu or nu_grid")
        if self.kind is MethodKind.QUANTILE and (self.tau is None or not 0 < self.tau < 1):
            raise InvalidParameterError(f"method {self.name}: quantile level must be in (0, 1), got {self.tau}")
        if self.kind is MethodKind.COPULA and (self.block_size is None or self.block_size < 1):
            raise InvalidParameterError(f"method {self.name}: copula needs a positive block_size")

    @property
    def shapes(self) -> Tuple[int, ...]:
        return self.nu_grid or (self.nu,)


@dataclass(frozen=True)
class OracleTuning:
    # lambda matched to the true edge count
    n_lambdas: int = N_LAMBDAS


@dataclass(frozen=True)
class StabilityTuning:
    threshold: Optional[float] = None
    replicates: int = STABILITY_REPLICATES
    n_lambdas: int = 10
    mean_block_len: Optional[float] = None

    def __post_init__(self):
        if self.threshold is not None and not 0 < self.threshold <= 1:
            raise InvalidParameterError(f"stability threshold must be in (0, 1], got {self.threshold}")
        if self.replicates < 2:
            raise InvalidParameterError(f"stability needs at least 2 replicates, got {self.replicates}")
        if self.n_lambdas < 1:
            raise InvalidParameterError(f"lambda grid needs at least one point, got {self.n_lambdas}")


Tuning = Union[OracleTuning, StabilityTuning]


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    p: int
    n: int
    methods: Tuple[MethodSpec, ...]
    tuning: Tuning = OracleTuning()
    replicates: int = 1
    seed: int = 0
    nu_true: int = 8
    graph_kind: GraphKind = GraphKind.SMALL_WORLD_CLIQUES
    cliques: int = 5
    edge_prob: float = 0.1
    theta: ThetaSpec = ThetaSpec()
    hawkes: HawkesParams = HawkesParams()
    threshold: float = POT_THRESHOLD
    block_size: int = 10
    burn_in: int = GIBBS_BURN_IN
    thinning: int = GIBBS_THINNING
    rule: CombinationRule = DEFAULT_COMBINATION
    threads: int = 1
    record_wall_time: bool = True
    output_path: Optional[str] = None

    def __post_init__(self):
        for name, enum in (('scenario', Scenario), ('graph_kind', GraphKind), ('rule', CombinationRule)):
            value = getattr(self, name)
            if not isinstance(value, enum):
                try:
                    object.__setattr__(self, name, enum(str(value).lower()))
                except ValueError:
                    raise InvalidParameterError(f"unknown {name} {value!r}")
        object.__setattr__(self, 'methods', tuple(self.methods))
        if self.replicates < 1:
            raise InvalidParameterError(f"replicates must be positive, got {self.replicates}")
        if not self.methods:
            raise InvalidParameterError("experiment needs at least one method")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise InvalidParameterError(f"method names must be unique, got {names}")
        if self.p < 2 or self.n < 2:
            raise InvalidParameterError(f"need p >= 2 and n >= 2, got p={self.p}, n={self.n}")
        if self.scenario is Scenario.BLOCK_MAXIMA and self.n < self.block_size:
            raise InvalidParameterError(f"n={self.n} holds no block of size {self.block_size}")
        if self.threads < 1:
            raise InvalidParameterError(f"threads must be at least 1, got {self.threads}")

    def graph_spec(self, seed: int) -> GraphSpec:
        return GraphSpec(self.graph_kind, self.p, seed, self.cliques, self.edge_prob)

    def stability_threshold(self) -> float:
        if isinstance(self.tuning, StabilityTuning) and self.tuning.threshold is not None:
            return self.tuning.threshold
        if self.scenario is Scenario.SUBBOTIN:
            return STABILITY_THRESHOLD_SUBBOTIN
        return STABILITY_THRESHOLD_EXTREMES


@dataclass(frozen=True)
class ResultRow:
    scenario: Scenario
    method: str
    replicate: int
    f1: float
    tpr: float
    fdr: float
    selected_lambda: Optional[float]
    selected_nu: Optional[int]
    edge_count: int
    wall_time_ms: float
    seed: int
    status: str = "ok"


@dataclass(frozen=True)
class SummaryRow:
    method: str
    mean_f1: float
    sd_f1: float
    mean_tpr: float
    mean_fdr: float
    replicates: int


def f1_score(estimate: Graph, truth: Graph) -> Tuple[float, float, float]:
    """Purpose: scores an estimated edge set against the true one.

    Args:
        estimate: the estimated graph.
        truth: the true graph over the same nodes.

    returns:
        (float, float, float) f1, true positive rate and false discovery rate. An empty estimate
            of an empty truth scores (1, 1, 0); an empty estimate of a non-empty truth scores
            f1 = 0 with fdr 0; a non-empty estimate of an empty truth scores f1 = 0 with fdr 1.
    """
    if estimate.p != truth.p:
        raise InvalidParameterError(f"estimate has {estimate.p} nodes, truth has {truth.p}")
    tp = len(estimate.edges & truth.edges)
    n_est, n_true = estimate.edge_count, truth.edge_count
    if n_est == 0 and n_true == 0:
        return 1.0, 1.0, 0.0
    precision = tp / n_est if n_est else 0.0
    recall = tp / n_true if n_true else 0.0
    fdr = 1.0 - precision if n_est else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return f1, recall, fdr


def replicate_seed(seed: int, scenario: Scenario, replicate: int) -> int:
    digest = hashlib.sha256(f"{seed}:{scenario.value}:{replicate}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def generate(config: ExperimentConfig, seed: int) -> Tuple[Dataset, Graph]:
    # raw data of one replicate; the Subbotin regime comes back standardized
    gspec = config.graph_spec(seed)
    if config.scenario is Scenario.SUBBOTIN:
        return gen_subbotin(config.p, config.n, config.nu_true, gspec, config.theta, seed,
                            burn_in=config.burn_in, thinning=config.thinning)
    if config.scenario is Scenario.BLOCK_MAXIMA:
        return gen_block_maxima(config.p, config.n // config.block_size, config.block_size, gspec, config.theta,
                                seed)
    return gen_pot(config.p, config.n, config.threshold, gspec, seed, config.hawkes)


def _oracle(method: MethodSpec, raw: Dataset, data: Dataset, truth: Graph,
            config: ExperimentConfig) -> Tuple[float, Optional[int], Graph]:
    n_lambdas = config.tuning.n_lambdas
    rule = config.rule
    target = truth.edge_count
    if method.kind is MethodKind.SUBBOTIN or method.kind is MethodKind.GAUSSIAN_NS:
        shapes = method.shapes if method.kind is MethodKind.SUBBOTIN else (GAUSSIAN_NU,)
        candidates = []
        for nu in shapes:
            lambdas = default_lambdas(global_lambda_max(data, PowerLoss(nu)), n_lambdas)
            lam, graph = oracle_tune(data, nu, target, rule, lambdas=lambdas)
            candidates.append((lam, nu, graph))
        # closest edge count, then best f1 against the truth, then the smaller nu
        return min(candidates, key=lambda c: (abs(c[2].edge_count - target), -f1_score(c[2], truth)[0], c[1]))
    if method.kind is MethodKind.QUANTILE:
        lambdas = default_lambdas(global_lambda_max(data, SmoothedCheckLoss(method.tau)), n_lambdas)
        lam, graph = quantile_oracle_tune(data, method.tau, target, rule, lambdas=lambdas)
        return lam, None, graph
    scores = standardize(copula_transform(raw, method.block_size))
    lambdas = default_lambdas(global_lambda_max(scores, PowerLoss(GAUSSIAN_NU)), n_lambdas)
    lam, graph = oracle_tune(scores, GAUSSIAN_NU, target, rule, lambdas=lambdas)
    return lam, None, graph


def _stability(method: MethodSpec, raw: Dataset, data: Dataset, seed: int,
               config: ExperimentConfig) -> Tuple[float, Optional[int], Graph]:
    tuning = config.tuning
    threshold = config.stability_threshold()
    common = dict(replicates=tuning.replicates, threshold=threshold, seed=seed, mean_block_len=tuning.mean_block_len)
    if method.kind is MethodKind.SUBBOTIN or method.kind is MethodKind.GAUSSIAN_NS:
        shapes = method.shapes if method.kind is MethodKind.SUBBOTIN else (GAUSSIAN_NU,)
        choice = tune(data, shapes, rule=config.rule, n_lambdas=tuning.n_lambdas, **common)
        return choice.lambda_, choice.nu.nu, choice.graph

    rule = config.rule
    if method.kind is MethodKind.QUANTILE:
        tau = method.tau
        lambdas = default_lambdas(global_lambda_max(data, SmoothedCheckLoss(tau)), tuning.n_lambdas)

        def make_fitter(lam: float) -> Callable[[Dataset], Graph]:
            return lambda resample: quantile_graph(standardize(resample), tau, lam, rule)
        lam, graph, _ = tune_lambda_for_fitter(data, make_fitter, lambdas, **common)
        return lam, None, graph

    block_size = method.block_size
    scores = standardize(copula_transform(raw, block_size))
    lambdas = default_lambdas(global_lambda_max(scores, PowerLoss(GAUSSIAN_NU)), tuning.n_lambdas)

    def make_copula_fitter(lam: float) -> Callable[[Dataset], Graph]:
        return lambda resample: copula_blockmax_graph(resample, block_size, lam, rule)
    lam, graph, _ = tune_lambda_for_fitter(raw, make_copula_fitter, lambdas, **common)
    return lam, None, graph


def run_replicate(config: ExperimentConfig, replicate: int) -> List[ResultRow]:
    seed = replicate_seed(config.seed, config.scenario, replicate)
    raw, truth = generate(config, seed)
    data = raw if raw.standardized else standardize(raw)
    rows = []
    for method in config.methods:
        start = time.perf_counter()
        try:
            if isinstance(config.tuning, StabilityTuning):
                lam, nu, graph = _stability(method, raw, data, seed, config)
            else:
                lam, nu, graph = _oracle(method, raw, data, truth, config)
        except SubbotinError as e:
            logger.warning("replicate %d method %s failed (%s): %s", replicate, method.name, error_category(e), e)
            elapsed = (time.perf_counter() - start) * 1000 if config.record_wall_time else 0.0
            rows.append(ResultRow(config.scenario, method.name, replicate, 0.0, 0.0, 0.0, None, None, 0, elapsed, seed,
                                  error_category(e)))
            continue
        elapsed = (time.perf_counter() - start) * 1000 if config.record_wall_time else 0.0
        f1, tpr, fdr = f1_score(graph, truth)
        rows.append(ResultRow(config.scenario, method.name, replicate, f1, tpr, fdr, lam, nu, graph.edge_count,
                              elapsed, seed))
    return rows


def run_experiment(config: ExperimentConfig) -> List[ResultRow]:
    """Purpose: runs every method on every replicate of a scenario and scores it against the truth.

    Replicate r generates its data with replicate_seed(seed, scenario, r). Replicates run on
    config.threads worker threads; methods inside a replicate run in config order. A method that
    fails gives a row whose status is its error category, and the run goes on.

    Args:
        config: the experiment.

    returns:
        (list(ResultRow)) rows sorted by replicate, then method order.
    """
    order = {m.name: k for k, m in enumerate(config.methods)}
    per_replicate = parallel_map(lambda r: run_replicate(config, r), range(config.replicates), config.threads)
    rows = [row for rows in per_replicate for row in rows]
    return sorted(rows, key=lambda row: (row.replicate, order[row.method]))


def summarize(rows: Sequence[ResultRow]) -> List[SummaryRow]:
    # failed rows are left out; methods keep their first-appearance order
    methods: Dict[str, List[ResultRow]] = {}
    for row in rows:
        methods.setdefault(row.method, [])
        if row.status == "ok":
            methods[row.method].append(row)
    summary = []
    for method, ok in methods.items():
        f1 = np.array([row.f1 for row in ok])
        if len(ok) == 0:
            summary.append(SummaryRow(method, float('nan'), float('nan'), float('nan'), float('nan'), 0))
            continue
        sd = float(np.std(f1, ddof=1)) if len(ok) > 1 else 0.0
        summary.append(SummaryRow(method, float(f1.mean()), sd, float(np.mean([row.tpr for row in ok])),
                                  float(np.mean([row.fdr for row in ok])), len(ok)))
    return summary


def experiment_metadata(config: ExperimentConfig) -> Dict[str, Any]:
    return {
        "config": to_jsonable(config),
        "replicate_seeds": [replicate_seed(config.seed, config.scenario, r) for r in range(config.replicates)],
        "rule": config.rule.value,
        "gibbs": {"burn_in": config.burn_in, "thinning": config.thinning},
        "weak_correlation": WEAK_CORRELATION,
        "stability_threshold": config.stability_threshold() if isinstance(config.tuning, StabilityTuning) else None,
    }


def write_results(rows: Sequence[ResultRow], out_dir: Union[str, Path],
                  metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    paths = {"results": out_dir / "results.csv", "summary": out_dir / "summary.csv"}
    write_text(paths["results"], serialize_results(rows))
    write_text(paths["summary"], serialize_summary(summarize(rows)))
    if metadata is not None:
        paths["metadata"] = out_dir / "metadata.json"
        write_text(paths["metadata"], serialize_metadata(metadata))
    return paths


def _methods(*methods: MethodSpec) -> Tuple[MethodSpec, ...]:
    return tuple(methods)


def _subbotin_methods(shapes=(4, 6, 8)) -> Tuple[MethodSpec, ...]:
    return tuple(MethodSpec(f"subbotin({nu})", MethodKind.SUBBOTIN, nu=nu) for nu in shapes)


def table1_config(p: int = 30, n: int = 2000, replicates: int = 10, seed: int = 0, nu_true: int = 8,
                  graph_kind: GraphKind = GraphKind.SMALL_WORLD_CLIQUES, **overrides) -> ExperimentConfig:
    # Subbotin-distributed data, oracle tuning
    methods = _subbotin_methods() + _methods(MethodSpec("gaussian_ns", MethodKind.GAUSSIAN_NS))
    return ExperimentConfig(Scenario.SUBBOTIN, p, n, methods, replicates=replicates, seed=seed, nu_true=nu_true,
                            graph_kind=graph_kind, **overrides)


def table2_config(p: int = 30, n: int = 5000, replicates: int = 10, seed: int = 0, block_size: int = 10,
                  **overrides) -> ExperimentConfig:
    # block maxima, oracle tuning
    methods = _subbotin_methods() + _methods(
        MethodSpec("gaussian_ns", MethodKind.GAUSSIAN_NS),
        MethodSpec("quantile(0.5)", MethodKind.QUANTILE, tau=0.5),
        MethodSpec("quantile(0.9)", MethodKind.QUANTILE, tau=0.9),
        MethodSpec(f"copula({block_size})", MethodKind.COPULA, block_size=block_size))
    return ExperimentConfig(Scenario.BLOCK_MAXIMA, p, n, methods, replicates=replicates, seed=seed,
                            block_size=block_size, **overrides)


def table3_config(p: int = 30, n: int = 5000, replicates: int = 10, seed: int = 0, block_size: int = 10,
                  **overrides) -> ExperimentConfig:
    # peaks over threshold, oracle tuning
    methods = _subbotin_methods() + _methods(
        MethodSpec("gaussian_ns", MethodKind.GAUSSIAN_NS),
        MethodSpec("quantile(0.5)", MethodKind.QUANTILE, tau=0.5),
        MethodSpec("quantile(0.9)", MethodKind.QUANTILE, tau=0.9),
        MethodSpec("quantile(0.99)", MethodKind.QUANTILE, tau=0.99),
        MethodSpec(f"copula({block_size})", MethodKind.COPULA, block_size=block_size))
    return ExperimentConfig(Scenario.POT, p, n, methods, replicates=replicates, seed=seed, block_size=block_size,
                            **overrides)


PRESETS: Dict[str, Callable[..., ExperimentConfig]] = {
    "table1": table1_config,
    "table2": table2_config,
    "table3": table3_config,
}
